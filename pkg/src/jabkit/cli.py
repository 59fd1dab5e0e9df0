"""Command-line interface.

Four subcommands:

- ``predict``: fit the out-of-bag jackknife+ on a training CSV and write an
  interval per row of a test CSV.
- ``experiment``: run a multi-split coverage/width study on synthetic or
  CSV data and emit report.json, TSV tables, and figures.
- ``verify``: run the proof-machinery oracle suite (tournament counting
  bound, coupling identity, quantile oracle) and report pass/fail.
- ``stability``: evaluate the concentration bound delta and the coverage
  annotations it implies for the inflated intervals.

Every flag can also be supplied through ``--config FILE``, an INI-style
key/value file whose keys mirror the flag names (dashes become
underscores); explicitly passed command-line flags win over file values.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .aggregation import Mean, Median, TrimmedMean, aggregate
from .core import FixedB, MethodConfig, RandomB, RngKey, SamplingMode, StabilityParams
from .csvio import load_csv
from .errors import JabkitError
from .experiment import CsvSource, ExperimentPlan, MethodPlan, run_experiment
from .intervals import fit_jab, predict_jab, stability_delta, theorem_levels
from .oracle import coupling_check, lifted_residuals, s_alpha, tournament
from .quantiles import q_minus, q_plus, quantile_index
from .regressors import ForestSpec, KnnSpec, RidgeSpec, TreeSpec
from .report import emit_report
from .synthetic import FriedmanSpec, LinearGaussianSpec, generate


def _add_method_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.1, help="miscoverage level in (0,1)")
    p.add_argument("--m", type=int, default=None,
                   help="resample size (default: the training size)")
    p.add_argument("--b", type=int, default=20, help="fixed ensemble size")
    p.add_argument("--b-tilde", type=int, default=None,
                   help="binomial budget for the random ensemble size")
    p.add_argument("--sampling", choices=["with", "without"], default="with",
                   help="draw resamples with or without replacement")
    p.add_argument("--b-mode", choices=["fixed", "random"], default="fixed",
                   help="fixed member count, or one binomial draw")
    p.add_argument("--regressor", choices=["ridge", "knn", "tree", "forest"],
                   default="ridge")
    p.add_argument("--aggregation", choices=["mean", "median", "trimmed-mean"],
                   default="mean")
    p.add_argument("--trim", type=float, default=0.25,
                   help="per-tail cut for the trimmed mean")
    p.add_argument("--seed", type=int, default=0)


def _regressor_spec(args):
    return {
        "ridge": RidgeSpec(),
        "knn": KnnSpec(),
        "tree": TreeSpec(),
        "forest": ForestSpec(),
    }[args.regressor]


def _aggregation_spec(args):
    if args.aggregation == "mean":
        return Mean()
    if args.aggregation == "median":
        return Median()
    return TrimmedMean(proportion_cut=args.trim)


def _method_config(args, n_train: int) -> MethodConfig:
    m = args.m if args.m is not None else n_train
    if args.b_mode == "random":
        if args.b_tilde is None:
            raise JabkitError("--b-mode random requires --b-tilde")
        b_mode = RandomB(args.b_tilde)
    else:
        b_mode = FixedB(args.b)
    return MethodConfig(
        alpha=args.alpha,
        m=m,
        sampling_mode=SamplingMode(args.sampling),
        b_mode=b_mode,
        regressor_spec=_regressor_spec(args),
        aggregation_spec=_aggregation_spec(args),
        seed=args.seed,
    )


def _selector(raw: str) -> str | int:
    try:
        return int(raw)
    except ValueError:
        return raw


def _load_test_features(path: str, selector: str | int, p_train: int):
    """Test features, plus responses when the response column is present."""
    with open(path, newline="") as handle:
        header = [h.strip() for h in next(csv.reader(handle))]
    has_response = (
        selector in header if isinstance(selector, str) else len(header) == p_train + 1
    )
    if has_response:
        test = load_csv(path, selector)
        return test.features, test.responses
    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise JabkitError(f"{path}: could not parse test features: {exc}") from exc
    return raw, None


def _cmd_predict(args) -> int:
    selector = _selector(args.response_col)
    train = load_csv(args.train_csv, selector)
    config = _method_config(args, train.n)
    ensemble, residuals = fit_jab(train, config)
    x_test, y_test = _load_test_features(args.test_csv, selector, train.p)
    if x_test.shape[1] != train.p:
        raise JabkitError(
            f"test features have {x_test.shape[1]} columns, training had {train.p}"
        )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["row\tpoint_estimate\tlower\tupper"]
    covered = 0
    for i, x in enumerate(x_test):
        itv = predict_jab(ensemble, residuals, x)
        point = aggregate(config.aggregation_spec, [m.predict(x) for m in ensemble.models])
        lines.append(f"{i}\t{point!r}\t{itv.lower!r}\t{itv.upper!r}")
        if y_test is not None and itv.contains(float(y_test[i])):
            covered += 1
    path = out_dir / "intervals.tsv"
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({len(x_test)} intervals, ensemble of {ensemble.b})")
    if y_test is not None and len(x_test) > 0:
        print(f"coverage on supplied responses: {covered / len(x_test):.4f}")
    return 0


def _cmd_experiment(args) -> int:
    if args.train_csv is not None:
        source = CsvSource(path=args.train_csv, response_col=_selector(args.response_col))
    elif args.synthetic == "friedman":
        source = FriedmanSpec(p=max(args.p, 5), noise_sd=args.noise_sd)
    else:
        source = LinearGaussianSpec(p=args.p, noise_sd=args.noise_sd)
    config = _method_config(args, args.n_train)
    methods = tuple(
        MethodPlan(name=m.strip(), config=config)
        for m in args.methods.split(",")
        if m.strip()
    )
    plan = ExperimentPlan(
        source=source,
        n_train=args.n_train,
        n_test=args.n_test,
        n_splits=args.splits,
        methods=methods,
        seed=args.seed,
    )
    report = run_experiment(plan)
    written = emit_report(report, args.out_dir, figures=not args.no_figures)
    for result in report.results:
        if result.error is not None:
            print(f"method {result.method} failed: {result.error}", file=sys.stderr)
        elif result.splits:
            cov = np.mean([s.coverage for s in result.splits])
            widths = [s.mean_width for s in result.splits if s.mean_width is not None]
            width = np.mean(widths) if widths else math.inf
            print(f"{result.method}: coverage {cov:.4f}, mean width {width:.4f}")
    print("wrote " + ", ".join(str(p) for p in written))
    return 1 if any(r.error is not None for r in report.results) else 0


def _verify_line(name: str, passed: bool, detail: str) -> int:
    print(f"  {name}: {'PASS' if passed else f'FAIL ({detail})'}")
    return 0 if passed else 1


def _cmd_verify(args) -> int:
    key = RngKey(args.seed)
    failures = 0

    # Quantile oracle: order statistics against plain sort-and-index.
    rng = key.child(0).generator()
    bad = 0
    for _ in range(args.trials):
        n = int(rng.integers(1, 50))
        values = rng.standard_normal(n) * 10.0
        alpha = float(rng.uniform(0.01, 0.99))
        k = quantile_index(n, alpha)
        expected_hi = math.inf if k > n else float(np.sort(values)[k - 1])
        expected_lo = -math.inf if k > n else -float(np.sort(-values)[k - 1])
        if q_plus(values, alpha) != expected_hi or q_minus(values, alpha) != expected_lo:
            bad += 1
    failures += _verify_line("quantile oracle equivalence", bad == 0, f"{bad} mismatches")

    # Tournament counting bound on random matrices.
    rng = key.child(1).generator()
    violations = 0
    for _ in range(args.trials):
        pool = int(rng.integers(2, 31))
        r = rng.random((pool, pool))
        np.fill_diagonal(r, 0.0)
        a = tournament(r)
        for alpha in (0.05, 0.1, 0.3):
            if s_alpha(a, alpha).size > 2.0 * alpha * pool:
                violations += 1
    failures += _verify_line(
        "tournament counting bound", violations == 0, f"{violations} violations"
    )

    # Coupling identity on seeded lifted runs.
    bad = 0
    runs = max(1, args.trials // 100)
    for t in range(runs):
        sub = key.child(2, t)
        pool = int(sub.child(0).generator().integers(4, 12))
        data = generate(LinearGaussianSpec(p=2, noise_sd=1.0), pool, sub.child(1))
        run = lifted_residuals(
            data, b_tilde=int(sub.child(2).generator().integers(1, 30)),
            m=pool, mode=SamplingMode.WITH_REPLACEMENT,
            regressor_spec=RidgeSpec(), aggregation_spec=Mean(),
            rng_key=sub.child(3),
        )
        if not coupling_check(data, run, alpha=0.2):
            bad += 1
    failures += _verify_line("coupling identity", bad == 0, f"{bad} of {runs} runs mismatched")

    print("verify: " + ("all checks passed" if failures == 0 else f"{failures} check(s) FAILED"))
    return 0 if failures == 0 else 1


def _cmd_stability(args) -> int:
    delta = stability_delta(args.b, args.theta, args.epsilon, args.lo, args.hi)
    clamped = min(delta, 1.0)
    print(f"delta = {delta:.6g} (clamped to {clamped:.6g})")
    star = None
    if args.delta_star is not None or args.epsilon_star is not None:
        if args.delta_star is None or args.epsilon_star is None:
            raise JabkitError("--epsilon-star and --delta-star must be given together")
        star = (args.epsilon_star, args.delta_star)
    if clamped < 1.0:
        params = StabilityParams(
            epsilon=args.epsilon, delta=clamped,
            epsilon_star=star[0] if star else None,
            delta_star=star[1] if star else None,
        )
        levels = theorem_levels(args.alpha, params)
        print(f"inflate intervals by 2*epsilon = {2 * args.epsilon:g} for "
              f"coverage >= {levels['fixed_b_level']:.6g} at fixed ensemble size")
        if "out_of_sample_level" in levels:
            print(f"inflate by 2*(epsilon + epsilon_star) = "
                  f"{2 * (args.epsilon + star[0]):g} for coverage >= "
                  f"{levels['out_of_sample_level']:.6g}")
    else:
        print("bound is vacuous (delta >= 1); increase B or epsilon")
    print(f"assumption-free floor at alpha={args.alpha:g}: {1 - 2 * args.alpha:.6g}")
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="jabkit",
        description="Predictive intervals from out-of-bag ensembles, with an "
                    "experiment harness and a proof-machinery verifier.",
    )
    parser.add_argument("--config", help="INI file of flag defaults (CLI overrides it)")
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("predict", help="fit on a training CSV, write intervals for a test CSV")
    _add_method_flags(p)
    p.add_argument("--train-csv", required=True)
    p.add_argument("--test-csv", required=True)
    p.add_argument("--response-col", default="-1",
                   help="response column name or 0-based index (default: last)")
    p.add_argument("--out-dir", default="jabkit_out")
    p.set_defaults(func=_cmd_predict)
    commands["predict"] = p

    p = sub.add_parser("experiment", help="run a multi-split coverage/width study")
    _add_method_flags(p)
    p.add_argument("--train-csv", default=None,
                   help="CSV pool to split (omit to use --synthetic)")
    p.add_argument("--response-col", default="-1")
    p.add_argument("--synthetic", choices=["linear", "friedman"], default="linear")
    p.add_argument("--p", type=int, default=5, help="synthetic feature count")
    p.add_argument("--noise-sd", type=float, default=1.0)
    p.add_argument("--n-train", type=int, default=40)
    p.add_argument("--n-test", type=int, default=100)
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--methods", default="jab",
                   help="comma list from jab,jplus_ensemble,jplus_base,jackknife,jmm_ab")
    p.add_argument("--out-dir", default="jabkit_out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_experiment)
    commands["experiment"] = p

    p = sub.add_parser("verify", help="run the oracle suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=2000)
    p.set_defaults(func=_cmd_verify)
    commands["verify"] = p

    p = sub.add_parser("stability", help="evaluate the concentration bound")
    p.add_argument("--b", type=int, required=True, help="ensemble size")
    p.add_argument("--theta", type=float, required=True,
                   help="probability a resample misses a fixed point")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--lo", type=float, required=True, help="lower output bound")
    p.add_argument("--hi", type=float, required=True, help="upper output bound")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--epsilon-star", type=float, default=None)
    p.add_argument("--delta-star", type=float, default=None)
    p.set_defaults(func=_cmd_stability)
    commands["stability"] = p
    return parser, commands


def _apply_config_file(commands, argv: list[str]) -> None:
    # Pull --config out early so its values become parser defaults for every
    # subcommand; explicitly passed flags still override them.
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    ini = configparser.ConfigParser()
    if not ini.read(known.config):
        raise JabkitError(f"config file not found: {known.config}")
    values: dict[str, str] = dict(ini.defaults())
    for section in ini.sections():
        values.update(dict(ini.items(section)))
    flat = {k.replace("-", "_"): v for k, v in values.items()}
    for sub in commands.values():
        applicable = {}
        for action in sub._actions:  # noqa: SLF001 - argparse has no public walk
            if action.dest not in flat:
                continue
            raw = flat[action.dest]
            if isinstance(action, argparse._StoreTrueAction):  # noqa: SLF001
                applicable[action.dest] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                applicable[action.dest] = action.type(raw)
            else:
                applicable[action.dest] = raw
        sub.set_defaults(**applicable)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        _apply_config_file(commands, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except JabkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
