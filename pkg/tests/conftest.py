import logging

import numpy as np
import pytest

from jabkit import KnnSpec

# The empty-out-of-bag warning is expected noise in small-ensemble tests.
logging.getLogger("jabkit.intervals").setLevel(logging.ERROR)

# A learner that predicts the mean of its training responses everywhere:
# k-NN with k far above any training size used in these tests.
CONSTANT_MEAN = KnnSpec(k=10**6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
