import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def balanced_table(Y):
    """ObservationTable for a t x n one-way layout."""
    from shrinklmm import ObservationTable
    Y = np.asarray(Y, dtype=float)
    t, n = Y.shape
    treat = np.repeat(np.arange(t), n)
    return ObservationTable(Y.ravel(), {"u": treat})
