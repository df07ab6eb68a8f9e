import numpy as np
import pytest

from spdemil.operators import example_problem


class ZeroStream:
    """Stand-in stream whose draws are all zero (tail-suppression tests)."""

    def standard_normal(self, shape=None):
        return np.zeros(shape if shape is not None else ())


@pytest.fixture(scope="session")
def problem():
    return example_problem()


@pytest.fixture()
def zero_stream():
    return ZeroStream()
