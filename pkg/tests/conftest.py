import numpy as np
import pytest

from vbcdhmm.data import GeneratorSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def dynamics_spec(sticky_lag):
    """Two states with shared emissions at -3 and +3.

    ``sticky_lag=1`` gives a lag-1 chain with uniform transitions; ``sticky_lag=2``
    gives a lag-2 chain that repeats the state two frames back with probability 0.98;
    a lag-1 explanation can then cover at most 4% of its frames.
    """
    uniform = np.full((2, 2), 0.5)
    sticky = np.array([[0.98, 0.02], [0.02, 0.98]])
    if sticky_lag == 1:
        A_hat = np.array([[1.0, 0.0], [1.0, 0.0]])
        A_dep = np.stack([uniform, uniform])
    else:
        A_hat = np.array([[0.0, 1.0], [0.0, 1.0]])
        A_dep = np.stack([uniform, sticky])
    return GeneratorSpec(
        pi_hat=np.array([1.0, 0.0]),
        A_hat=A_hat,
        pi=np.array([0.5, 0.5]),
        A_dep=A_dep,
        weights=np.ones((2, 1)),
        means=np.array([[[-3.0]], [[3.0]]]),
        covariances=np.ones((2, 1, 1, 1)),
    )


@pytest.fixture
def lag1_spec():
    return dynamics_spec(1)


@pytest.fixture
def lag2_spec():
    return dynamics_spec(2)


@pytest.fixture
def blob_spec():
    """K = 1 chain over two well separated 2-D blobs."""
    return GeneratorSpec(
        pi_hat=np.array([1.0]),
        A_hat=np.array([[1.0]]),
        pi=np.array([0.5, 0.5]),
        A_dep=np.array([[[0.8, 0.2], [0.3, 0.7]]]),
        weights=np.ones((2, 1)),
        means=np.array([[[0.0, 0.0]], [[6.0, -4.0]]]),
        covariances=np.tile(0.25 * np.eye(2), (2, 1, 1, 1)),
    )
