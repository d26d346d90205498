import numpy as np
import pytest
from hypothesis import settings

from dyncomp.covariance import CrossCovSet
from dyncomp.synth import var1_crosscov

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_var1_covs(rng, n, num_lags, radius=0.8):
    """Exact cross-covariances of a random stable VAR(1) with random noise."""
    A = rng.standard_normal((n, n))
    A *= radius / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12)
    B = rng.standard_normal((n, n))
    return var1_crosscov(A, B @ B.T + 0.1 * np.eye(n), num_lags)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def var1_covs(rng):
    return random_var1_covs(rng, 5, 8)


def white_covs(n, num_lags):
    lags = np.zeros((num_lags, n, n))
    lags[0] = np.eye(n)
    return CrossCovSet(lags)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
