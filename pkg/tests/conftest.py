import numpy as np
import pytest

from rffblr import Hyperparams, apply_map, init_posterior, sample_map, sweep

# filled by test_acceptance.py, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem(rng):
    """(X, Y, rff, post, hyper, Phi) with a few sweeps already applied."""
    X = rng.standard_normal((40, 3))
    Y = np.column_stack([np.sin(X[:, 0]), np.cos(X[:, 1]) * X[:, 2]])
    Y = Y + 0.1 * rng.standard_normal(Y.shape)
    rff = sample_map(3, 25, 3, 0.4)
    hyper = Hyperparams()
    post = init_posterior(25, 2, hyper)
    Phi = apply_map(rff, X)
    for _ in range(3):
        sweep(post, Phi, Y, hyper)
    return X, Y, rff, post, hyper, Phi
