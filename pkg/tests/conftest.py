import numpy as np
import pytest

from dsnorm.datagen import CircleSpec, gen_circle
from dsnorm.kernel import gaussian_kernel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triangle():
    return np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@pytest.fixture(scope="session")
def circle100():
    return gen_circle(CircleSpec(100, 2), 7)


@pytest.fixture(scope="session")
def circle_kernel(circle100):
    return gaussian_kernel(circle100, 0.1)


def ones_offdiag(n):
    a = np.ones((n, n))
    np.fill_diagonal(a, 0.0)
    return a


def random_kernel(rng, n, dim=3, eps=None, floor=1e-12):
    """Gaussian kernel of random points with every off-diagonal entry >= ``floor``.

    Near the 1e-12 floor a kernel can be close to a direct sum of blocks,
    and Sinkhorn then needs far more than 1e6 steps; property tests that
    sample freely use a higher floor.
    """
    X = rng.normal(size=(n, dim))
    if eps is None:
        eps = rng.uniform(0.3, 3.0)
    K = gaussian_kernel(X, eps)
    while K.gram[~np.eye(n, dtype=bool)].min() < floor:
        eps *= 2
        K = gaussian_kernel(X, eps)
    return X, K


# acceptance lines are collected here and echoed after the run
ACCEPTANCE_LINES = []


def report_criterion(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
