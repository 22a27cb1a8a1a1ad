import numpy as np
import pytest

from parmor import psys, siggen


def kron_sylvester(A, S, F):
    """Vectorised oracle for ``A X + F = X S``."""
    n, nu = A.shape[0], S.shape[0]
    K = np.kron(np.eye(nu), A) - np.kron(S.T, np.eye(n))
    return np.linalg.solve(K, -F.reshape(-1, order="F")).reshape((n, nu), order="F")


def kron_lyapunov(A, Q):
    n = A.shape[0]
    K = np.kron(np.eye(n), A.T) + np.kron(A.T, np.eye(n))
    return np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape((n, n), order="F")


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b))


@pytest.fixture
def bench2():
    return psys.make_benchmark(2)


@pytest.fixture
def bench10():
    return psys.make_benchmark(10)


@pytest.fixture
def gen_small():
    return siggen.from_frequencies([1.0, 30.0])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
