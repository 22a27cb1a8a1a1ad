import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parmor import linalg
from parmor.errors import DimensionMismatch, NotHurwitz, RankDeficient, SizeLimitExceeded, SpectrumOverlap

from conftest import kron_lyapunov, kron_sylvester


def _bench_block():
    return np.array([[0.0, 10.0], [-10.0, 0.0]]) + 0.55 * np.array([[-10.0, 0.0], [0.0, -10.0]])


@pytest.mark.parametrize("solver", [linalg.solve_sylvester, linalg.solve_sylvester_kron])
class TestSylvesterExamples:
    def test_scalar(self, solver):
        assert np.allclose(solver([[-1.0]], [[0.0]], [[1.0]]), [[1.0]], atol=1e-14)

    def test_block_dc(self, solver):
        A = _bench_block()
        B = np.array([[2.0], [0.0]])
        # explicit 2x2 inverse
        a, b, c, d = A.ravel()
        inv = np.array([[d, -b], [-c, a]]) / (a * d - b * c)
        Pi = solver(A, [[0.0]], B)
        assert np.allclose(Pi, -inv @ B, rtol=1e-13)

    def test_cauchy(self, solver):
        Pi = solver(np.diag([-1.0, -2.0]), np.diag([1.0, 2.0]), np.ones((2, 2)))
        assert np.allclose(Pi, [[1 / 2, 1 / 3], [1 / 3, 1 / 4]], rtol=1e-13)


def test_kron_scalar_plus():
    assert np.allclose(linalg.solve_sylvester_kron([[-1.0]], [[1.0]], [[2.0]]), [[1.0]])


def test_random_cross_solver():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((5, 5)) - 4 * np.eye(5)
    S = rng.standard_normal((3, 3))
    F = rng.standard_normal((5, 3))
    a = linalg.solve_sylvester(A, S, F)
    b = linalg.solve_sylvester_kron(A, S, F)
    assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)


def test_overlap_and_size():
    with pytest.raises(SpectrumOverlap):
        linalg.solve_sylvester([[1.0]], [[1.0]], [[1.0]])
    with pytest.raises(SpectrumOverlap):
        linalg.solve_sylvester_kron(np.diag([0.0, -1.0]), [[0.0]], np.ones((2, 1)))
    with pytest.raises(SizeLimitExceeded):
        linalg.solve_sylvester_kron(-np.eye(100), np.zeros((50, 50)), np.ones((100, 50)))


def test_solver_reuse_many_rhs():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6)) - 5 * np.eye(6)
    S = np.array([[0.0, 2.0], [-2.0, 0.0]])
    solver = linalg.SylvesterSolver(A, S)
    for _ in range(3):
        F = rng.standard_normal((6, 2))
        assert np.allclose(solver.solve(F), kron_sylvester(A, S, F), rtol=1e-10, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 12), nu=st.integers(1, 6))
def test_sylvester_residual_property(seed, n, nu):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) - (2 + np.sqrt(n)) * np.eye(n)
    W = rng.standard_normal((nu, nu))
    S = W - W.T
    F = rng.standard_normal((n, nu))
    Pi = linalg.solve_sylvester(A, S, F)
    res = np.linalg.norm(A @ Pi + F - Pi @ S)
    assert res / (1 + np.linalg.norm(F)) <= 1e-8
    assert np.linalg.norm(Pi - kron_sylvester(A, S, F)) <= 1e-10 * max(np.linalg.norm(Pi), 1e-300)


class TestLyapunov:
    def test_scalar(self):
        assert np.allclose(linalg.solve_lyapunov([[-1.0]], [[2.0]]), [[1.0]])

    def test_diag(self):
        assert np.allclose(linalg.solve_lyapunov(np.diag([-1.0, -3.0]), np.eye(2)), np.diag([0.5, 1 / 6]))

    def test_companion(self):
        A = np.array([[0.0, 1.0], [-2.0, -3.0]])
        X = linalg.solve_lyapunov(A, np.eye(2))
        assert np.allclose(X, kron_lyapunov(A, np.eye(2)), rtol=1e-12)

    def test_not_hurwitz(self):
        with pytest.raises(NotHurwitz):
            linalg.solve_lyapunov([[0.5]], [[1.0]])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), n=st.integers(1, 10))
    def test_symmetry_positivity(self, seed, n):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((n, n)) - (2 + np.sqrt(n)) * np.eye(n)
        M = rng.standard_normal((n, n))
        Q = M @ M.T + np.eye(n)
        X = linalg.solve_lyapunov(A, Q)
        assert np.linalg.norm(X - X.T) <= 1e-12 * np.linalg.norm(X)
        assert linalg.min_eig_sym(X) > 0
        assert np.linalg.norm(A.T @ X + X @ A + Q) <= 1e-8 * np.linalg.norm(Q)


class TestLeastSquares:
    def test_identity(self):
        assert np.allclose(linalg.least_squares(np.eye(3), [1.0, 2.0, 3.0]), [1, 2, 3])

    def test_mean(self):
        assert np.allclose(linalg.least_squares([[1.0], [1.0]], [0.0, 2.0]), [1.0])

    def test_line(self):
        M = np.array([[1.0, 0], [1, 1], [1, 2]])
        b = np.array([1.0, 2, 3])
        x = linalg.least_squares(M, b)
        assert np.allclose(x, np.linalg.solve(M.T @ M, M.T @ b))
        assert np.allclose(x, [1, 1])

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            linalg.least_squares(np.ones((3, 2)), np.ones(3))

    def test_ridge_scalar_and_deficient(self):
        assert np.allclose(linalg.least_squares([[1.0]], [2.0], ridge=1.0), [1.0])
        x = linalg.least_squares(np.ones((3, 2)), np.ones(3), ridge=np.eye(2))
        assert np.all(np.isfinite(x))
        with pytest.raises(DimensionMismatch):
            linalg.least_squares(np.eye(2), np.ones(2), ridge=np.ones((2, 2)))

    def test_optimality_perturbation(self):
        rng = np.random.default_rng(11)
        M = rng.standard_normal((20, 5))
        b = rng.standard_normal((20, 2))
        for ridge in (None, 0.3):
            X = linalg.least_squares(M, b, ridge=ridge)
            lam = 0.0 if ridge is None else ridge

            def obj(Y):
                return np.sum((M @ Y - b) ** 2) + lam * np.sum(Y**2)

            base = obj(X)
            for _ in range(20):
                D = rng.standard_normal(X.shape)
                assert obj(X + 1e-4 * D / np.linalg.norm(D)) >= base


def test_spectral_helpers():
    assert linalg.is_hurwitz([[-1.0]], 0)
    assert not linalg.is_hurwitz([[0.0]], 0)
    assert not linalg.is_hurwitz([[-1.0]], 2.0)
    ev = linalg.spectrum([[0.0, 10.0], [-10.0, 0.0]])
    assert np.allclose(sorted(ev.imag), [-10, 10]) and np.allclose(ev.real, 0)
    assert linalg.numerical_rank(np.ones((3, 3)), 1e-10) == 1
    assert linalg.min_eig_sym([[1.0, 2.0], [0.0, 1.0]]) == pytest.approx(0.0, abs=1e-14)


def test_conjugate_closed_spectrum():
    rng = np.random.default_rng(5)
    ev = linalg.spectrum(rng.standard_normal((7, 7)))
    assert np.allclose(np.sort_complex(ev), np.sort_complex(ev.conj()))


def test_as_matrix_rejects_nonfinite():
    with pytest.raises(ValueError):
        linalg.as_matrix([[np.nan]])


def test_transfer_values_matches_solve():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((6, 6)) - 3 * np.eye(6)
    B = rng.standard_normal((6, 1))
    C = rng.standard_normal((1, 6))
    s = np.array([1j, 2.0 + 3j, 0.0])
    ref = [(C @ np.linalg.solve(z * np.eye(6) - A, B)).item() for z in s]
    assert np.allclose(linalg.transfer_values(A, B, C, s), ref, rtol=1e-10)
