"""Dense linear-algebra kernels.

Sylvester and Lyapunov equations are solved with the Bartels-Stewart
approach: real Schur forms of the coefficient matrices, a quasi-triangular
solve (LAPACK ``trsyl``) and a back-transformation.  Solver objects cache the
Schur factorisations so that nested equations sharing the same coefficient
matrices cost a single factorisation.

Sign conventions follow the moment-matching literature::

    A @ Pi + F = Pi @ S          (Sylvester)
    A.T @ X + X @ A = -Q         (Lyapunov)
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import (
    DimensionMismatch,
    NotHurwitz,
    NumericalFailure,
    RankDeficient,
    SingularShift,
    SizeLimitExceeded,
    SpectrumOverlap,
)

TOL_SPEC = 1e-10
RANK_TOL = 1e-10
KRON_LIMIT = 4000
_RESIDUAL_TOL = 1e-8


def as_matrix(x, name="matrix", shape=None):
    """Return ``x`` as a finite, nonempty 2-D float array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.size == 0:
        raise DimensionMismatch(f"{name} must be a nonempty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    if shape is not None:
        for got, want in zip(a.shape, shape):
            if want is not None and got != want:
                raise DimensionMismatch(f"{name} has shape {a.shape}, expected {shape}")
    return a


def _square(a, name):
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")


def _schur(a):
    try:
        t, z = sla.schur(a, output="real")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"Schur decomposition failed: {exc}") from exc
    return t, z


def schur_eigvals(t):
    """Eigenvalues of a real quasi-upper-triangular Schur factor."""
    n = t.shape[0]
    out = np.empty(n, dtype=complex)
    i = 0
    while i < n:
        if i + 1 < n and t[i + 1, i] != 0.0:
            a, b, c, d = t[i, i], t[i, i + 1], t[i + 1, i], t[i + 1, i + 1]
            half_tr = 0.5 * (a + d)
            disc = (0.5 * (a - d)) ** 2 + b * c
            root = np.sqrt(complex(disc))
            out[i], out[i + 1] = half_tr + root, half_tr - root
            i += 2
        else:
            out[i] = t[i, i]
            i += 1
    return out


def spectral_separation(eig_a, eig_b):
    """Smallest distance between two finite point sets in the complex plane."""
    eig_a = np.asarray(eig_a, dtype=complex).ravel()
    eig_b = np.asarray(eig_b, dtype=complex).ravel()
    return float(np.min(np.abs(eig_a[:, None] - eig_b[None, :])))


class SylvesterSolver:
    """Reusable solver for ``A @ Pi + F = Pi @ S`` with fixed ``A`` and ``S``.

    Parameters
    ----------
    A : (n, n) array_like
    S : (nu, nu) array_like
    tol_spec : float
        Minimum admissible distance between the spectra of ``A`` and ``S``.

    Raises
    ------
    SpectrumOverlap
        If the spectra are closer than ``tol_spec``.
    """

    def __init__(self, A, S, tol_spec=TOL_SPEC):
        self.A = as_matrix(A, "A")
        self.S = as_matrix(S, "S")
        _square(self.A, "A")
        _square(self.S, "S")
        self._ta, self._za = _schur(self.A)
        self._ts, self._zs = _schur(self.S)
        self.eig_A = schur_eigvals(self._ta)
        self.eig_S = schur_eigvals(self._ts)
        self.separation = spectral_separation(self.eig_A, self.eig_S)
        if self.separation < tol_spec:
            raise SpectrumOverlap(
                f"spectra of A and S are {self.separation:.3e} apart (< {tol_spec:g})"
            )

    def solve(self, F):
        F = as_matrix(F, "F", shape=(self.A.shape[0], self.S.shape[0]))
        # A Pi - Pi S = -F in Schur coordinates
        c = self._za.T @ (-F) @ self._zs
        y, scale, info = lapack.dtrsyl(self._ta, self._ts, c, isgn=-1)
        if info < 0:
            raise NumericalFailure(f"trsyl rejected argument {-info}")
        pi = self._za @ (y / scale) @ self._zs.T
        if not np.all(np.isfinite(pi)):
            raise NumericalFailure("Sylvester solve produced non-finite entries")
        res = np.linalg.norm(self.A @ pi + F - pi @ self.S)
        bound = _RESIDUAL_TOL * (
            np.linalg.norm(self.A) * np.linalg.norm(pi)
            + np.linalg.norm(F)
            + np.linalg.norm(pi) * np.linalg.norm(self.S)
        )
        if res > bound and res > np.finfo(float).tiny:
            raise NumericalFailure(f"Sylvester residual {res:.3e} exceeds {bound:.3e}")
        return pi


def solve_sylvester(A, S, F, tol_spec=TOL_SPEC):
    """Solve ``A @ Pi + F = Pi @ S`` for ``Pi`` (Schur-based).

    Examples
    --------
    >>> solve_sylvester([[-1.0]], [[0.0]], [[1.0]])
    array([[1.]])
    """
    return SylvesterSolver(A, S, tol_spec=tol_spec).solve(F)


def solve_sylvester_kron(A, S, F, tol_spec=TOL_SPEC, kron_limit=KRON_LIMIT):
    """Solve the Sylvester equation by the vectorised Kronecker system.

    ``vec(Pi) = -(I_nu kron A - S.T kron I_n)^{-1} vec(F)``.  Intended as an
    oracle and for tiny systems; the dense system has ``(n nu)^2`` entries.
    """
    A = as_matrix(A, "A")
    S = as_matrix(S, "S")
    _square(A, "A")
    _square(S, "S")
    n, nu = A.shape[0], S.shape[0]
    F = as_matrix(F, "F", shape=(n, nu))
    if n * nu > kron_limit:
        raise SizeLimitExceeded(f"n*nu = {n * nu} exceeds kron_limit = {kron_limit}")
    sep = spectral_separation(np.linalg.eigvals(A), np.linalg.eigvals(S))
    if sep < tol_spec:
        raise SpectrumOverlap(f"spectra of A and S are {sep:.3e} apart (< {tol_spec:g})")
    big = np.kron(np.eye(nu), A) - np.kron(S.T, np.eye(n))
    vec_pi = -np.linalg.solve(big, F.reshape(-1, order="F"))
    return vec_pi.reshape((n, nu), order="F")


class LyapunovSolver:
    """Reusable solver for ``A.T @ X + X @ A = -Q`` with Hurwitz ``A``."""

    def __init__(self, A):
        self.A = as_matrix(A, "A")
        _square(self.A, "A")
        self._t, self._z = _schur(self.A)
        self.eig_A = schur_eigvals(self._t)
        if np.max(self.eig_A.real) >= 0.0:
            raise NotHurwitz(
                f"A has an eigenvalue with real part {np.max(self.eig_A.real):.3e} >= 0"
            )

    def solve(self, Q, symmetric=True):
        n = self.A.shape[0]
        Q = as_matrix(Q, "Q", shape=(n, n))
        c = -(self._z.T @ Q @ self._z)
        y, scale, info = lapack.dtrsyl(self._t, self._t, c, trana="T", tranb="N", isgn=1)
        if info < 0:
            raise NumericalFailure(f"trsyl rejected argument {-info}")
        x = self._z @ (y / scale) @ self._z.T
        if symmetric:
            x = 0.5 * (x + x.T)
        if not np.all(np.isfinite(x)):
            raise NumericalFailure("Lyapunov solve produced non-finite entries")
        res = np.linalg.norm(self.A.T @ x + x @ self.A + Q)
        bound = _RESIDUAL_TOL * (2.0 * np.linalg.norm(self.A) * np.linalg.norm(x) + np.linalg.norm(Q))
        if res > bound and res > np.finfo(float).tiny:
            raise NumericalFailure(f"Lyapunov residual {res:.3e} exceeds {bound:.3e}")
        return x


def solve_lyapunov(A, Q):
    """Solve ``A.T @ X + X @ A = -Q`` for symmetric ``X``.

    Raises
    ------
    NotHurwitz
        If ``A`` has an eigenvalue in the closed right half-plane.
    """
    Q = as_matrix(Q, "Q")
    if not np.allclose(Q, Q.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(Q).max())):
        raise ValueError("Q must be symmetric")
    return LyapunovSolver(A).solve(Q)


def _ridge_vector(ridge, n):
    lam = np.asarray(ridge, dtype=float)
    if lam.ndim == 2:
        if lam.shape != (n, n) or np.count_nonzero(lam - np.diag(np.diag(lam))):
            raise DimensionMismatch("ridge matrix must be diagonal n x n")
        lam = np.diag(lam)
    lam = np.broadcast_to(lam, (n,)).astype(float)
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("ridge weights must be finite and nonnegative")
    return lam


def least_squares(M, b, ridge=None, rank_tol=RANK_TOL):
    """Minimise ``||M X - b||^2 (+ sum_j ridge_j ||X_j||^2)`` column-wise.

    Parameters
    ----------
    M : (m, n) array_like
    b : (m,) or (m, k) array_like
    ridge : None, float, (n,) or diagonal (n, n) array_like
        Diagonal Tikhonov weights.  When given, the problem is solved through
        the QR factorisation of ``[M; sqrt(Lambda)]``.
    rank_tol : float
        Relative singular-value threshold used for the rank check when
        ``ridge`` is None.

    Returns
    -------
    X : (n,) or (n, k) ndarray
        Same trailing shape as ``b``.

    Raises
    ------
    RankDeficient
        If ``ridge`` is None and ``M`` has numerical column rank below ``n``.
    """
    M = as_matrix(M, "M")
    b_arr = np.asarray(b, dtype=float)
    vector_rhs = b_arr.ndim == 1
    b2 = as_matrix(b_arr, "b")
    m, n = M.shape
    if b2.shape[0] != m:
        raise DimensionMismatch(f"b has {b2.shape[0]} rows, M has {m}")
    if ridge is None:
        rank = numerical_rank(M, rank_tol)
        if rank < n:
            raise RankDeficient(
                f"matrix has numerical rank {rank} < {n} columns; consider a ridge penalty"
            )
        lhs, rhs = M, b2
    else:
        lam = _ridge_vector(ridge, n)
        lhs = np.vstack([M, np.diag(np.sqrt(lam))])
        rhs = np.vstack([b2, np.zeros((n, b2.shape[1]))])
    q, r = sla.qr(lhs, mode="economic")
    diag = np.abs(np.diag(r))
    if diag.min() <= np.finfo(float).eps * max(diag.max(), 1.0) * n:
        raise RankDeficient("triangular factor is singular")
    x = sla.solve_triangular(r, q.T @ rhs)
    return x.ravel() if vector_rhs else x


def spectrum(A):
    """Eigenvalues of a square matrix, sorted by real then imaginary part."""
    A = as_matrix(A, "A")
    _square(A, "A")
    try:
        ev = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return ev[np.lexsort((ev.imag, ev.real))]


def is_hurwitz(A, margin=0.0):
    """True when every eigenvalue has real part strictly below ``-margin``."""
    return bool(np.max(spectrum(A).real) < -margin)


def min_eig_sym(A):
    A = as_matrix(A, "A")
    _square(A, "A")
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


def max_eig_sym(A):
    A = as_matrix(A, "A")
    _square(A, "A")
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[-1])


def numerical_rank(M, rank_tol=RANK_TOL):
    """Number of singular values at least ``rank_tol`` times the largest."""
    M = as_matrix(M, "M")
    sv = sla.svd(M, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv >= rank_tol * sv[0]))


def transfer_values(A, B, C, s, tol=1e-12):
    """Evaluate ``C (s I - A)^{-1} B`` at each shift in ``s``.

    A diagonalisation is reused across shifts when the eigenvector basis is
    well conditioned; otherwise one dense solve per shift is performed.

    Raises
    ------
    SingularShift
        If a shift lies on (or numerically on) the spectrum of ``A``.
    """
    A = as_matrix(A, "A")
    _square(A, "A")
    n = A.shape[0]
    B = as_matrix(B, "B", shape=(n, None))
    C = as_matrix(C, "C", shape=(None, n))
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    lam, V = np.linalg.eig(A)
    scale = 1.0 + np.abs(lam)
    gap = np.min(np.abs(s_arr[:, None] - lam[None, :]) / scale[None, :], axis=1)
    if np.any(gap <= tol):
        raise SingularShift("shift coincides with an eigenvalue of the state matrix")
    if np.linalg.cond(V) < 1e8:
        cv = C @ V
        vib = np.linalg.solve(V, B.astype(complex))
        out = np.einsum("ij,kj,jl->kil", cv, 1.0 / (s_arr[:, None] - lam[None, :]), vib)
    else:
        eye = np.eye(n)
        out = np.empty((s_arr.size, C.shape[0], B.shape[1]), dtype=complex)
        for k, sk in enumerate(s_arr):
            out[k] = C @ np.linalg.solve(sk * eye - A, B)
    if out.shape[1:] == (1, 1):
        out = out[:, 0, 0]
    return out if np.ndim(s) else out[0]
