"""Power-series approximation of the parametric moment and of the Lyapunov certificate.

Both series are expanded in ``(p - p0)``.  The coefficients are obtained from
nested Sylvester (resp. Lyapunov) equations sharing the coefficient matrix
``A_hat_0 = A(p0)``, so a single Schur factorisation serves every order.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import SeriesRangeWarning

DEFAULT_ORDER = 4


def taylor_tables(system, p0, order):
    """Power-series coefficient matrices of ``A``, ``B`` and ``C`` around ``p0``.

    Returns three lists of length ``order + 1`` with ``A(p) = sum_j (p - p0)**j A_hat[j]``
    up to the truncation, and likewise for ``B`` and ``C``.
    """

    def table(terms, shape):
        out = [np.zeros(shape) for _ in range(order + 1)]
        for fn, mat in terms:
            for j, c in enumerate(fn.taylor(p0, order)):
                if c != 0.0:
                    out[j] = out[j] + c * mat
        return out

    n = system.n
    return (
        table(system.A_terms, (n, n)),
        table(system.B_terms, (n, 1)),
        table(system.C_terms, (1, n)),
    )


def _horner(coeffs, d):
    acc = coeffs[-1].copy()
    for c in coeffs[-2::-1]:
        acc = acc * d + c
    return acc


@dataclass(eq=False)
class MomentSeries:
    """Truncated series ``Pi_hat(p) = sum_j (p - p0)**j Pi_j``."""

    expansion_point: float
    coeffs: list
    generator: object = None
    param_interval: tuple = None

    @property
    def nu(self):
        return np.shape(self.coeffs[0])[1]

    @property
    def order(self):
        return len(self.coeffs)

    def pi_hat(self, p):
        _warn_range(self.expansion_point, self.param_interval, p)
        return _horner(self.coeffs, p - self.expansion_point)

    def to_dict(self):
        return {
            "p0": self.expansion_point,
            "N": self.order,
            "coeffs": [c.tolist() for c in self.coeffs],
            "param_interval": None if self.param_interval is None else list(self.param_interval),
            "generator": None if self.generator is None else self.generator.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        from .siggen import SignalGenerator

        gen = d.get("generator")
        return cls(
            float(d["p0"]),
            [np.array(c, dtype=float) for c in d["coeffs"]],
            None if gen is None else SignalGenerator.from_dict(gen),
            None if d.get("param_interval") is None else tuple(d["param_interval"]),
        )


@dataclass(eq=False)
class LyapunovSeries:
    """Truncated series ``X_hat(p) = sum_j (p - p0)**j X_j``."""

    expansion_point: float
    coeffs: list
    Q: np.ndarray
    param_interval: tuple = None

    @property
    def order(self):
        return len(self.coeffs)

    def x_hat(self, p):
        _warn_range(self.expansion_point, self.param_interval, p)
        x = _horner(self.coeffs, p - self.expansion_point)
        return 0.5 * (x + x.T)

    def to_dict(self):
        return {
            "p0": self.expansion_point,
            "N": self.order,
            "coeffs": [c.tolist() for c in self.coeffs],
            "Q": self.Q.tolist(),
            "param_interval": None if self.param_interval is None else list(self.param_interval),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d["p0"]),
            [np.array(c, dtype=float) for c in d["coeffs"]],
            np.array(d["Q"], dtype=float),
            None if d.get("param_interval") is None else tuple(d["param_interval"]),
        )


def _warn_range(p0, interval, p):
    if interval is None:
        return
    half_radius = 0.25 * (interval[1] - interval[0])
    if abs(p - p0) > half_radius:
        warnings.warn(
            f"series centred at {p0} evaluated at p = {p}, beyond half the interval radius",
            SeriesRangeWarning,
            stacklevel=3,
        )


def nested_sylvester(system, gen, p0, N=DEFAULT_ORDER):
    """Coefficients ``Pi_0 .. Pi_{N-1}`` of the series solution of ``A(p) Pi + B(p) L = Pi S``.

    ``Pi_j`` solves ``A_hat_0 Pi_j + sum_{k=1..j} A_hat_k Pi_{j-k} + B_hat_j L = Pi_j S``.

    Raises
    ------
    SpectrumOverlap
        If ``A(p0)`` shares (numerically) an eigenvalue with ``S``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    system.check_param(p0)
    A_hat, B_hat, _ = taylor_tables(system, p0, N - 1)
    L = gen.L
    solver = linalg.SylvesterSolver(A_hat[0], gen.S)
    coeffs = []
    for j in range(N):
        F = B_hat[j] @ L
        for k in range(1, j + 1):
            F = F + A_hat[k] @ coeffs[j - k]
        coeffs.append(solver.solve(F))
    return MomentSeries(float(p0), coeffs, gen, system.param_interval)


def exact_moment(system, gen, p):
    """``C(p) Pi(p)`` from a direct Sylvester solve at ``p`` (1 x nu)."""
    system.check_param(p)
    A, B, C = system.eval(p)
    return C @ linalg.solve_sylvester(A, gen.S, B @ gen.L)


def eval_moment_series(ms, system, p):
    """``C(p) Pi_hat_N(p)`` as a 1 x nu row."""
    system.check_param(p)
    return system.C(p) @ ms.pi_hat(p)


def nested_lyapunov(system, p0, N=DEFAULT_ORDER, Q=None):
    """Coefficients ``X_0 .. X_{N-1}`` of the series solution of ``A(p).T X + X A(p) = -Q``.

    ``Q`` defaults to the identity.

    Raises
    ------
    NotHurwitz
        If ``A(p0)`` is not Hurwitz.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    system.check_param(p0)
    n = system.n
    Q = np.eye(n) if Q is None else linalg.as_matrix(Q, "Q", shape=(n, n))
    if linalg.min_eig_sym(Q) <= 0:
        raise ValueError("Q must be positive definite")
    A_hat, _, _ = taylor_tables(system, p0, N - 1)
    solver = linalg.LyapunovSolver(A_hat[0])
    coeffs = [solver.solve(Q)]
    for j in range(1, N):
        rhs = np.zeros((n, n))
        for k in range(1, j + 1):
            rhs = rhs + A_hat[k].T @ coeffs[j - k] + coeffs[j - k] @ A_hat[k]
        coeffs.append(solver.solve(rhs))
    return LyapunovSeries(float(p0), coeffs, Q, system.param_interval)


def save_series(series, path):
    with open(path, "w") as fh:
        json.dump(series.to_dict(), fh)


def load_series(path):
    with open(path) as fh:
        d = json.load(fh)
    return LyapunovSeries.from_dict(d) if "Q" in d else MomentSeries.from_dict(d)
