"""Affine-parametric LTI systems.

A system is stored as

    A(p) = sum_i f_i^a(p) A_i,   B(p) = sum_i f_i^b(p) B_i,   C(p) = sum_i f_i^c(p) C_i

where the first term of each list is conventionally the constant part and
the coefficient functions come from a closed, serialisable family.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import linalg
from .errors import DimensionMismatch, NonAnalyticCoefficient, ParameterOutOfRange, SingularShift

_KINDS = ("polynomial", "sinusoid", "exponential", "tabulated")


@dataclass(frozen=True)
class CoefficientFunction:
    """Scalar coefficient function of the parameter.

    Use the constructors :meth:`polynomial`, :meth:`sinusoid`,
    :meth:`exponential` and :meth:`tabulated`.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")

    @classmethod
    def polynomial(cls, coeffs):
        """``sum_k coeffs[k] p**k``."""
        c = tuple(float(v) for v in np.atleast_1d(coeffs))
        if not c:
            raise ValueError("polynomial needs at least one coefficient")
        return cls("polynomial", c)

    @classmethod
    def constant(cls, value=1.0):
        return cls.polynomial([value])

    @classmethod
    def identity(cls):
        return cls.polynomial([0.0, 1.0])

    @classmethod
    def sinusoid(cls, amplitude, frequency, phase=0.0):
        """``amplitude * sin(frequency * p + phase)``."""
        return cls("sinusoid", (float(amplitude), float(frequency), float(phase)))

    @classmethod
    def exponential(cls, rate, scale=1.0):
        """``scale * exp(rate * p)``."""
        return cls("exponential", (float(rate), float(scale)))

    @classmethod
    def tabulated(cls, grid, values):
        """Piecewise-linear interpolation of ``values`` on increasing ``grid``."""
        g = np.asarray(grid, dtype=float)
        v = np.asarray(values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise ValueError("tabulated grid and values must be 1-D of equal length >= 2")
        if np.any(np.diff(g) <= 0):
            raise ValueError("tabulated grid must be strictly increasing")
        return cls("tabulated", (tuple(g), tuple(v)))

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if self.kind == "polynomial":
            out = np.polynomial.polynomial.polyval(p, self.params)
        elif self.kind == "sinusoid":
            a, w, phi = self.params
            out = a * np.sin(w * p + phi)
        elif self.kind == "exponential":
            rate, scale = self.params
            out = scale * np.exp(rate * p)
        else:
            g, v = self.params
            if np.any(p < g[0]) or np.any(p > g[-1]):
                raise ParameterOutOfRange(f"p outside tabulated range [{g[0]}, {g[-1]}]")
            out = np.interp(p, g, v)
        return float(out) if out.ndim == 0 else out

    def taylor(self, p0, order):
        """Taylor coefficients ``[c_0, ..., c_order]`` of the expansion in ``(p - p0)``.

        Raises
        ------
        NonAnalyticCoefficient
            For tabulated functions.
        """
        p0 = float(p0)
        if self.kind == "polynomial":
            poly = np.polynomial.Polynomial(self.params)
            out = []
            for j in range(order + 1):
                out.append(poly(p0) / math.factorial(j))
                poly = poly.deriv()
            return np.array(out)
        if self.kind == "sinusoid":
            a, w, phi = self.params
            j = np.arange(order + 1)
            return np.array(
                [a * w**k * math.sin(w * p0 + phi + k * math.pi / 2) / math.factorial(k) for k in j]
            )
        if self.kind == "exponential":
            rate, scale = self.params
            base = scale * math.exp(rate * p0)
            return np.array([base * rate**k / math.factorial(k) for k in range(order + 1)])
        raise NonAnalyticCoefficient("tabulated coefficient functions have no Taylor expansion")

    def to_dict(self):
        if self.kind == "tabulated":
            return {"kind": self.kind, "grid": list(self.params[0]), "values": list(self.params[1])}
        names = {
            "polynomial": None,
            "sinusoid": ("amplitude", "frequency", "phase"),
            "exponential": ("rate", "scale"),
        }[self.kind]
        if names is None:
            return {"kind": "polynomial", "coeffs": list(self.params)}
        return {"kind": self.kind, **dict(zip(names, self.params))}

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == "polynomial":
            return cls.polynomial(d["coeffs"])
        if kind == "sinusoid":
            return cls.sinusoid(d["amplitude"], d["frequency"], d.get("phase", 0.0))
        if kind == "exponential":
            return cls.exponential(d["rate"], d.get("scale", 1.0))
        if kind == "tabulated":
            return cls.tabulated(d["grid"], d["values"])
        raise ValueError(f"unknown coefficient kind {kind!r}")


def _as_terms(terms, shape, name):
    out = []
    for fn, mat in terms:
        if not isinstance(fn, CoefficientFunction):
            fn = CoefficientFunction.constant(float(fn))
        m = linalg.as_matrix(mat, name).copy()
        if m.shape != shape:
            if m.size == shape[0] * shape[1]:
                m = m.reshape(shape)
            else:
                raise DimensionMismatch(f"{name} term has shape {m.shape}, expected {shape}")
        m.setflags(write=False)
        out.append((fn, m))
    if not out:
        raise ValueError(f"{name} needs at least one term")
    return tuple(out)


@dataclass(frozen=True, eq=False)
class ParametricLTI:
    """SISO parametric system ``x' = A(p) x + B(p) u``, ``y = C(p) x``.

    Parameters
    ----------
    A_terms, B_terms, C_terms : sequence of (CoefficientFunction, matrix)
        Matrices are n x n, n x 1 and 1 x n respectively.
    param_interval : (float, float)
        Closed parameter interval ``[p_min, p_max]``.
    """

    A_terms: tuple
    B_terms: tuple
    C_terms: tuple
    param_interval: tuple
    n: int = field(init=False)

    def __post_init__(self):
        first = linalg.as_matrix(self.A_terms[0][1], "A")
        n = first.shape[0]
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "A_terms", _as_terms(self.A_terms, (n, n), "A"))
        object.__setattr__(self, "B_terms", _as_terms(self.B_terms, (n, 1), "B"))
        object.__setattr__(self, "C_terms", _as_terms(self.C_terms, (1, n), "C"))
        lo, hi = (float(v) for v in self.param_interval)
        if not lo < hi:
            raise ValueError(f"empty parameter interval [{lo}, {hi}]")
        object.__setattr__(self, "param_interval", (lo, hi))

    @classmethod
    def affine(cls, A0, B0, C0, A_terms=(), B_terms=(), C_terms=(), param_interval=(0.0, 1.0)):
        """Build from constant parts plus lists of ``(fn, matrix)`` terms."""
        one = CoefficientFunction.constant(1.0)
        return cls(
            ((one, A0),) + tuple(A_terms),
            ((one, B0),) + tuple(B_terms),
            ((one, C0),) + tuple(C_terms),
            param_interval,
        )

    def check_param(self, p, slack=1e-12):
        lo, hi = self.param_interval
        tol = slack * max(1.0, abs(lo), abs(hi))
        if not (lo - tol <= p <= hi + tol):
            raise ParameterOutOfRange(f"p = {p} outside [{lo}, {hi}]")

    def A(self, p):
        return sum(fn(p) * m for fn, m in self.A_terms)

    def B(self, p):
        return sum(fn(p) * m for fn, m in self.B_terms)

    def C(self, p):
        return sum(fn(p) * m for fn, m in self.C_terms)

    def eval(self, p):
        """Return ``(A(p), B(p), C(p))``."""
        self.check_param(p)
        return self.A(p), self.B(p), self.C(p)

    def to_dict(self):
        def terms(ts):
            return [{"fn": fn.to_dict(), "matrix": m.tolist()} for fn, m in ts]

        return {
            "n": self.n,
            "A_terms": terms(self.A_terms),
            "B_terms": terms(self.B_terms),
            "C_terms": terms(self.C_terms),
            "param_interval": list(self.param_interval),
        }

    @classmethod
    def from_dict(cls, d):
        def terms(ts):
            return tuple((CoefficientFunction.from_dict(t["fn"]), np.array(t["matrix"], dtype=float)) for t in ts)

        sys_ = cls(terms(d["A_terms"]), terms(d["B_terms"]), terms(d["C_terms"]), tuple(d["param_interval"]))
        if "n" in d and d["n"] != sys_.n:
            raise DimensionMismatch(f"declared n = {d['n']} but matrices have n = {sys_.n}")
        return sys_


def eval_system(system, p):
    return system.eval(p)


def transfer(system, p, s):
    """Transfer function ``W(s, p) = C(p) (s I - A(p))^{-1} B(p)``.

    Raises
    ------
    SingularShift
        If ``s`` is an eigenvalue of ``A(p)``.
    """
    A, B, C = system.eval(p)
    M = complex(s) * np.eye(system.n) - A
    try:
        lu, piv = _lu(M)
    except np.linalg.LinAlgError as exc:
        raise SingularShift(str(exc)) from exc
    x = sla.lu_solve((lu, piv), B.astype(complex))
    return complex((C @ x)[0, 0])


def _lu(M):
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            lu, piv = sla.lu_factor(M)
        except sla.LinAlgWarning as exc:
            raise np.linalg.LinAlgError("singular shifted matrix") from exc
    d = np.abs(np.diag(lu))
    if d.min() <= np.finfo(float).eps * max(d.max(), 1.0) * M.shape[0]:
        raise np.linalg.LinAlgError("singular shifted matrix")
    return lu, piv


def transfer_many(system, p, s_values):
    """Vectorised :func:`transfer` over an array of shifts."""
    A, B, C = system.eval(p)
    return linalg.transfer_values(A, B, C, s_values)


def make_benchmark(k=500, a_range=(-1e3, -10.0), b_range=(10.0, 1e3), param_interval=(0.1, 1.0)):
    """Block-diagonal synthetic benchmark ``x' = (A0 + p A1) x + B u``, ``y = C x``.

    Block ``i`` of ``A0`` is ``[[0, b_i], [-b_i, 0]]`` and of ``A1`` is
    ``a_i I_2``; ``B`` stacks ``(2, 0)`` and ``C`` stacks ``(1, 0)``.  The
    ``a_i`` and ``b_i`` are equidistant on their ranges (both endpoints
    included; a single block takes the range start).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    a = np.linspace(a_range[0], a_range[1], k)
    b = np.linspace(b_range[0], b_range[1], k)
    n = 2 * k
    A0 = np.zeros((n, n))
    A1 = np.zeros((n, n))
    B = np.zeros((n, 1))
    C = np.zeros((1, n))
    for i in range(k):
        j = 2 * i
        A0[j, j + 1] = b[i]
        A0[j + 1, j] = -b[i]
        A1[j, j] = A1[j + 1, j + 1] = a[i]
        B[j, 0] = 2.0
        C[0, j] = 1.0
    return ParametricLTI.affine(
        A0, B, C, A_terms=[(CoefficientFunction.identity(), A1)], param_interval=param_interval
    )


def benchmark_coefficients(k, a_range=(-1e3, -10.0), b_range=(10.0, 1e3)):
    """The ``(a_i, b_i)`` used by :func:`make_benchmark`."""
    return np.linspace(a_range[0], a_range[1], k), np.linspace(b_range[0], b_range[1], k)


@dataclass
class StabilityReport:
    grid: np.ndarray
    max_real: np.ndarray
    margin: float
    passed: bool
    failures: list

    def __bool__(self):
        return self.passed


def check_stability_grid(system, grid, margin=0.0):
    """Maximum real eigenvalue part of ``A(p)`` at each grid point.

    Passes iff every value is below ``-margin``.  An empty grid passes
    vacuously with a warning.
    """
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0:
        warnings.warn("empty stability grid: vacuous pass", stacklevel=2)
        return StabilityReport(grid, np.empty(0), margin, True, [])
    for p in grid:
        system.check_param(p)
    mx = np.array([np.max(linalg.spectrum(system.A(p)).real) for p in grid])
    failures = [float(p) for p, v in zip(grid, mx) if not v < -margin]
    return StabilityReport(grid, mx, margin, not failures, failures)


@dataclass(frozen=True)
class DissipativitySpec:
    """Quadratic supply rate ``y Q(p) y + 2 u S(p) y + u R(p) u``."""

    Q_fn: CoefficientFunction
    S_fn: CoefficientFunction
    R_fn: CoefficientFunction

    @classmethod
    def passivity(cls):
        c = CoefficientFunction.constant
        return cls(c(0.0), c(0.5), c(0.0))

    @classmethod
    def l2_gain(cls, gamma):
        c = CoefficientFunction.constant
        return cls(c(-1.0), c(0.0), c(float(gamma) ** 2))

    def __call__(self, p):
        return self.Q_fn(p), self.S_fn(p), self.R_fn(p)


def save_system(system, path):
    with open(path, "w") as fh:
        json.dump(system.to_dict(), fh)


def load_system(path):
    with open(path) as fh:
        return ParametricLTI.from_dict(json.load(fh))
