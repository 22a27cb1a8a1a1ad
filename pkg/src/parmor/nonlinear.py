"""Data-driven moment matching for nonlinear parametric systems.

The steady-state output map ``kappa(omega, p)`` is regressed on Gaussian RBFs
over the joint ``(omega, p)`` space and used as the output map of the reduced
model ``xi' = (S - delta L) xi + delta u``, ``psi = kappa~(xi, p)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DimensionMismatch, NotHurwitz, ParameterOutOfRange, RankDeficient, WindowTooShort
from .psys import CoefficientFunction
from .siggen import SignalGenerator


# -- plant -------------------------------------------------------------------


def _monomial(X, powers):
    out = np.ones(X.shape[0])
    for j, k in powers:
        out = out * X[:, j] ** k
    return out


@dataclass(frozen=True, eq=False)
class NonlinearParametricSystem:
    """``x' = f(x, u, p)``, ``y = h(x, p)`` from a small closed term language.

    Parameters
    ----------
    A_terms : list of (CoefficientFunction, (n, n) array)
        Linear drift ``A(p) = sum f_i(p) A_i``.
    b : (n,) array
        Input vector (``u`` enters linearly).
    c : (n,) array
        Linear part of the output.
    poly_terms : list of (row, CoefficientFunction, ((state, power), ...))
        Monomials of total degree 2 or 3 added to ``f[row]``.
    sat_terms : list of (row, CoefficientFunction, state, level)
        ``coef(p) * level * tanh(x[state] / level)`` added to ``f[row]``.
    out_poly : list of (float, ((state, power), ...))
        Monomials of degree 2 or 3 added to the output.
    """

    n: int
    A_terms: tuple
    b: np.ndarray
    c: np.ndarray
    poly_terms: tuple = ()
    sat_terms: tuple = ()
    out_poly: tuple = ()
    param_interval: tuple = (0.0, 1.0)

    def __post_init__(self):
        for _, pw in [(r, p) for r, _, p in self.poly_terms] + list(self.out_poly):
            deg = sum(k for _, k in pw)
            if deg not in (2, 3):
                raise ValueError("polynomial terms must have total degree 2 or 3")
        for _, M in self.A_terms:
            if np.shape(M) != (self.n, self.n):
                raise DimensionMismatch("A term has wrong shape")
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).ravel())
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).ravel())

    def check_param(self, p):
        lo, hi = self.param_interval
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if not lo - tol <= p <= hi + tol:
            raise ParameterOutOfRange(f"p = {p} outside [{lo}, {hi}]")

    def A(self, p):
        return sum(fn(p) * np.asarray(M, dtype=float) for fn, M in self.A_terms)

    def f(self, x, u, p):
        x = np.asarray(x, dtype=float)
        dx = self.A(p) @ x + self.b * u
        X = x[None, :]
        for row, fn, pw in self.poly_terms:
            dx[row] += fn(p) * _monomial(X, pw)[0]
        for row, fn, j, level in self.sat_terms:
            dx[row] += fn(p) * level * np.tanh(x[j] / level)
        return dx

    def vector_field(self, p):
        """``(x, u) -> f(x, u, p)`` with the parameter-dependent pieces evaluated once."""
        A = self.A(p)
        b = self.b
        poly = [(row, fn(p), pw) for row, fn, pw in self.poly_terms]
        sat = [(row, fn(p), j, level) for row, fn, j, level in self.sat_terms]

        def f(x, u):
            dx = A @ x + b * u
            for row, c, pw in poly:
                term = c
                for j, k in pw:
                    term = term * x[j] ** k
                dx[row] += term
            for row, c, j, level in sat:
                dx[row] += c * level * np.tanh(x[j] / level)
            return dx

        return f

    def h(self, X, p):
        """Output for each row of ``X`` (or a single state vector)."""
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        y = X @ self.c
        for coef, pw in self.out_poly:
            y = y + coef * _monomial(X, pw)
        return y[0] if single else y

    def jacobian0(self, p):
        """``df/dx`` at the origin with zero input."""
        J = self.A(p).copy()
        for row, fn, j, _ in self.sat_terms:
            J[row, j] += fn(p)
        return J

    def validate(self, grid):
        """Check ``f(0, 0, p) = 0``, ``h(0, p) = 0`` and a Hurwitz Jacobian on ``grid``."""
        z = np.zeros(self.n)
        for p in grid:
            if np.any(self.f(z, 0.0, p) != 0) or self.h(z, p) != 0:
                raise ValueError(f"origin is not an equilibrium at p = {p}")
            if not linalg.is_hurwitz(self.jacobian0(p)):
                raise NotHurwitz(f"linearisation at the origin is not Hurwitz at p = {p}")
        return True


def make_nl_benchmark(p_interval=(0.5, 2.0)):
    """Three cascaded damped Duffing oscillators with output ``x5 + 0.1 x5**3``.

    ``x1' = x2``, ``x2' = -(1 + p) x1 - 0.5 x2 - 0.3 x1**3 + u``, and each
    following oscillator is driven by the position of the previous one.
    """
    n = 6
    A0 = np.zeros((n, n))
    A1 = np.zeros((n, n))
    cubic = CoefficientFunction.constant(-0.3)
    poly = []
    for i in range(3):
        q, v = 2 * i, 2 * i + 1
        A0[q, v] = 1.0
        A0[v, q] = -1.0
        A1[v, q] = -1.0
        A0[v, v] = -0.5
        if i > 0:
            A0[v, q - 2] = 1.0
        poly.append((v, cubic, ((q, 3),)))
    b = np.zeros(n)
    b[1] = 1.0
    c = np.zeros(n)
    c[4] = 1.0
    sys = NonlinearParametricSystem(
        n,
        ((CoefficientFunction.constant(1.0), A0), (CoefficientFunction.identity(), A1)),
        b,
        c,
        poly_terms=tuple(poly),
        out_poly=((0.1, ((4, 3),)),),
        param_interval=tuple(p_interval),
    )
    return sys


# -- RBF basis ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NonlinearBasisSet:
    """Gaussian RBFs over standardised ``z = [omega, p]``.

    ``centers`` are stored in raw coordinates; kernels are evaluated as
    ``exp(-||(z - c) / scale||^2 / (2 width^2))`` where ``scale`` is the
    per-coordinate standard deviation of the training samples.
    """

    centers: np.ndarray
    widths: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    box: np.ndarray
    seed: int = None

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        w = np.broadcast_to(np.asarray(self.widths, dtype=float), (c.shape[0],)).copy()
        if np.any(w <= 0):
            raise ValueError("widths must be positive")
        for name, val in (("centers", c), ("widths", w)):
            object.__setattr__(self, name, val)
        for name in ("mean", "scale", "box"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def N(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    def __call__(self, omega, p):
        """``H_N`` rows for ``omega`` of shape (m, nu) (or (nu,)) and scalar or (m,) ``p``."""
        om = np.atleast_2d(np.asarray(omega, dtype=float))
        P = np.broadcast_to(np.asarray(p, dtype=float), (om.shape[0],))
        Z = (np.column_stack([om, P]) - self.mean) / self.scale
        Cs = (self.centers - self.mean) / self.scale
        d2 = np.sum(Z**2, 1)[:, None] + np.sum(Cs**2, 1)[None, :] - 2.0 * Z @ Cs.T
        out = np.exp(-np.maximum(d2, 0.0) / (2.0 * self.widths[None, :] ** 2))
        return out[0] if np.ndim(omega) == 1 else out

    def outside_box(self, omega, p):
        z = np.append(np.asarray(omega, dtype=float).ravel(), float(p))
        return bool(np.any(z < self.box[:, 0]) or np.any(z > self.box[:, 1]))

    def to_dict(self):
        return {
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "standardization": {"mean": self.mean.tolist(), "scale": self.scale.tolist()},
            "box": self.box.tolist(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        st = d["standardization"]
        return cls(d["centers"], d["widths"], st["mean"], st["scale"], d["box"], d.get("seed"))


def _joint_samples(data):
    om = np.tile(data.omega, (data.K, 1))
    P = np.repeat(data.params, data.h)
    return np.column_stack([om, P])


def make_rbf_basis(data, N=40, width=1.0, seed=0):
    """Sample ``N`` centres uniformly from the per-coordinate box ``[2 min - max, 2 max - min]``.

    The box and the standardisation are computed from the ``(omega, p)``
    training pairs in ``data``.  Coordinates with zero spread get unit scale.
    """
    Z = _joint_samples(data)
    lo, hi = Z.min(0), Z.max(0)
    box = np.column_stack([2 * lo - hi, 2 * hi - lo])
    rng = np.random.default_rng(seed)
    centers = rng.uniform(box[:, 0], box[:, 1], size=(N, Z.shape[1]))
    mean = Z.mean(0)
    scale = Z.std(0)
    scale[scale <= 1e-12 * max(1.0, np.abs(mean).max())] = 1.0
    return NonlinearBasisSet(centers, width, mean, scale, box, seed)


@dataclass(frozen=True, eq=False)
class NonlinearWeightVector:
    theta: np.ndarray
    basis: NonlinearBasisSet
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float).ravel()
        if t.size != self.basis.N:
            raise DimensionMismatch(f"theta has {t.size} entries, basis has {self.basis.N}")
        if not np.all(np.isfinite(t)):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", t)

    def __call__(self, omega, p):
        return eval_nonlinear_moment(self, omega, p)

    def to_dict(self):
        return {"theta": self.theta.tolist(), "basis": self.basis.to_dict(), "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d):
        return cls(d["theta"], NonlinearBasisSet.from_dict(d["basis"]), d.get("provenance", {}))


def fit_nonlinear_moment(data, basis, ridge=None):
    """Least-squares ``theta`` with ``H_N(omega(t), p_k) theta ~ y(t, p_k)`` over the window.

    Raises
    ------
    WindowTooShort
        If ``h < nu``.
    RankDeficient
        If ``hK < N`` or the regressor lacks full column rank (without ridge).
    """
    if data.h < data.nu:
        raise WindowTooShort(f"h = {data.h} < nu = {data.nu}")
    if basis.dim != data.nu + 1:
        raise DimensionMismatch(f"basis lives in {basis.dim} dimensions, data in {data.nu + 1}")
    if data.h * data.K < basis.N and ridge is None:
        raise RankDeficient(f"hK = {data.h * data.K} samples < N = {basis.N}")
    Z = _joint_samples(data)
    R = basis(Z[:, :-1], Z[:, -1])
    M = data.outputs.reshape(-1)
    theta = linalg.least_squares(R, M, ridge=ridge)
    prov = {
        "window": [float(data.times[0]), float(data.times[-1])],
        "h": data.h,
        "K": data.K,
        "params": data.params.tolist(),
    }
    return NonlinearWeightVector(theta, basis, prov)


def eval_nonlinear_moment(theta, omega, p, basis=None):
    """``H_N(omega, p) theta``; scalar for a single ``omega`` vector."""
    basis = theta.basis if basis is None else basis
    return basis(omega, p) @ theta.theta


# -- reduced model -----------------------------------------------------------


@dataclass(eq=False)
class NonlinearROM:
    """``xi' = (S - delta L) xi + delta u``, ``psi = kappa~(xi, p)``.

    Exposes the plant protocol of :func:`parmor.sim.simulate_interconnection`.
    """

    gen: SignalGenerator
    delta: np.ndarray
    weights: NonlinearWeightVector
    param_interval: tuple = None

    @property
    def n(self):
        return self.gen.nu

    @property
    def F(self):
        return self.gen.S - self.delta[:, None] @ self.gen.L

    def check_param(self, p):
        if self.param_interval is None:
            return
        lo, hi = self.param_interval
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if not lo - tol <= p <= hi + tol:
            raise ParameterOutOfRange(f"p = {p} outside [{lo}, {hi}]")

    def f(self, xi, u, p):
        return self.F @ xi + self.delta * u

    def vector_field(self, p):
        F, d = self.F, self.delta
        return lambda xi, u: F @ xi + d * u

    def h(self, Xi, p):
        return eval_nonlinear_moment(self.weights, Xi, p)

    def to_dict(self):
        return {
            "generator": self.gen.to_dict(),
            "delta": self.delta.tolist(),
            "weights": self.weights.to_dict(),
            "param_interval": None if self.param_interval is None else list(self.param_interval),
        }

    @classmethod
    def from_dict(cls, d):
        pi = d.get("param_interval")
        return assemble_nonlinear_rom(
            SignalGenerator.from_dict(d["generator"]),
            d["delta"],
            NonlinearWeightVector.from_dict(d["weights"]),
            None if pi is None else tuple(pi),
        )


def assemble_nonlinear_rom(gen, delta, theta, param_interval=None, margin=0.0):
    """Build a :class:`NonlinearROM`; ``delta`` is a scalar (broadcast) or a length-``nu`` vector.

    Raises
    ------
    NotHurwitz
        If ``S - delta L`` is not Hurwitz (with ``margin``).
    """
    d = np.broadcast_to(np.asarray(delta, dtype=float), (gen.nu,)).copy()
    if theta.basis.dim != gen.nu + 1:
        raise DimensionMismatch("RBF basis dimension does not match the generator")
    F = gen.S - d[:, None] @ gen.L
    if not linalg.is_hurwitz(F, margin):
        raise NotHurwitz("S - delta L is not Hurwitz")
    if param_interval is None and theta.provenance.get("params"):
        ps = theta.provenance["params"]
        param_interval = (min(ps), max(ps))
    return NonlinearROM(gen, d, theta, param_interval)


def save_nl_model(model, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_nl_model(path):
    with open(path) as fh:
        return NonlinearROM.from_dict(json.load(fh))
