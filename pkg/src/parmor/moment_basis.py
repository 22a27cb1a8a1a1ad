"""Basis-function approximation ``C Pi(p) ~ Phi_N(p) Gamma`` of the parametric moment.

Three estimators are provided: a model-based least-squares fit on Sylvester
solutions, its ridge-regularised variant, and a data-driven fit on
steady-state snapshot windows.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    ParameterOutOfRange,
    RankDeficient,
    WindowTooShort,
)
from .moment_series import exact_moment

_BASIS_KINDS = ("polynomial", "gaussian_rbf", "fourier")


@dataclass(frozen=True)
class BasisSet:
    """A finite family ``Phi_N(p) = [phi_1(p), ..., phi_N(p)]`` of scalar functions.

    Use :meth:`polynomial`, :meth:`gaussian_rbf` or :meth:`fourier`.
    """

    kind: str
    N: int
    centers: tuple = ()
    widths: tuple = ()
    base_period: float = 0.0

    def __post_init__(self):
        if self.kind not in _BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.N < 1:
            raise ValueError("basis needs N >= 1")

    @classmethod
    def polynomial(cls, N):
        """Monomials ``1, p, ..., p**(N-1)``."""
        return cls("polynomial", int(N))

    @classmethod
    def gaussian_rbf(cls, centers, widths=1.0):
        c = tuple(float(v) for v in np.atleast_1d(centers))
        w = np.broadcast_to(np.asarray(widths, dtype=float), (len(c),))
        if np.any(w <= 0):
            raise ValueError("RBF widths must be positive")
        return cls("gaussian_rbf", len(c), centers=c, widths=tuple(float(v) for v in w))

    @classmethod
    def fourier(cls, base_period, N):
        """``1, cos(2 pi p / T), sin(2 pi p / T), cos(4 pi p / T), ...`` truncated to ``N`` terms."""
        if base_period <= 0:
            raise ValueError("base_period must be positive")
        return cls("fourier", int(N), base_period=float(base_period))

    def __call__(self, p):
        """Row ``Phi_N(p)`` (or a matrix with one row per entry of an array ``p``)."""
        scalar = np.ndim(p) == 0
        P = np.atleast_1d(np.asarray(p, dtype=float))
        if self.kind == "polynomial":
            out = P[:, None] ** np.arange(self.N)[None, :]
        elif self.kind == "gaussian_rbf":
            c = np.asarray(self.centers)
            w = np.asarray(self.widths)
            out = np.exp(-((P[:, None] - c[None, :]) ** 2) / (2.0 * w[None, :] ** 2))
        else:
            out = np.empty((P.size, self.N))
            out[:, 0] = 1.0
            for j in range(1, self.N):
                harmonic = (j + 1) // 2
                arg = 2.0 * np.pi * harmonic * P / self.base_period
                out[:, j] = np.cos(arg) if j % 2 else np.sin(arg)
        return out[0] if scalar else out

    def to_dict(self):
        return {
            "kind": self.kind,
            "N": self.N,
            "centers": list(self.centers),
            "widths": list(self.widths),
            "base_period": self.base_period,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d["kind"],
            int(d["N"]),
            tuple(d.get("centers", ())),
            tuple(d.get("widths", ())),
            float(d.get("base_period", 0.0)),
        )

    @classmethod
    def parse(cls, spec):
        """Parse ``poly:N`` or ``fourier:N:T``."""
        parts = spec.split(":")
        try:
            if parts[0] in ("poly", "polynomial") and len(parts) == 2:
                return cls.polynomial(int(parts[1]))
            if parts[0] == "fourier" and len(parts) == 3:
                return cls.fourier(float(parts[2]), int(parts[1]))
        except ValueError:
            pass
        raise ValueError(f"cannot parse basis spec {spec!r}")


def interp_matrix(basis, params):
    """``Upsilon_K`` with entry ``(k, j) = phi_j(p_k)``."""
    P = np.asarray(params, dtype=float).ravel()
    if np.unique(P).size != P.size:
        raise ValueError("parameters must be pairwise distinct")
    return basis(P)


def _monomial_shift(N, centre, radius):
    """``T`` with ``[z**j] = [p**i] T`` for ``z = (p - centre) / radius``."""
    T = np.zeros((N, N))
    for j in range(N):
        for i in range(j + 1):
            T[i, j] = comb(j, i) * (-centre) ** (j - i) / radius**j
    return T


def _fit_rows(basis, params, R, ridge):
    """Least-squares weights for ``Upsilon(params) Gamma ~ R``.

    Polynomial bases without ridge are fitted in the variable scaled to
    ``[-1, 1]`` over the training range and mapped back to raw monomials.
    """
    P = np.asarray(params, dtype=float)
    if ridge is None and basis.kind == "polynomial" and basis.N > 1 and np.ptp(P) > 0:
        centre = 0.5 * (P.max() + P.min())
        radius = 0.5 * np.ptp(P)
        Z = interp_matrix(basis, (P - centre) / radius)
        return _monomial_shift(basis.N, centre, radius) @ linalg.least_squares(Z, R)
    return linalg.least_squares(interp_matrix(basis, P), R, ridge=ridge)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Fitted weights ``Gamma`` (N x nu) of ``C Pi(p) ~ Phi_N(p) Gamma``."""

    gamma: np.ndarray
    basis: BasisSet
    provenance: dict = field(default_factory=dict)
    ridge: object = None
    param_interval: tuple = None

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float, ndmin=2)
        if g.shape[0] != self.basis.N:
            raise DimensionMismatch(f"gamma has {g.shape[0]} rows, basis has {self.basis.N}")
        if not np.all(np.isfinite(g)):
            raise ValueError("weights must be finite")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def nu(self):
        return self.gamma.shape[1]

    def __call__(self, p):
        return eval_basis_moment(self, p)

    def to_dict(self):
        ridge = self.ridge
        if ridge is not None:
            ridge = np.asarray(ridge, dtype=float).tolist()
        return {
            "gamma": self.gamma.tolist(),
            "basis": self.basis.to_dict(),
            "provenance": self.provenance,
            "ridge": ridge,
            "param_interval": None if self.param_interval is None else list(self.param_interval),
        }

    @classmethod
    def from_dict(cls, d):
        pi = d.get("param_interval")
        return cls(
            np.array(d["gamma"], dtype=float),
            BasisSet.from_dict(d["basis"]),
            d.get("provenance", {}),
            d.get("ridge"),
            None if pi is None else tuple(pi),
        )


def eval_basis_moment(w, p, basis=None):
    """``Phi_N(p) Gamma`` as a 1 x nu row.

    Raises
    ------
    ParameterOutOfRange
        If ``p`` lies outside the interval recorded with the weights.
    """
    basis = w.basis if basis is None else basis
    if w.param_interval is not None:
        lo, hi = w.param_interval
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if not lo - tol <= p <= hi + tol:
            raise ParameterOutOfRange(f"p = {p} outside [{lo}, {hi}]")
    return (basis(float(p)) @ w.gamma).reshape(1, -1)


def moment_samples(system, gen, params):
    """``R_K``: exact moments ``C(p_k) Pi(p_k)`` stacked row-wise (K x nu)."""
    return np.vstack([exact_moment(system, gen, p) for p in params])


def fit_model_based(system, gen, basis, params):
    """Least-squares weights on exact moments at the training parameters.

    Raises
    ------
    RankDeficient
        If ``Upsilon_K`` has numerical rank below ``N`` (a ridge fit may help).
    SpectrumOverlap
        If the Sylvester equation is singular at some training parameter.
    """
    params = np.asarray(params, dtype=float).ravel()
    if params.size < basis.N:
        raise RankDeficient(f"K = {params.size} training parameters < N = {basis.N}")
    R = moment_samples(system, gen, params)
    gamma = _fit_rows(basis, params, R, None)
    return WeightMatrix(
        gamma, basis, {"kind": "model_based", "params": params.tolist()}, None, system.param_interval
    )


def fit_ridge(system, gen, basis, params, lam):
    """Ridge weights ``(U^T U + Lambda)^{-1} U^T R_K`` with diagonal ``Lambda > 0``."""
    params = np.asarray(params, dtype=float).ravel()
    lam_vec = linalg._ridge_vector(lam, basis.N)
    if np.any(lam_vec <= 0):
        raise ValueError("ridge weights must be strictly positive")
    R = moment_samples(system, gen, params)
    gamma = _fit_rows(basis, params, R, lam_vec)
    return WeightMatrix(
        gamma, basis, {"kind": "ridge", "params": params.tolist()}, lam_vec, system.param_interval
    )


@dataclass(eq=False)
class SnapshotDataset:
    """Steady-state window data for ``K`` parameter values.

    Attributes
    ----------
    params : (K,) ndarray
    times : (h,) ndarray
    omega : (h, nu) ndarray
        Generator samples ``U_i``.
    outputs : (K, h) ndarray
        Row ``k`` holds ``Y_i(p_k)``.
    """

    params: np.ndarray
    times: np.ndarray
    omega: np.ndarray
    outputs: np.ndarray
    noise_meta: dict = None

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float).ravel()
        self.times = np.asarray(self.times, dtype=float).ravel()
        self.omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        self.outputs = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        h = self.times.size
        if self.omega.shape[0] != h or self.outputs.shape != (self.params.size, h):
            raise DimensionMismatch("inconsistent snapshot dimensions")
        if np.unique(self.params).size != self.params.size:
            raise ValueError("parameters must be pairwise distinct")

    @property
    def h(self):
        return self.times.size

    @property
    def nu(self):
        return self.omega.shape[1]

    @property
    def K(self):
        return self.params.size

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        cols = ",".join(["t"] + [f"omega_{j}" for j in range(self.nu)])
        np.savetxt(
            os.path.join(directory, "omega.csv"),
            np.column_stack([self.times, self.omega]),
            delimiter=",",
            header=cols,
            comments="",
            fmt="%.17g",
        )
        for k in range(self.K):
            np.savetxt(
                os.path.join(directory, f"y_{k}.csv"),
                np.column_stack([self.times, self.outputs[k]]),
                delimiter=",",
                header="t,y",
                comments="",
                fmt="%.17g",
            )
        meta = {"params": self.params.tolist(), "times": self.times.tolist(), "noise_meta": self.noise_meta}
        with open(os.path.join(directory, "metadata.json"), "w") as fh:
            json.dump(meta, fh)

    @classmethod
    def load(cls, directory):
        with open(os.path.join(directory, "metadata.json")) as fh:
            meta = json.load(fh)
        om = np.loadtxt(os.path.join(directory, "omega.csv"), delimiter=",", skiprows=1, ndmin=2)
        ys = [
            np.loadtxt(os.path.join(directory, f"y_{k}.csv"), delimiter=",", skiprows=1, ndmin=2)[:, 1]
            for k in range(len(meta["params"]))
        ]
        return cls(meta["params"], meta["times"], om[:, 1:], np.vstack(ys), meta.get("noise_meta"))


def fit_data_driven(data, basis, ridge=None, param_interval=None):
    """Weights from snapshot windows.

    Solves ``min || (Upsilon_K kron U_i) vec(Gamma^T) - O ||`` through its two
    Kronecker factors: with ``Y = [Y_i(p_1) ... Y_i(p_K)]`` (h x K) the
    minimiser is ``Gamma = Upsilon^+ (U_i^+ Y)^T``, which never forms the
    ``hK x nu N`` matrix.

    Raises
    ------
    WindowTooShort
        If ``h < nu``.
    RankDeficient
        If ``U_i`` or ``Upsilon_K`` lacks full column rank.
    """
    if data.h < data.nu:
        raise WindowTooShort(f"window has h = {data.h} samples, needs at least nu = {data.nu}")
    if data.K < basis.N and ridge is None:
        raise RankDeficient(f"K = {data.K} training parameters < N = {basis.N}")
    Z = linalg.least_squares(data.omega, data.outputs.T)  # nu x K
    gamma = _fit_rows(basis, data.params, Z.T, ridge)
    prov = {
        "kind": "data_driven",
        "window": [float(data.times[0]), float(data.times[-1])],
        "h": data.h,
        "K": data.K,
        "params": data.params.tolist(),
    }
    if param_interval is None:
        param_interval = (float(data.params.min()), float(data.params.max()))
    ridge_vec = None if ridge is None else linalg._ridge_vector(ridge, basis.N)
    return WeightMatrix(gamma, basis, prov, ridge_vec, tuple(param_interval))


def save_weights(w, path):
    with open(path, "w") as fh:
        json.dump(w.to_dict(), fh)


def load_weights(path):
    with open(path) as fh:
        return WeightMatrix.from_dict(json.load(fh))
