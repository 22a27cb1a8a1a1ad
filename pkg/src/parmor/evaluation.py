"""Error metrics: moment error curves, Bode magnitudes and relative H2 errors."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from . import linalg
from .errors import NotHurwitz
from .moment_basis import WeightMatrix
from .moment_series import MomentSeries, exact_moment
from .psys import ParametricLTI, transfer_many

H2_BAND = (1e-1, 1e4)
H2_POINTS = 1000

MOMENT_NORM = "relative l2: ||approx(p) - C Pi(p)||_2 / ||C Pi(p)||_2 over the 1 x nu row"
H2_DEFINITION = (
    "sqrt(int |W - W_rom|^2 dw / int |W|^2 dw), trapezoidal rule on a log-spaced grid, "
    "both signs of w"
)


@dataclass
class Curve:
    """A sampled metric ``values[i]`` at ``x[i]`` plus self-describing metadata."""

    x: np.ndarray
    values: np.ndarray
    xlabel: str
    ylabel: str
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w") as fh:
            for key, val in self.meta.items():
                fh.write(f"# {key}: {json.dumps(val)}\n")
            fh.write(f"{self.xlabel},{self.ylabel}\n")
            for a, b in zip(self.x, self.values):
                fh.write(f"{a:.17g},{b:.17g}\n")

    @classmethod
    def from_csv(cls, path):
        meta = {}
        with open(path) as fh:
            lines = fh.read().splitlines()
        while lines and lines[0].startswith("# "):
            key, _, val = lines.pop(0)[2:].partition(": ")
            meta[key] = json.loads(val)
        xl, yl = lines.pop(0).split(",")
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines]).reshape(-1, 2)
        return cls(data[:, 0], data[:, 1], xl, yl, meta)


def system_hash(system):
    blob = json.dumps(system.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _approx_fn(approx, system):
    if isinstance(approx, MomentSeries):

        def fn(p):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return system.C(p) @ approx.pi_hat(p)

        return fn
    if isinstance(approx, WeightMatrix):
        return approx
    if callable(approx):
        return approx
    raise TypeError("approx must be a MomentSeries, a WeightMatrix or a callable")


def moment_error_curve(system, gen, approx, p_grid):
    """Relative 2-norm error of an approximate moment against Sylvester solves on ``p_grid``."""
    fn = _approx_fn(approx, system)
    grid = np.asarray(list(p_grid), dtype=float)
    errs = np.empty(grid.size)
    for i, p in enumerate(grid):
        ref = exact_moment(system, gen, p)
        errs[i] = np.linalg.norm(np.asarray(fn(p)) - ref) / np.linalg.norm(ref)
    meta = {"metric": MOMENT_NORM, "system": system_hash(system), "nu": gen.nu}
    return Curve(grid, errs, "p", "rel_l2_error", meta)


def _response(obj, p, s):
    if isinstance(obj, ParametricLTI):
        return np.atleast_1d(transfer_many(obj, p, s))
    return np.atleast_1d(obj.transfer(p, s))


def bode_magnitude(obj, p, freq_grid):
    """``|W(i w, p)|`` for a full system or a reduced model.

    Raises
    ------
    SingularShift
        If some ``i w`` is an eigenvalue of the state matrix.
    """
    w = np.asarray(freq_grid, dtype=float)
    return Curve(w, np.abs(_response(obj, p, 1j * w)), "omega", "magnitude", {"p": float(p)})


def h2_grid(band=H2_BAND, points=H2_POINTS):
    return np.logspace(np.log10(band[0]), np.log10(band[1]), int(points))


def _state_matrix(obj, p):
    if isinstance(obj, ParametricLTI):
        return obj.A(p)
    return obj.eval(p)[0]


def h2_relative_error(system, model, p, freq_grid=None):
    """Relative H2 error by quadrature of ``|W - W_rom|^2`` over a frequency grid.

    The default grid has 1000 log-spaced points on ``[0.1, 1e4]`` rad/s.

    Raises
    ------
    NotHurwitz
        If either model is unstable at ``p``.
    """
    w = h2_grid() if freq_grid is None else np.asarray(freq_grid, dtype=float)
    for name, obj in (("full system", system), ("reduced model", model)):
        if not linalg.is_hurwitz(_state_matrix(obj, p)):
            raise NotHurwitz(f"{name} is not asymptotically stable at p = {p}")
    s = 1j * w
    W = _response(system, p, s)
    Wr = _response(model, p, s)
    num = 2.0 * trapezoid(np.abs(W - Wr) ** 2, w)
    den = 2.0 * trapezoid(np.abs(W) ** 2, w)
    return float(np.sqrt(num / den))


def h2_norm_gramian(A, B, C):
    """``sqrt(trace(C P C^T))`` with ``A P + P A^T + B B^T = 0``."""
    A = linalg.as_matrix(A, "A")
    B = linalg.as_matrix(B, "B")
    C = linalg.as_matrix(C, "C")
    P = linalg.solve_lyapunov(A.T, B @ B.T)
    return float(np.sqrt(max(np.trace(C @ P @ C.T), 0.0)))


def h2_relative_error_gramian(system, model, p):
    """Gramian-based relative H2 error (whole frequency axis), for small instances."""
    A, B, C = system.eval(p)
    F, G, H = model.eval(p)
    n, nu = A.shape[0], F.shape[0]
    Ae = np.zeros((n + nu, n + nu))
    Ae[:n, :n] = A
    Ae[n:, n:] = F
    Be = np.vstack([B, G])
    Ce = np.hstack([C, -H])
    return h2_norm_gramian(Ae, Be, Ce) / h2_norm_gramian(A, B, C)


def h2_error_curve(system, model, p_grid, freq_grid=None):
    grid = np.asarray(list(p_grid), dtype=float)
    vals = np.array([h2_relative_error(system, model, p, freq_grid) for p in grid])
    w = h2_grid() if freq_grid is None else np.asarray(freq_grid)
    meta = {
        "metric": H2_DEFINITION,
        "band": [float(w[0]), float(w[-1])],
        "points": int(w.size),
        "system": system_hash(system),
        "nu": model.nu,
    }
    return Curve(grid, vals, "p", "rel_h2_error", meta)
