"""Parametric reduced-order models ``xi' = (S - G(p) L) xi + G(p) u``, ``psi = H(p) xi``.

``H(p)`` approximates the parametric moment ``C(p) Pi(p)``; ``G(p)`` is either
a constant vector or the certificate-preserving gain
``(Pi^T X Pi + eps I)^{-1} Pi^T X B``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import linalg
from .errors import DimensionMismatch, SingularGram, SpectrumOverlap
from .moment_basis import WeightMatrix
from .moment_series import LyapunovSeries, MomentSeries, exact_moment
from .psys import DissipativitySpec, ParametricLTI, transfer_many
from .siggen import SignalGenerator

DEFAULT_EPS = 1e-14
TOL_PSD = 1e-8


# -- moment maps -------------------------------------------------------------


class ExactMoment:
    """``H(p) = C(p) Pi(p)`` from a Sylvester solve at each call."""

    kind = "exact"

    def __init__(self, system, gen):
        self.system, self.gen = system, gen
        self.nu = gen.nu

    def __call__(self, p):
        return exact_moment(self.system, self.gen, p)

    def pi(self, p):
        A, B, _ = self.system.eval(p)
        return linalg.solve_sylvester(A, self.gen.S, B @ self.gen.L)

    def to_dict(self):
        return {"kind": self.kind, "system": self.system.to_dict(), "generator": self.gen.to_dict()}


class SeriesMoment:
    """``H(p) = C(p) Pi_hat_N(p)``."""

    kind = "series"

    def __init__(self, series, system):
        self.series, self.system = series, system
        self.nu = series.coeffs[0].shape[1]

    def __call__(self, p):
        self.system.check_param(p)
        return self.system.C(p) @ self.pi(p)

    def pi(self, p):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", category=Warning)
            return self.series.pi_hat(p)

    def to_dict(self):
        return {"kind": self.kind, "series": self.series.to_dict(), "system": self.system.to_dict()}


class BasisMoment:
    """``H(p) = Phi_N(p) Gamma``."""

    kind = "basis"

    def __init__(self, weights):
        self.weights = weights
        self.nu = weights.nu

    def __call__(self, p):
        return self.weights(p)

    def to_dict(self):
        return {"kind": self.kind, "weights": self.weights.to_dict()}


def moment_map_from_dict(d):
    kind = d["kind"]
    if kind == "exact":
        return ExactMoment(ParametricLTI.from_dict(d["system"]), SignalGenerator.from_dict(d["generator"]))
    if kind == "series":
        return SeriesMoment(MomentSeries.from_dict(d["series"]), ParametricLTI.from_dict(d["system"]))
    if kind == "basis":
        return BasisMoment(WeightMatrix.from_dict(d["weights"]))
    raise ValueError(f"unknown moment map kind {kind!r}")


# -- certificate sources -----------------------------------------------------


class SeriesCertificate:
    """``X(p)`` from a truncated nested-Lyapunov series."""

    kind = "series"

    def __init__(self, series):
        self.series = series

    def __call__(self, p):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", category=Warning)
            return self.series.x_hat(p)

    def to_dict(self):
        return {"kind": self.kind, "series": self.series.to_dict()}


class LyapunovCertificate:
    """``X(p)`` solving ``A(p)^T X + X A(p) = -Q`` at each call."""

    kind = "lyapunov"

    def __init__(self, system, Q=None):
        self.system = system
        self.Q = np.eye(system.n) if Q is None else np.asarray(Q, dtype=float)

    def __call__(self, p):
        return linalg.solve_lyapunov(self.system.A(p), self.Q)

    def to_dict(self):
        return {"kind": self.kind, "system": self.system.to_dict(), "Q": self.Q.tolist()}


def certificate_from_dict(d):
    if d["kind"] == "series":
        return SeriesCertificate(LyapunovSeries.from_dict(d["series"]))
    if d["kind"] == "lyapunov":
        return LyapunovCertificate(ParametricLTI.from_dict(d["system"]), d["Q"])
    raise ValueError(f"unknown certificate kind {d['kind']!r}")


# -- gains -------------------------------------------------------------------


def preserving_gain(Pi_p, X_p, B_p, epsilon=DEFAULT_EPS):
    """``G = (Pi^T X Pi + epsilon I)^{-1} Pi^T X B``.

    Warns when ``Pi`` is numerically rank deficient.

    Raises
    ------
    SingularGram
        If ``epsilon == 0`` and the Gram matrix ``Pi^T X Pi`` is numerically
        singular.

    Examples
    --------
    >>> preserving_gain([[1.0], [0.0]], [[2.0, 0.0], [0.0, 3.0]], [[4.0], [5.0]], 0.0)
    array([[4.]])
    """
    Pi = linalg.as_matrix(Pi_p, "Pi")
    n, nu = Pi.shape
    X = linalg.as_matrix(X_p, "X", shape=(n, n))
    B = linalg.as_matrix(B_p, "B", shape=(n, 1))
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if not np.allclose(X, X.T, rtol=1e-10, atol=1e-14 * max(1.0, np.abs(X).max())):
        raise ValueError("X must be symmetric")
    if linalg.numerical_rank(Pi) < nu:
        warnings.warn("Pi is numerically rank deficient", RuntimeWarning, stacklevel=2)
    XPi = X @ Pi
    gram = Pi.T @ XPi
    gram = 0.5 * (gram + gram.T) + epsilon * np.eye(nu)
    rhs = XPi.T @ B
    if epsilon == 0.0:
        sv = np.linalg.svd(gram, compute_uv=False)
        if sv[-1] <= np.finfo(float).eps * nu * sv[0]:
            raise SingularGram("Pi^T X Pi is numerically singular; use epsilon > 0")
    return np.linalg.solve(gram, rhs)


class ConstantGain:
    """Parameter-independent gain ``G``; rejects ``sigma(S - G L)`` touching ``sigma(S)``."""

    kind = "constant"

    def __init__(self, G, gen, tol_spec=linalg.TOL_SPEC):
        G = np.asarray(G, dtype=float).reshape(-1, 1)
        if G.shape[0] != gen.nu:
            raise DimensionMismatch(f"gain has {G.shape[0]} rows, generator has nu = {gen.nu}")
        sep = linalg.spectral_separation(np.linalg.eigvals(gen.S - G @ gen.L), gen.eigenvalues())
        if sep < tol_spec * max(1.0, np.abs(gen.eigenvalues()).max()):
            raise SpectrumOverlap("sigma(S - G L) intersects sigma(S)")
        self.G = G

    def __call__(self, p):
        return self.G

    def to_dict(self):
        return {"kind": self.kind, "G": self.G.ravel().tolist()}


class PreservingGain:
    """``G(p)`` transferring the certificate ``X(p)`` through ``Pi(p)``.

    ``pi_source`` is a moment map exposing ``pi(p)`` (exact or series),
    ``certificate`` a callable ``p -> X(p)``.
    """

    kind = "preserving"

    def __init__(self, pi_source, certificate, system, epsilon=DEFAULT_EPS):
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        self.pi_source, self.certificate, self.system = pi_source, certificate, system
        self.epsilon = float(epsilon)

    def parts(self, p):
        """``(G, Pi, X)`` at ``p``."""
        Pi = self.pi_source.pi(p)
        X = self.certificate(p)
        return preserving_gain(Pi, X, self.system.B(p), self.epsilon), Pi, X

    def __call__(self, p):
        return self.parts(p)[0]

    def to_dict(self):
        return {
            "kind": self.kind,
            "pi_source": self.pi_source.to_dict(),
            "certificate": self.certificate.to_dict(),
            "system": self.system.to_dict(),
            "epsilon": self.epsilon,
        }


def gain_from_dict(d, gen):
    if d["kind"] == "constant":
        return ConstantGain(d["G"], gen)
    if d["kind"] == "preserving":
        return PreservingGain(
            moment_map_from_dict(d["pi_source"]),
            certificate_from_dict(d["certificate"]),
            ParametricLTI.from_dict(d["system"]),
            d["epsilon"],
        )
    raise ValueError(f"unknown gain kind {d['kind']!r}")


DEFAULT_DAMPING = 0.3


def default_poles(gen, zeta=DEFAULT_DAMPING):
    """Damped copies ``-zeta w +- i w`` of the generator eigenvalues.

    The zero eigenvalue (if present) maps to ``-zeta * min(freqs)``, or to
    ``-1`` for a pure DC generator.
    """
    poles = []
    if gen.include_zero:
        poles.append(-zeta * min(gen.freqs) if gen.freqs else -1.0)
    for w in gen.freqs:
        poles += [complex(-zeta * w, w), complex(-zeta * w, -w)]
    return np.array(poles, dtype=complex)


def place_gain(gen, poles=None):
    """Constant ``G`` with ``sigma(S - G L) = poles``.

    Uses the residue form of single-output eigenvalue assignment: with
    ``chi`` and ``d`` the characteristic polynomials of ``S`` and of the
    target, ``L (sI - S)^{-1} G = d(s) / chi(s) - 1``, so the modal
    coordinates of ``G`` are ``d(lam_j) / (chi'(lam_j) L v_j)``.  The
    residues are accumulated as products of ratios to avoid overflow.
    ``poles`` must be closed under conjugation.  A warning is issued when
    the achieved spectrum drifts from the target (targets far from
    ``sigma(S)`` need very large gains).
    """
    poles = default_poles(gen) if poles is None else np.asarray(poles, dtype=complex).ravel()
    if poles.size != gen.nu:
        raise DimensionMismatch(f"need {gen.nu} poles")
    if not np.allclose(np.sort_complex(poles), np.sort_complex(poles.conj())):
        raise ValueError("poles must be closed under complex conjugation")
    lam, V = np.linalg.eig(gen.S)
    Lv = (gen.L @ V).ravel()
    res = np.empty(gen.nu, dtype=complex)
    for j, lj in enumerate(lam):
        others = np.append(np.delete(lam, j), 0.0)
        den = lj - others
        den[-1] = 1.0
        res[j] = np.prod((lj - poles) / den)
    G = np.real(V @ (res / Lv)).reshape(-1, 1)
    achieved = np.linalg.eigvals(gen.S - G @ gen.L)
    drift = max(np.min(np.abs(achieved - mu)) for mu in poles)
    if not np.isfinite(drift) or drift > 1e-6 * max(1.0, np.abs(poles).max()):
        warnings.warn("pole placement is inaccurate for these targets", RuntimeWarning, stacklevel=2)
    return G


def riccati_gain(gen, q=1.0, r=1.0):
    """Constant ``G = P L^T / r`` from the filter Riccati equation of ``(S, L)``.

    Always yields a Hurwitz ``S - G L`` for an observable pair and stays well
    conditioned when the generator is large.
    """
    P = sla.solve_continuous_are(gen.S.T, gen.L.T, q * np.eye(gen.nu), np.array([[r]]))
    return P @ gen.L.T / r


# -- reduced model -----------------------------------------------------------


@dataclass(eq=False)
class ReducedModel:
    gen: SignalGenerator
    gain: object
    moment_map: object
    system: ParametricLTI = None
    param_interval: tuple = None
    provenance: dict = field(default_factory=dict)

    @property
    def nu(self):
        return self.gen.nu

    def eval(self, p):
        """``(F(p), G(p), H(p))``."""
        if self.system is not None:
            self.system.check_param(p)
        G = self.gain(p)
        return self.gen.S - G @ self.gen.L, G, self.moment_map(p)

    def transfer(self, p, s):
        F, G, H = self.eval(p)
        return linalg.transfer_values(F, G, H, s)

    def to_dict(self):
        return {
            "S": self.gen.S.tolist(),
            "L": self.gen.L.ravel().tolist(),
            "generator": self.gen.to_dict(),
            "gain": self.gain.to_dict(),
            "moment_map": self.moment_map.to_dict(),
            "system": None if self.system is None else self.system.to_dict(),
            "param_interval": None if self.param_interval is None else list(self.param_interval),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d):
        gen = SignalGenerator.from_dict(d["generator"])
        system = None if d.get("system") is None else ParametricLTI.from_dict(d["system"])
        pi = d.get("param_interval")
        return cls(
            gen,
            gain_from_dict(d["gain"], gen),
            moment_map_from_dict(d["moment_map"]),
            system,
            None if pi is None else tuple(pi),
            d.get("provenance", {}),
        )


def assemble(gen, gain, moment_map, system=None, param_interval=None):
    """Bundle generator, gain and moment map into a :class:`ReducedModel`.

    ``gain`` may be a gain object or a plain vector (wrapped in
    :class:`ConstantGain`).

    Raises
    ------
    DimensionMismatch
        On inconsistent ``nu``, or ``nu >= n`` when ``system`` is given.
    SpectrumOverlap
        For a constant gain with ``sigma(S - G L)`` meeting ``sigma(S)``.
    """
    if not hasattr(gain, "to_dict"):
        gain = ConstantGain(gain, gen)
    if moment_map.nu != gen.nu:
        raise DimensionMismatch(f"moment map has nu = {moment_map.nu}, generator has {gen.nu}")
    if system is not None and not gen.nu < system.n:
        raise DimensionMismatch(f"reduced order nu = {gen.nu} must be below n = {system.n}")
    if param_interval is None and system is not None:
        param_interval = system.param_interval
    if param_interval is None and isinstance(moment_map, BasisMoment):
        param_interval = moment_map.weights.param_interval
    return ReducedModel(gen, gain, moment_map, system, param_interval)


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path):
    with open(path) as fh:
        return ReducedModel.from_dict(json.load(fh))


# -- verification ------------------------------------------------------------


@dataclass
class MomentMatchReport:
    p: float
    exact_map: bool
    moment_deviation: float
    transfer_deviation: float
    points: list
    tol: float
    passed: bool

    def to_dict(self):
        return {
            "p": self.p,
            "exact_map": self.exact_map,
            "moment_deviation": self.moment_deviation,
            "transfer_deviation": self.transfer_deviation,
            "interpolation_points": [[z.real, z.imag] for z in self.points],
            "tol": self.tol,
            "passed": self.passed,
        }


def verify_moment_matching(model, system, p, tol=1e-8):
    """Compare the reduced and full models at the interpolation points.

    ``moment_deviation`` is ``||H P - C Pi|| / ||C Pi||`` with ``P`` solving
    ``F P + G L = P S``; ``transfer_deviation`` is the largest
    ``|W_rom(s) - W(s)| / (1 + |W(s)|)`` over ``s`` in ``sigma(S)``.  Only an
    exact moment map can fail; for approximate maps the deviations are the
    approximation error.

    Raises
    ------
    SpectrumOverlap
        If ``sigma(S - G(p) L)`` meets ``sigma(S)`` at this ``p``.
    """
    gen = model.gen
    F, G, H = model.eval(p)
    P = linalg.solve_sylvester(F, gen.S, G @ gen.L)
    cpi = exact_moment(system, gen, p)
    dev = float(np.linalg.norm(H @ P - cpi) / max(np.linalg.norm(cpi), np.finfo(float).tiny))
    pts = gen.eigenvalues()
    w_rom = np.atleast_1d(linalg.transfer_values(F, G, H, pts))
    w_full = np.atleast_1d(transfer_many(system, p, pts))
    tdev = float(np.max(np.abs(w_rom - w_full) / (1.0 + np.abs(w_full))))
    exact = isinstance(model.moment_map, ExactMoment)
    passed = (tdev <= tol and dev <= tol) if exact else True
    return MomentMatchReport(float(p), exact, dev, tdev, list(pts), tol, passed)


@dataclass
class PreservationReport:
    prop: str
    grid: np.ndarray
    values: np.ndarray
    threshold: float
    failures: list
    passed: bool
    note: str = ""

    def to_dict(self):
        return {
            "property": self.prop,
            "grid": np.asarray(self.grid).tolist(),
            "values": np.asarray(self.values).tolist(),
            "threshold": self.threshold,
            "failures": self.failures,
            "passed": self.passed,
            "grid_points": int(np.size(self.grid)),
            "note": self.note,
        }


def reduced_dissipation_lmi(F, G, H, Xt, spec_values):
    """Reduced supply-rate LMI matrix for ``(F, G, H)`` and certificate ``Xt``."""
    Q, S, R = spec_values
    nu = F.shape[0]
    M = np.empty((nu + 1, nu + 1))
    M[:nu, :nu] = F.T @ Xt + Xt @ F - Q * (H.T @ H)
    off = Xt @ G - S * H.T
    M[:nu, nu:] = off
    M[nu:, :nu] = off.T
    M[nu, nu] = -R
    return 0.5 * (M + M.T)


def verify_preservation_grid(model, system, prop, grid, X_source=None, margin=0.0, tol_psd=TOL_PSD):
    """Grid check of stability (``prop == "stability"``) or dissipativity.

    For dissipativity ``prop`` is a :class:`~parmor.psys.DissipativitySpec`;
    the reduced LMI uses ``X~(p) = Pi(p)^T X(p) Pi(p)`` with ``Pi`` and ``X``
    taken from the model's preserving gain unless ``X_source`` is given.
    Points between grid nodes are not certified.
    """
    grid = np.asarray(list(grid), dtype=float)
    note = f"checked on {grid.size} grid points only; values between nodes are not certified"
    vals = []
    if isinstance(prop, str) and prop == "stability":
        for p in grid:
            F, _, _ = model.eval(p)
            vals.append(float(np.max(linalg.spectrum(F).real)))
        vals = np.array(vals)
        failures = [float(p) for p, v in zip(grid, vals) if not v < -margin]
        return PreservationReport("stability", grid, vals, -margin, failures, not failures, note)
    if not isinstance(prop, DissipativitySpec):
        raise ValueError("prop must be 'stability' or a DissipativitySpec")
    for p in grid:
        F, G, H = model.eval(p)
        if isinstance(model.gain, PreservingGain) and X_source is None:
            _, Pi, X = model.gain.parts(p)
        else:
            src = model.gain.pi_source if isinstance(model.gain, PreservingGain) else model.moment_map
            Pi = src.pi(p)
            X = (X_source or model.gain.certificate)(p)
        Xt = Pi.T @ X @ Pi
        vals.append(linalg.max_eig_sym(reduced_dissipation_lmi(F, G, H, 0.5 * (Xt + Xt.T), prop(p))))
    vals = np.array(vals)
    failures = [float(p) for p, v in zip(grid, vals) if v > tol_psd]
    return PreservationReport("dissipativity", grid, vals, tol_psd, failures, not failures, note)
