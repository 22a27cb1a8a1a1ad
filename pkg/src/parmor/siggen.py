"""Signal generators ``omega' = S omega``, ``u = L omega`` in real Jordan form."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import AliasedSampling, DimensionMismatch, DuplicateFrequency, ObservabilityFailure


@dataclass(frozen=True, eq=False)
class SignalGenerator:
    """Interpolation data ``(S, L, omega0)``.

    The state is ordered as an optional scalar zero block followed by one
    rotation block ``[[0, w], [-w, 0]]`` per entry of ``freqs``.
    """

    freqs: tuple
    include_zero: bool
    L: np.ndarray
    omega0: np.ndarray

    def __post_init__(self):
        nu = int(self.include_zero) + 2 * len(self.freqs)
        if nu == 0:
            raise ValueError("signal generator needs at least one eigenvalue")
        L = np.asarray(self.L, dtype=float).reshape(1, -1).copy()
        w0 = np.asarray(self.omega0, dtype=float).ravel().copy()
        if L.shape[1] != nu or w0.size != nu:
            raise DimensionMismatch(f"L and omega0 must have {nu} entries")
        L.setflags(write=False)
        w0.setflags(write=False)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "omega0", w0)
        object.__setattr__(self, "freqs", tuple(float(f) for f in self.freqs))

    @property
    def nu(self):
        return int(self.include_zero) + 2 * len(self.freqs)

    @property
    def S(self):
        S = np.zeros((self.nu, self.nu))
        off = int(self.include_zero)
        for i, w in enumerate(self.freqs):
            j = off + 2 * i
            S[j, j + 1] = w
            S[j + 1, j] = -w
        return S

    def eigenvalues(self):
        """Exact spectrum ``{0} U {+-i w}`` in state order."""
        ev = [0j] if self.include_zero else []
        for w in self.freqs:
            ev += [1j * w, -1j * w]
        return np.array(ev, dtype=complex)

    def expm(self, t):
        """``exp(S t)`` assembled blockwise from cosines and sines."""
        E = np.zeros((self.nu, self.nu))
        off = int(self.include_zero)
        if off:
            E[0, 0] = 1.0
        for i, w in enumerate(self.freqs):
            j = off + 2 * i
            c, s = np.cos(w * t), np.sin(w * t)
            E[j : j + 2, j : j + 2] = [[c, s], [-s, c]]
        return E

    def to_dict(self):
        return {
            "freqs": list(self.freqs),
            "include_zero": self.include_zero,
            "L": self.L.ravel().tolist(),
            "omega0": self.omega0.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return from_frequencies(d["freqs"], d.get("include_zero", False), L=d.get("L"), omega0=d.get("omega0"))


def _pbh_min_sv(S, M, side):
    """Smallest normalised PBH singular value over the spectrum of ``S``."""
    nu = S.shape[0]
    worst = np.inf
    for lam in np.linalg.eigvals(S):
        if side == "obs":
            pencil = np.vstack([lam * np.eye(nu) - S, M.astype(complex)])
        else:
            pencil = np.hstack([lam * np.eye(nu) - S, M.astype(complex)])
        sv = np.linalg.svd(pencil, compute_uv=False)
        worst = min(worst, sv[-1] / max(sv[0], 1.0))
    return worst


def is_observable(S, L, rank_tol=linalg.RANK_TOL):
    """PBH test: ``[lam I - S; L]`` has full column rank at every eigenvalue."""
    return _pbh_min_sv(np.asarray(S, float), np.atleast_2d(L), "obs") > rank_tol


def is_excitable(S, omega0, rank_tol=linalg.RANK_TOL):
    """PBH test on the pair ``(S, omega0)``."""
    return _pbh_min_sv(np.asarray(S, float), np.reshape(omega0, (-1, 1)), "ctr") > rank_tol


def from_frequencies(freqs, include_zero=False, L=None, omega0=None):
    """Build a generator with eigenvalues ``{0 (optional)} U {+-i w : w in freqs}``.

    ``L`` and ``omega0`` default to all-ones.  Observability of ``(S, L)``
    and excitability of ``(S, omega0)`` are verified with the PBH test,
    which remains reliable when the frequencies span several decades (the
    Krylov/observability matrix does not).

    Raises
    ------
    DuplicateFrequency
        On repeated frequencies, or a zero frequency together with
        ``include_zero``.
    ObservabilityFailure
        If either rank condition fails.
    """
    f = [float(w) for w in freqs]
    if any(w < 0 for w in f):
        raise ValueError("frequencies must be nonnegative")
    if 0.0 in f:
        if include_zero or f.count(0.0) > 1:
            raise DuplicateFrequency("zero frequency given twice")
        f.remove(0.0)
        include_zero = True
    if len(set(f)) != len(f):
        raise DuplicateFrequency(f"repeated frequency in {sorted(f)}")
    nu = int(include_zero) + 2 * len(f)
    L = np.ones(nu) if L is None else L
    omega0 = np.ones(nu) if omega0 is None else omega0
    gen = SignalGenerator(tuple(f), bool(include_zero), L, omega0)
    S = gen.S
    if not is_observable(S, gen.L):
        raise ObservabilityFailure("(S, L) is not observable")
    if not is_excitable(S, gen.omega0):
        raise ObservabilityFailure("(S, omega0) is not excitable")
    return gen


def log_grid(lo_exp, hi_exp, count):
    """``count`` frequencies equidistant in ``log10`` between ``10**lo_exp`` and ``10**hi_exp``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        return np.array([10.0**lo_exp])
    if not lo_exp < hi_exp:
        raise ValueError("lo_exp must be < hi_exp")
    return np.logspace(lo_exp, hi_exp, count)


def parse_interp_grid(spec):
    """Parse a ``lo:hi:count`` string into a frequency grid."""
    try:
        lo, hi, count = spec.split(":")
        return log_grid(float(lo), float(hi), int(count))
    except ValueError as exc:
        raise ValueError(f"interp grid must look like 'lo:hi:count', got {spec!r}") from exc


def omega_trajectory(gen, times):
    """Closed-form ``omega(t_k) = exp(S t_k) omega0`` stacked row-wise, shape (len(times), nu)."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if not np.all(np.isfinite(t)):
        raise ValueError("times must be finite")
    out = np.empty((t.size, gen.nu))
    off = int(gen.include_zero)
    w0 = gen.omega0
    if off:
        out[:, 0] = w0[0]
    for i, w in enumerate(gen.freqs):
        j = off + 2 * i
        c, s = np.cos(w * t), np.sin(w * t)
        a, b = w0[j], w0[j + 1]
        out[:, j] = c * a + s * b
        out[:, j + 1] = -s * a + c * b
    return out


def input_signal(gen, times):
    """``u(t) = L omega(t)``."""
    return omega_trajectory(gen, times) @ gen.L.ravel()


def check_sampling(gen, times, rtol=1e-9):
    """Reject sample spacings that alias a generator frequency.

    A spacing ``dt`` with ``w dt / pi`` an integer collapses the samples of
    the corresponding rotation block onto a line, so the snapshot matrix
    loses rank.  Also verifies the snapshot matrix has full column rank.
    """
    t = np.asarray(times, dtype=float)
    if t.size >= 2:
        dt = np.diff(t)
        if np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
            for w in gen.freqs:
                ratio = w * dt[0] / np.pi
                if ratio > 0.5 and abs(ratio - round(ratio)) <= rtol * max(1.0, ratio):
                    raise AliasedSampling(
                        f"sampling period {dt[0]:.6g} s is a multiple of pi/{w:.6g}"
                    )
    U = omega_trajectory(gen, t)
    if linalg.numerical_rank(U) < gen.nu:
        raise AliasedSampling("snapshot matrix of the generator is rank deficient")
    return U


def save_generator(gen, path):
    with open(path, "w") as fh:
        json.dump(gen.to_dict(), fh)


def load_generator(path):
    with open(path) as fh:
        return SignalGenerator.from_dict(json.load(fh))
