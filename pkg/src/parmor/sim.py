"""Fixed-step simulation of a plant driven by a signal generator, and snapshot extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import siggen
from .errors import NonFiniteState, WindowOutsideTrajectory, WindowTooShort
from .moment_basis import SnapshotDataset
from .psys import ParametricLTI

_METHODS = ("auto", "rk4", "expm")
_BLOWUP = 1e12


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    Parameters
    ----------
    dt : float
        Step length in seconds.
    t_end : float
        Final time.
    method : {"auto", "rk4", "expm"}
        ``"expm"`` propagates linear plants exactly with the matrix
        exponential of the plant/generator cascade; ``"auto"`` picks it for
        linear plants and RK4 otherwise.
    record_stride : int
        Keep every ``record_stride``-th step.
    t_record : float
        Recording starts at this time.  The exact stepper jumps straight to
        it, so the recorded grid is ``t_record + k * dt``.
    """

    dt: float = 1e-3
    t_end: float = 20.0
    method: str = "auto"
    record_stride: int = 1
    t_record: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be at least dt")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if not 0.0 <= self.t_record <= self.t_end:
            raise ValueError("t_record must lie in [0, t_end]")


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    param: float

    def __post_init__(self):
        if not (len(self.times) == self.states.shape[0] == len(self.outputs)):
            raise ValueError("trajectory arrays have inconsistent lengths")

    def to_csv(self, path):
        n = self.states.shape[1]
        header = ",".join(["t"] + [f"x{i}" for i in range(n)] + ["y"])
        np.savetxt(
            path,
            np.column_stack([self.times, self.states, self.outputs]),
            delimiter=",",
            header=header,
            comments="",
            fmt="%.17g",
        )


def _guard(x, t):
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _BLOWUP:
        raise NonFiniteState(f"state diverged at t = {t:.6g}")


def _simulate_expm(system, gen, p, x0, cfg):
    A, B, C = system.eval(p)
    n, nu = system.n, gen.nu
    M = np.zeros((n + nu, n + nu))
    M[:n, :n] = A
    M[:n, n:] = B @ gen.L
    M[n:, n:] = gen.S
    steps = int(round((cfg.t_end - cfg.t_record) / cfg.dt))
    times = cfg.t_record + cfg.dt * np.arange(steps + 1)
    omega = siggen.omega_trajectory(gen, times)
    if cfg.t_record > 0:
        E0 = sla.expm(M * cfg.t_record)
        x = E0[:n, :n] @ x0 + E0[:n, n:] @ gen.omega0
    else:
        x = x0.copy()
    E = sla.expm(M * cfg.dt)
    Exx, Exw = E[:n, :n], E[:n, n:]
    keep = np.arange(0, steps + 1, cfg.record_stride)
    states = np.empty((keep.size, n))
    r = 0
    for k in range(steps + 1):
        if k % cfg.record_stride == 0:
            states[r] = x
            r += 1
        if k < steps:
            x = Exx @ x + Exw @ omega[k]
            _guard(x, times[k + 1])
    ys = states @ C.ravel()
    return Trajectory(times[keep], states, ys, float(p))


def _simulate_rk4(rhs, output, n, gen, p, x0, cfg):
    steps = max(1, int(round(cfg.t_end / cfg.dt)))
    dt = cfg.t_end / steps
    L = gen.L.ravel()
    rec_t, rec_x = [], []
    x = x0.copy()
    first = int(np.ceil(cfg.t_record / dt - 1e-9))
    # inputs at every node and midpoint, in closed form
    u = siggen.omega_trajectory(gen, 0.5 * dt * np.arange(2 * steps + 1)) @ L
    for k in range(steps + 1):
        t = k * dt
        if k >= first and (k - first) % cfg.record_stride == 0:
            rec_t.append(t)
            rec_x.append(x.copy())
        if k == steps:
            break
        k1 = rhs(x, u[2 * k])
        k2 = rhs(x + 0.5 * dt * k1, u[2 * k + 1])
        k3 = rhs(x + 0.5 * dt * k2, u[2 * k + 1])
        k4 = rhs(x + dt * k3, u[2 * k + 2])
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _guard(x, t + dt)
    states = np.array(rec_x).reshape(len(rec_x), n)
    return Trajectory(np.array(rec_t), states, output(states), float(p))


def simulate_interconnection(system, gen, p, x0=None, cfg=None):
    """Simulate ``x' = f(x, L omega(t), p)`` with ``omega(t) = exp(S t) omega0``.

    ``system`` is a :class:`~parmor.psys.ParametricLTI` or any object with
    ``n``, ``check_param``, ``f(x, u, p)`` and ``h(X, p)`` (rows of ``X`` are
    states); an optional ``vector_field(p)`` returning a fast ``(x, u)``
    closure is used when present.

    Raises
    ------
    ParameterOutOfRange
        If ``p`` is outside the system's interval.
    NonFiniteState
        If the state becomes non-finite or exceeds ``1e12`` in magnitude.
    """
    cfg = SimConfig() if cfg is None else cfg
    system.check_param(p)
    n = system.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    if x0.size != n:
        raise ValueError(f"x0 must have {n} entries")
    linear = isinstance(system, ParametricLTI)
    method = cfg.method
    if method == "auto":
        method = "expm" if linear else "rk4"
    if method == "expm":
        if not linear:
            raise ValueError("the exact stepper needs a linear plant")
        return _simulate_expm(system, gen, p, x0, cfg)
    if linear:
        A, B, C = system.eval(p)
        b, c = B.ravel(), C.ravel()
        return _simulate_rk4(lambda x, u: A @ x + b * u, lambda X: X @ c, n, gen, p, x0, cfg)
    if hasattr(system, "vector_field"):
        rhs = system.vector_field(p)
    else:
        rhs = lambda x, u: system.f(x, u, p)  # noqa: E731
    return _simulate_rk4(rhs, lambda X: system.h(X, p), n, gen, p, x0, cfg)


def extract_window(traj, gen, t_start, t_end, h, check=True):
    """Resample ``h`` equidistant times on ``[t_start, t_end]`` into a one-parameter dataset.

    Recorded samples are used directly when the window grid coincides with
    the trajectory grid; otherwise outputs are linearly interpolated.

    Raises
    ------
    WindowTooShort
        If ``h < nu``.
    WindowOutsideTrajectory
        If the window is not covered by the recorded times.
    AliasedSampling
        If the generator samples on the window are rank deficient.
    """
    if h < gen.nu:
        raise WindowTooShort(f"h = {h} < nu = {gen.nu}")
    times = np.linspace(t_start, t_end, h) if h > 1 else np.array([float(t_end)])
    tt = traj.times
    slack = 1e-9 * max(1.0, abs(tt[-1]))
    if t_start < tt[0] - slack or t_end > tt[-1] + slack or t_start > t_end:
        raise WindowOutsideTrajectory(
            f"window [{t_start}, {t_end}] not inside recorded span [{tt[0]}, {tt[-1]}]"
        )
    idx = np.clip(np.searchsorted(tt, times), 0, tt.size - 1)
    near = np.where(np.abs(tt[idx] - times) <= slack, idx, -1)
    alt = np.clip(idx - 1, 0, tt.size - 1)
    near = np.where((near < 0) & (np.abs(tt[alt] - times) <= slack), alt, near)
    if np.all(near >= 0):
        y = traj.outputs[near]
        times = tt[near]
    else:
        y = np.interp(times, tt, traj.outputs)
    if check:
        omega = siggen.check_sampling(gen, times)
    else:
        omega = siggen.omega_trajectory(gen, times)
    return SnapshotDataset([traj.param], times, omega, y[None, :])


def window_config(t_start, t_end, h, method="auto", dt=None):
    """A :class:`SimConfig` whose recorded grid contains the snapshot window.

    With the exact stepper the step is the window spacing itself.  RK4 uses
    ``dt`` (default ``1e-3``) rounded down so the window spacing is an
    integer number of steps.
    """
    spacing = (t_end - t_start) / (h - 1) if h > 1 else t_end
    if method in ("auto", "expm") and dt is None:
        return SimConfig(dt=spacing, t_end=t_end, method=method, t_record=t_start)
    dt = 1e-3 if dt is None else dt
    sub = max(1, int(np.ceil(spacing / dt - 1e-9)))
    return SimConfig(dt=spacing / sub, t_end=t_end, method="rk4" if method == "auto" else method,
                     record_stride=1, t_record=0.0)


def collect_snapshots(system, gen, params, t_start, t_end, h, cfg=None, x0=None):
    """Simulate at every parameter and stack the windows into one dataset."""
    if cfg is None:
        cfg = window_config(t_start, t_end, h)
    frags = [
        extract_window(simulate_interconnection(system, gen, p, x0, cfg), gen, t_start, t_end, h)
        for p in params
    ]
    return SnapshotDataset(
        [f.params[0] for f in frags],
        frags[0].times,
        frags[0].omega,
        np.vstack([f.outputs for f in frags]),
    )


def add_output_noise(dataset, std, seed=None):
    """Copy of ``dataset`` with i.i.d. ``N(0, std**2)`` noise added to the outputs."""
    if std < 0:
        raise ValueError("std must be nonnegative")
    rng = np.random.default_rng(seed)
    noisy = dataset.outputs + (std * rng.standard_normal(dataset.outputs.shape) if std > 0 else 0.0)
    return SnapshotDataset(
        dataset.params.copy(),
        dataset.times.copy(),
        dataset.omega.copy(),
        noisy,
        {"std": float(std), "seed": seed},
    )
