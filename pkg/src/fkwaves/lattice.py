"""Time integration of the monotone (u, Xi) lattice system.

The chain evolves by

    du_i/dt  = alpha0 * (Xi_i - u_i)
    dXi_i/dt = 2 * F((u_{i+r_j})_j) + alpha0 * (u_i - Xi_i)

under a boundary rule (fixed 0/1 front ghosts, or helical wraparound
u_{i+M} = u_i + 1).  Front positions come from level crossings; long-time
mean drift rates give rotation numbers for helical states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import (
    BlowUpError,
    GateError,
    InsufficientDataError,
    ConvergenceError,
    NoFrontError,
    NonMonotoneFrontError,
    StencilError,
)
from .model import ModelDescriptor, eval_F_stack, validate_extension

FIXED_FRONT = "fixed_front"
HELICAL = "helical"

#: |c| below this value counts as pinned.
PINNING_THRESHOLD = 1e-4

#: Minimum distance (sites) between the front and either chain end.
BOUNDARY_GUARD = 50

MONOTONE_TOL = 1e-8


@dataclass(frozen=True)
class BoundaryMode:
    kind: str

    def __post_init__(self):
        if self.kind not in (FIXED_FRONT, HELICAL):
            raise ValueError(f"unknown boundary mode {self.kind!r}")

    @property
    def code(self) -> int:
        return kernels.BC_FIXED if self.kind == FIXED_FRONT else kernels.BC_HELICAL


FIXED = BoundaryMode(FIXED_FRONT)
WRAP = BoundaryMode(HELICAL)


def min_sites(model: ModelDescriptor) -> int:
    reach = max(int(abs(round(r))) for r in model.stencil.shifts)
    return 3 * reach + 3


@dataclass
class LatticeState:
    t: float
    u: np.ndarray
    xi: np.ndarray
    boundary: BoundaryMode = FIXED

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.u.shape != self.xi.shape or self.u.ndim != 1:
            raise ValueError("u and xi must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.xi))):
            raise ValueError("state entries must be finite")

    @property
    def M(self) -> int:
        return self.u.shape[0]


@dataclass
class FrontTrace:
    times: np.ndarray
    positions: np.ndarray
    level: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("trace times must be strictly increasing")


@dataclass
class Trajectory:
    times: np.ndarray        # (S,)
    u: np.ndarray            # (S, M)
    xi: np.ndarray           # (S, M)
    boundary: BoundaryMode
    stopped_early: bool = False
    stop_reason: str = ""


def init_front(M: int, style: str, slope_p: Optional[float] = None) -> LatticeState:
    """Initial chain data: 'step', 'tanh' (heteroclinic) or 'linear_slope'.

    Xi starts equal to u (zero initial particle velocity).
    """
    i = np.arange(M, dtype=float)
    if style == "step":
        u = np.where(i < M // 2, 0.0, 1.0)
        boundary = FIXED
    elif style == "tanh":
        u = 0.5 * (1.0 + np.tanh((i - M // 2) / 4.0))
        boundary = FIXED
    elif style == "linear_slope":
        p = slope_p if slope_p is not None else 1.0 / M
        u = p * i
        boundary = WRAP
    else:
        raise ValueError(f"unknown init style {style!r}")
    return LatticeState(t=0.0, u=u, xi=u.copy(), boundary=boundary)


def _int_shifts(model: ModelDescriptor):
    shifts = []
    for r in model.stencil.shifts:
        if not float(r).is_integer():
            raise StencilError(
                f"lattice evaluation needs integer shifts, got {model.stencil.shifts}"
            )
        shifts.append(int(r))
    return shifts


def shifted_values(u: np.ndarray, r: int, boundary: BoundaryMode) -> np.ndarray:
    """u_{i+r} under the boundary rule, for every site i."""
    M = u.shape[0]
    idx = np.arange(M) + r
    if boundary.kind == HELICAL:
        wind = np.floor_divide(idx, M)
        return u[idx - wind * M] + wind
    out = u[np.clip(idx, 0, M - 1)].copy()
    out[idx < 0] = 0.0
    out[idx >= M] = 1.0
    return out


def rhs(state: LatticeState, model: ModelDescriptor):
    """Exact right-hand side (du, dxi) of the monotone system."""
    shifts = _int_shifts(model)
    if state.M < min_sites(model):
        raise ValueError(f"chain too short: M={state.M} < {min_sites(model)}")
    X = np.stack([shifted_values(state.u, r, state.boundary) for r in shifts])
    F = eval_F_stack(model.nonlinearity, X)
    a0 = model.alpha0
    du = a0 * (state.xi - state.u)
    dxi = 2.0 * F + a0 * (state.u - state.xi)
    return du, dxi


def dt_max(model: ModelDescriptor) -> float:
    """Stability bound for the explicit stepper (stiffest rate is 2*alpha0)."""
    return 0.5 / model.alpha0


def step_rk4(state: LatticeState, model: ModelDescriptor, dt: float) -> LatticeState:
    """One classical 4-stage step of (u, Xi)."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if dt > dt_max(model) * (1.0 + 1e-12):
        raise ValueError(
            f"dt={dt:.4g} exceeds stability bound 0.5/alpha0={dt_max(model):.4g}"
        )
    u, xi = state.u, state.xi

    def f(uu, xx):
        return rhs(LatticeState(state.t, uu, xx, state.boundary), model)

    k1u, k1x = f(u, xi)
    k2u, k2x = f(u + 0.5 * dt * k1u, xi + 0.5 * dt * k1x)
    k3u, k3x = f(u + 0.5 * dt * k2u, xi + 0.5 * dt * k2x)
    k4u, k4x = f(u + dt * k3u, xi + dt * k3x)
    un = u + (dt / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
    xin = xi + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
    bad = ~(np.isfinite(un) & np.isfinite(xin))
    if np.any(bad):
        raise BlowUpError(state.t + dt, int(np.nonzero(bad)[0][0]))
    return LatticeState(state.t + dt, un, xin, state.boundary)


def _run_batch(model, u, xi, boundary, dt, n_steps, sample_every):
    """Integrate a (B, M) batch; returns (out_u, out_xi) of shape (S, B, M)."""
    packed = kernels.builtin_params(model.nonlinearity)
    if packed is not None and _int_shifts(model) in ([0, 1, -1], [0, -1, 1]):
        kind, p0, p1, p2 = packed
        return kernels.rk4_run(u, xi, kind, p0, p1, p2, model.alpha0,
                               boundary.code, dt, n_steps, sample_every)
    # generic path: vectorized RK4 over the batch rows
    shifts = _int_shifts(model)
    a0 = model.alpha0

    def deriv(uu, xx):
        X = np.stack([
            np.stack([shifted_values(uu[b], r, boundary) for r in shifts])
            for b in range(uu.shape[0])
        ], axis=1)  # (n_args, B, M)
        F = eval_F_stack(model.nonlinearity, X)
        return a0 * (xx - uu), 2.0 * F + a0 * (uu - xx)

    n_samples = n_steps // sample_every + 1
    B, M = u.shape
    out_u = np.empty((n_samples, B, M))
    out_xi = np.empty((n_samples, B, M))
    u = u.copy()
    xi = xi.copy()
    out_u[0], out_xi[0] = u, xi
    s = 1
    for step in range(1, n_steps + 1):
        k1u, k1x = deriv(u, xi)
        k2u, k2x = deriv(u + 0.5 * dt * k1u, xi + 0.5 * dt * k1x)
        k3u, k3x = deriv(u + 0.5 * dt * k2u, xi + 0.5 * dt * k2x)
        k4u, k4x = deriv(u + dt * k3u, xi + dt * k3x)
        u = u + (dt / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
        xi = xi + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        if step % sample_every == 0:
            out_u[s], out_xi[s] = u, xi
            s += 1
    return out_u, out_xi


def simulate(model: ModelDescriptor, state: LatticeState, T: float,
             dt: Optional[float] = None, max_samples: int = 2000) -> Trajectory:
    """Integrate to time T with fixed dt, sampling at most max_samples states."""
    if state.M < min_sites(model):
        raise ValueError(f"chain too short: M={state.M} < {min_sites(model)}")
    if dt is None:
        dt = dt_max(model)
    if dt > dt_max(model) * (1.0 + 1e-12):
        raise ValueError(
            f"dt={dt:.4g} exceeds stability bound 0.5/alpha0={dt_max(model):.4g}"
        )
    n_steps = max(1, int(round(T / dt)))
    sample_every = max(1, n_steps // max_samples)
    n_steps = (n_steps // sample_every) * sample_every
    out_u, out_xi = _run_batch(
        model, state.u[None, :], state.xi[None, :], state.boundary,
        dt, n_steps, sample_every,
    )
    times = state.t + dt * sample_every * np.arange(out_u.shape[0])
    u_s, xi_s = out_u[:, 0, :], out_xi[:, 0, :]
    bad = ~(np.isfinite(u_s) & np.isfinite(xi_s))
    if np.any(bad):
        s_bad, i_bad = np.nonzero(bad)
        raise BlowUpError(times[s_bad[0]], int(i_bad[0]))
    return Trajectory(times, u_s, xi_s, state.boundary)


def front_position(u, level: float, boundary: BoundaryMode = FIXED) -> float:
    """Real-valued level crossing of a (near-)monotone front state.

    Accepts a LatticeState or a bare array.  Helical states return the
    unwrapped position: crossing modulo M plus M times the winding count
    of the level.
    """
    if isinstance(u, LatticeState):
        boundary = u.boundary
        u = u.u
    u = np.asarray(u, dtype=float)
    M = u.shape[0]
    if boundary.kind == HELICAL:
        j = np.arange(-M, 2 * M)
        ext = u[j % M] + np.floor_divide(j, M)
        if np.min(np.diff(ext)) < -MONOTONE_TOL:
            raise NonMonotoneFrontError("helical state is not monotone")
        wind = math.floor(level - u[0])
        lev = level - wind  # lies in [u[0], u[0] + 1)
        x = _interp_crossing(ext, lev)
        return (x - M) + M * wind
    if np.min(np.diff(u)) < -MONOTONE_TOL:
        raise NonMonotoneFrontError(
            f"front not monotone within {MONOTONE_TOL:g}"
        )
    if not (u[0] <= level <= u[-1]):
        raise NoFrontError(f"no crossing of level {level} in the chain")
    return _interp_crossing(u, level)


def _interp_crossing(u: np.ndarray, level: float) -> float:
    w = np.maximum.accumulate(u)
    k = int(np.searchsorted(w, level))
    if k == 0:
        return 0.0
    if k >= u.shape[0]:
        raise NoFrontError(f"level {level} above the chain range")
    denom = u[k] - u[k - 1]
    if abs(denom) < 1e-14:
        return k - 0.5
    return (k - 1) + (level - u[k - 1]) / denom


def trace_front(traj: Trajectory, level: float,
                guard: int = BOUNDARY_GUARD) -> FrontTrace:
    """Level-crossing positions along a trajectory.

    For fixed-front runs the trace is truncated when the front gets within
    `guard` sites of either end (boundary contamination).
    """
    M = traj.u.shape[1]
    positions = []
    for s in range(traj.u.shape[0]):
        pos = front_position(traj.u[s], level, traj.boundary)
        if traj.boundary.kind == FIXED_FRONT and not (
            guard <= pos <= M - 1 - guard
        ):
            if not positions:
                raise NoFrontError("front starts inside the boundary guard zone")
            return FrontTrace(traj.times[: len(positions)],
                              np.array(positions), level)
        positions.append(pos)
    return FrontTrace(traj.times, np.array(positions), level)


def measure_velocity(trace: FrontTrace, window: float = 0.5):
    """Least-squares slope of position vs time over the trailing window.

    Returns (c, r2).  A constant trace has r2 = 1 by convention.
    """
    n = trace.times.shape[0]
    if n < 50:
        raise InsufficientDataError(f"need >= 50 trace samples, got {n}")
    if not (0.0 < window <= 1.0):
        raise ValueError("window must lie in (0, 1]")
    k = max(2, int(round(window * n)))
    t = trace.times[n - k:]
    x = trace.positions[n - k:]
    tbar = t.mean()
    xbar = x.mean()
    stt = float(np.sum((t - tbar) ** 2))
    slope = float(np.sum((t - tbar) * (x - xbar)) / stt)
    ss_res = float(np.sum((x - xbar - slope * (t - tbar)) ** 2))
    ss_tot = float(np.sum((x - xbar) ** 2))
    r2 = 1.0 if ss_tot < 1e-24 else 1.0 - ss_res / ss_tot
    return slope, r2


def run_front(model: ModelDescriptor, M: int = 400, T: float = 200.0,
              dt: Optional[float] = None, init_style: str = "step",
              level: Optional[float] = None, guard: int = BOUNDARY_GUARD,
              max_samples: int = 2000):
    """Heteroclinic front run: simulate, track the level crossing.

    Integration proceeds in chunks and stops early once the front enters
    the guard zone.  Returns (trace, trajectory).
    """
    if level is None:
        level = model.phase_level()
    state = init_front(M, init_style)
    if dt is None:
        dt = dt_max(model)
    n_steps = max(1, int(round(T / dt)))
    sample_every = max(1, n_steps // max_samples)
    n_steps = (n_steps // sample_every) * sample_every
    chunk = 100 * sample_every

    times = [np.array([0.0])]
    us = [state.u[None, :]]
    xis = [state.xi[None, :]]
    u, xi = state.u[None, :].copy(), state.xi[None, :].copy()
    done = 0
    stopped = False
    reason = ""
    while done < n_steps:
        n_now = min(chunk, n_steps - done)
        out_u, out_xi = _run_batch(model, u[0][None, :], xi[0][None, :],
                                   state.boundary, dt, n_now, sample_every)
        u, xi = out_u[-1], out_xi[-1]
        new_t = dt * (done + sample_every * np.arange(1, out_u.shape[0]))
        times.append(new_t)
        us.append(out_u[1:, 0, :])
        xis.append(out_xi[1:, 0, :])
        done += n_now
        # guard check on the freshly sampled states
        last = us[-1][-1]
        if not np.all(np.isfinite(last)):
            bad = int(np.nonzero(~np.isfinite(last))[0][0])
            raise BlowUpError(times[-1][-1], bad)
        try:
            pos = front_position(last, level, state.boundary)
        except NoFrontError:
            stopped, reason = True, "front left the chain"
            break
        if not (guard <= pos <= M - 1 - guard):
            stopped, reason = True, "front entered the boundary guard zone"
            break
    traj = Trajectory(
        np.concatenate(times), np.concatenate(us), np.concatenate(xis),
        state.boundary, stopped_early=stopped, stop_reason=reason,
    )
    trace = trace_front(traj, level, guard)
    return trace, traj


@dataclass
class RotationResult:
    """Long-time mean drift of a helical state."""

    lambda_p: float
    c_p: float
    p: float
    converged: bool
    avg_half: float
    avg_quarter: float
    T_used: float


def rotation_number(model: ModelDescriptor, M: int, T: Optional[float] = None,
                    dt: Optional[float] = None, conv_tol: float = 1e-4,
                    T_cap: float = 6400.0) -> RotationResult:
    """Rotation number lambda_p of the helical slope-1/M state.

    lambda_p is the trailing-half Cesaro average of the mean site velocity
    with one Richardson step across window halves; c_p = M * lambda_p.
    Windows are snapped to multiples of the drift period 1/|lambda| to
    cancel the oscillatory tail.  When T is omitted the run is extended
    (doubling) until two successive window averages differ by < conv_tol.
    """
    if not model.stencil.integer_only:
        raise StencilError("rotation numbers need an integer stencil")
    if not model.nonlinearity.whole_line or not validate_extension(model.nonlinearity):
        raise GateError("helical runs need a diagonally periodic nonlinearity")
    if dt is None:
        dt = dt_max(model)
    state = init_front(M, "linear_slope")

    adaptive = T is None
    T_run = 200.0 if adaptive else T
    t_all = [np.array([0.0])]
    m_all = [np.array([state.u.mean()])]
    u, xi = state.u[None, :], state.xi[None, :]
    t0 = 0.0

    def averages():
        t = np.concatenate(t_all)
        m = np.concatenate(m_all)
        total = t[-1]
        lam_plain = (m[-1] - _interp_at(t, m, total / 2.0)) / (total / 2.0)
        # the tail of the mean drift oscillates with period 1/|lambda|;
        # snapping windows to period multiples cancels it
        period = 1.0 / max(abs(lam_plain), 1e-12)
        short = period < total and total < 8.0 * period and abs(lam_plain) > conv_tol
        w1 = _snap_window(total / 2.0, period)
        w2 = _snap_window(total / 4.0, period)
        if w2 >= w1 or w2 <= 0.0:
            w1, w2 = total / 2.0, total / 4.0
        a1 = (m[-1] - _interp_at(t, m, total - w1)) / w1
        a2 = (m[-1] - _interp_at(t, m, total - w2)) / w2
        lam = (w1 * a1 - w2 * a2) / (w1 - w2)
        return lam, a1, a2, short

    while True:
        n_steps = max(1, int(round(T_run / dt)))
        sample_every = max(1, n_steps // 2000)
        n_steps = (n_steps // sample_every) * sample_every
        out_u, out_xi = _run_batch(model, u, xi, WRAP, dt, n_steps, sample_every)
        u, xi = out_u[-1], out_xi[-1]
        t_new = t0 + dt * sample_every * np.arange(1, out_u.shape[0])
        t_all.append(t_new)
        m_all.append(out_u[1:, 0, :].mean(axis=1))
        t0 += dt * n_steps
        lam, a1, a2, short = averages()
        if abs(a1 - a2) < conv_tol and not (short and adaptive and t0 < T_cap):
            return RotationResult(float(lam), float(M * lam), 1.0 / M, True,
                                  float(a1), float(a2), float(t0))
        if not adaptive or t0 >= T_cap:
            if adaptive:
                raise ConvergenceError(
                    "rotation number did not converge",
                    {"avg_half": a1, "avg_quarter": a2, "T": t0},
                )
            return RotationResult(float(lam), float(M * lam), 1.0 / M,
                                  False, float(a1), float(a2), float(t0))
        T_run = t0  # double the elapsed time


def _interp_at(t: np.ndarray, y: np.ndarray, t_q: float) -> float:
    return float(np.interp(t_q, t, y))


def _snap_window(w: float, period: float) -> float:
    if period <= 0.0 or period > w:
        return w
    return math.floor(w / period) * period
