"""Hot numeric kernels: lattice RK4 stepping and profile residuals.

Every kernel exists twice: a numba @njit version and a pure-numpy version
with identical semantics.  `backend.use_numba()` (driven by the
FKWAVES_BACKEND environment variable) picks the path at call time; the
benchmark in benchmarks/bench_backends.py times both.

Kernels only see scalars and arrays.  The built-in nonlinearities are
encoded as (kind, p0, p1, p2):

    kind 0: coupling (x1 + x2 - 2 x0) + local -sin(2pi(x0 - p0)) - sin(2pi p0)
    kind 1: coupling p0*(x1 + x2 - 2 x0) + local p1*x0*(x0 - p2)*(1 - x0)

Custom nonlinearities never reach this module; the callers keep a generic
numpy path for them.
"""

import math

import numpy as np

from .backend import use_numba

KIND_CLASSICAL = 0
KIND_CUBIC = 1

BC_FIXED = 0
BC_HELICAL = 1


def builtin_params(nl):
    """(kind, p0, p1, p2) for a builtin nonlinearity, or None for custom."""
    if nl.kind == "classical_fk":
        return (KIND_CLASSICAL, nl.L, 0.0, 0.0)
    if nl.kind == "cubic_bistable":
        return (KIND_CUBIC, nl.d, nl.kappa, nl.b_param)
    return None


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _local_np(v, kind, p0, p1, p2):
    if kind == KIND_CLASSICAL:
        return -np.sin(2.0 * np.pi * (v - p0)) - math.sin(2.0 * np.pi * p0)
    return p1 * v * (v - p2) * (1.0 - v)


def _coupling_coeff(kind, p0):
    return 1.0 if kind == KIND_CLASSICAL else p0


def _laplacian_np(u, bc):
    """u[i+1] + u[i-1] - 2 u[i] on a (B, M) batch under the boundary rule."""
    lap = -2.0 * u
    lap[:, :-1] += u[:, 1:]
    lap[:, 1:] += u[:, :-1]
    if bc == BC_FIXED:
        lap[:, -1] += 1.0          # right ghost value 1
        # left ghost value 0 adds nothing
    else:
        lap[:, -1] += u[:, 0] + 1.0
        lap[:, 0] += u[:, -1] - 1.0
    return lap


def _rhs_np(u, xi, kind, p0, p1, p2, alpha0, bc):
    cpl = _coupling_coeff(kind, p0)
    F = cpl * _laplacian_np(u, bc) + _local_np(u, kind, p0, p1, p2)
    du = alpha0 * (xi - u)
    dxi = 2.0 * F + alpha0 * (u - xi)
    return du, dxi


def rk4_run_numpy(u, xi, kind, p0, p1, p2, alpha0, bc, dt, n_steps, sample_every):
    """Integrate the (u, xi) system; returns sampled states (S, B, M).

    Sample 0 is the initial state; one more sample lands after every
    `sample_every` steps (n_steps must be a multiple of sample_every).
    """
    u = u.copy()
    xi = xi.copy()
    n_samples = n_steps // sample_every + 1
    B, M = u.shape
    out_u = np.empty((n_samples, B, M))
    out_xi = np.empty((n_samples, B, M))
    out_u[0], out_xi[0] = u, xi
    s = 1
    for step in range(1, n_steps + 1):
        k1u, k1x = _rhs_np(u, xi, kind, p0, p1, p2, alpha0, bc)
        k2u, k2x = _rhs_np(u + 0.5 * dt * k1u, xi + 0.5 * dt * k1x,
                           kind, p0, p1, p2, alpha0, bc)
        k3u, k3x = _rhs_np(u + 0.5 * dt * k2u, xi + 0.5 * dt * k2x,
                           kind, p0, p1, p2, alpha0, bc)
        k4u, k4x = _rhs_np(u + dt * k3u, xi + dt * k3x,
                           kind, p0, p1, p2, alpha0, bc)
        u = u + (dt / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        xi = xi + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        if step % sample_every == 0:
            out_u[s], out_xi[s] = u, xi
            s += 1
    return out_u, out_xi


def _ghost_np(phi, idx, K):
    """Clamped profile lookup: 0 below the grid, 1 above."""
    vals = np.where(idx < 0, 0.0, np.where(idx >= K, 1.0, phi[np.clip(idx, 0, K - 1)]))
    return vals


def profile_F_numpy(phi1, offs, wts, kind, p0, p1, p2):
    """Builtin F at every node, shifted arguments by (offset, weight) pairs."""
    K = phi1.shape[0]
    base = np.arange(K)
    args = []
    for off, w in zip(offs, wts):
        lo = _ghost_np(phi1, base + off, K)
        if w == 0.0:
            args.append(lo)
        else:
            hi = _ghost_np(phi1, base + off + 1, K)
            args.append((1.0 - w) * lo + w * hi)
    x0, x1, x2 = args
    cpl = _coupling_coeff(kind, p0)
    return cpl * (x1 + x2 - 2.0 * x0) + _local_np(x0, kind, p0, p1, p2)


def _upwind_np(phi, c, h, left_ghost, right_ghost):
    K = phi.shape[0]
    D = np.empty(K)
    if c > 1e-8:
        D[0] = (phi[0] - left_ghost) / h
        D[1:] = (phi[1:] - phi[:-1]) / h
    elif c < -1e-8:
        D[-1] = (right_ghost - phi[-1]) / h
        D[:-1] = (phi[1:] - phi[:-1]) / h
    else:
        D[0] = (phi[1] - left_ghost) / (2.0 * h)
        D[-1] = (right_ghost - phi[-2]) / (2.0 * h)
        D[1:-1] = (phi[2:] - phi[:-2]) / (2.0 * h)
    return D


def profile_residual_numpy(phi1, phi2, c, alpha0, h, offs, wts, kind, p0, p1, p2):
    F = profile_F_numpy(phi1, offs, wts, kind, p0, p1, p2)
    D1 = _upwind_np(phi1, c, h, 0.0, 1.0)
    D2 = _upwind_np(phi2, c, h, 0.0, 1.0)
    res1 = c * D1 - alpha0 * (phi2 - phi1)
    res2 = c * D2 - 2.0 * F - alpha0 * (phi1 - phi2)
    return res1, res2


def stationary_sweep_numpy(phi, offs, wts, kind, p0, p1, p2, omega, n_iter):
    """Damped fixed-point sweeps phi <- clamp(phi + omega*2F), kept monotone."""
    phi = phi.copy()
    for _ in range(n_iter):
        F = profile_F_numpy(phi, offs, wts, kind, p0, p1, p2)
        phi = np.clip(phi + omega * 2.0 * F, 0.0, 1.0)
        np.maximum.accumulate(phi, out=phi)
    return phi


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if use_numba():
    from numba import njit

    @njit(cache=True, inline="always")
    def _local_nb(v, kind, p0, p1, p2):
        if kind == KIND_CLASSICAL:
            return -math.sin(2.0 * math.pi * (v - p0)) - math.sin(2.0 * math.pi * p0)
        return p1 * v * (v - p2) * (1.0 - v)

    @njit(cache=True, inline="always")
    def _rhs_at_nb(u, b, i, M, kind, p0, p1, p2, bc):
        if i + 1 < M:
            ur = u[b, i + 1]
        elif bc == BC_FIXED:
            ur = 1.0
        else:
            ur = u[b, 0] + 1.0
        if i - 1 >= 0:
            ul = u[b, i - 1]
        elif bc == BC_FIXED:
            ul = 0.0
        else:
            ul = u[b, M - 1] - 1.0
        cpl = 1.0 if kind == KIND_CLASSICAL else p0
        return cpl * (ur + ul - 2.0 * u[b, i]) + _local_nb(u[b, i], kind, p0, p1, p2)

    @njit(cache=True)
    def _rhs_nb(u, xi, kind, p0, p1, p2, alpha0, bc, du, dxi):
        B, M = u.shape
        for b in range(B):
            for i in range(M):
                F = _rhs_at_nb(u, b, i, M, kind, p0, p1, p2, bc)
                du[b, i] = alpha0 * (xi[b, i] - u[b, i])
                dxi[b, i] = 2.0 * F + alpha0 * (u[b, i] - xi[b, i])

    @njit(cache=True)
    def rk4_run_numba(u0, xi0, kind, p0, p1, p2, alpha0, bc, dt, n_steps, sample_every):
        B, M = u0.shape
        n_samples = n_steps // sample_every + 1
        out_u = np.empty((n_samples, B, M))
        out_xi = np.empty((n_samples, B, M))
        u = u0.copy()
        xi = xi0.copy()
        out_u[0] = u
        out_xi[0] = xi
        k1u = np.empty((B, M)); k1x = np.empty((B, M))
        k2u = np.empty((B, M)); k2x = np.empty((B, M))
        k3u = np.empty((B, M)); k3x = np.empty((B, M))
        k4u = np.empty((B, M)); k4x = np.empty((B, M))
        tu = np.empty((B, M)); tx = np.empty((B, M))
        s = 1
        for step in range(1, n_steps + 1):
            _rhs_nb(u, xi, kind, p0, p1, p2, alpha0, bc, k1u, k1x)
            for b in range(B):
                for i in range(M):
                    tu[b, i] = u[b, i] + 0.5 * dt * k1u[b, i]
                    tx[b, i] = xi[b, i] + 0.5 * dt * k1x[b, i]
            _rhs_nb(tu, tx, kind, p0, p1, p2, alpha0, bc, k2u, k2x)
            for b in range(B):
                for i in range(M):
                    tu[b, i] = u[b, i] + 0.5 * dt * k2u[b, i]
                    tx[b, i] = xi[b, i] + 0.5 * dt * k2x[b, i]
            _rhs_nb(tu, tx, kind, p0, p1, p2, alpha0, bc, k3u, k3x)
            for b in range(B):
                for i in range(M):
                    tu[b, i] = u[b, i] + dt * k3u[b, i]
                    tx[b, i] = xi[b, i] + dt * k3x[b, i]
            _rhs_nb(tu, tx, kind, p0, p1, p2, alpha0, bc, k4u, k4x)
            for b in range(B):
                for i in range(M):
                    u[b, i] = u[b, i] + (dt / 6.0) * (
                        k1u[b, i] + 2.0 * k2u[b, i] + 2.0 * k3u[b, i] + k4u[b, i])
                    xi[b, i] = xi[b, i] + (dt / 6.0) * (
                        k1x[b, i] + 2.0 * k2x[b, i] + 2.0 * k3x[b, i] + k4x[b, i])
            if step % sample_every == 0:
                out_u[s] = u
                out_xi[s] = xi
                s += 1
        return out_u, out_xi

    @njit(cache=True, inline="always")
    def _ghost_nb(phi, idx, K):
        if idx < 0:
            return 0.0
        if idx >= K:
            return 1.0
        return phi[idx]

    @njit(cache=True)
    def profile_F_numba(phi1, offs, wts, kind, p0, p1, p2, out):
        K = phi1.shape[0]
        cpl = 1.0 if kind == KIND_CLASSICAL else p0
        for k in range(K):
            x = np.empty(3)
            for j in range(3):
                lo = _ghost_nb(phi1, k + offs[j], K)
                if wts[j] == 0.0:
                    x[j] = lo
                else:
                    hi = _ghost_nb(phi1, k + offs[j] + 1, K)
                    x[j] = (1.0 - wts[j]) * lo + wts[j] * hi
            out[k] = cpl * (x[1] + x[2] - 2.0 * x[0]) + _local_nb(x[0], kind, p0, p1, p2)

    @njit(cache=True)
    def _upwind_nb(phi, c, h, lg, rg, out):
        K = phi.shape[0]
        if c > 1e-8:
            out[0] = (phi[0] - lg) / h
            for k in range(1, K):
                out[k] = (phi[k] - phi[k - 1]) / h
        elif c < -1e-8:
            out[K - 1] = (rg - phi[K - 1]) / h
            for k in range(K - 1):
                out[k] = (phi[k + 1] - phi[k]) / h
        else:
            out[0] = (phi[1] - lg) / (2.0 * h)
            out[K - 1] = (rg - phi[K - 2]) / (2.0 * h)
            for k in range(1, K - 1):
                out[k] = (phi[k + 1] - phi[k - 1]) / (2.0 * h)

    @njit(cache=True)
    def profile_residual_numba(phi1, phi2, c, alpha0, h, offs, wts, kind, p0, p1, p2):
        K = phi1.shape[0]
        F = np.empty(K)
        profile_F_numba(phi1, offs, wts, kind, p0, p1, p2, F)
        D1 = np.empty(K)
        D2 = np.empty(K)
        _upwind_nb(phi1, c, h, 0.0, 1.0, D1)
        _upwind_nb(phi2, c, h, 0.0, 1.0, D2)
        res1 = np.empty(K)
        res2 = np.empty(K)
        for k in range(K):
            res1[k] = c * D1[k] - alpha0 * (phi2[k] - phi1[k])
            res2[k] = c * D2[k] - 2.0 * F[k] - alpha0 * (phi1[k] - phi2[k])
        return res1, res2

    @njit(cache=True)
    def stationary_sweep_numba(phi0, offs, wts, kind, p0, p1, p2, omega, n_iter):
        K = phi0.shape[0]
        phi = phi0.copy()
        F = np.empty(K)
        for _ in range(n_iter):
            profile_F_numba(phi, offs, wts, kind, p0, p1, p2, F)
            for k in range(K):
                v = phi[k] + omega * 2.0 * F[k]
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                phi[k] = v
            for k in range(1, K):
                if phi[k] < phi[k - 1]:
                    phi[k] = phi[k - 1]
        return phi


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def rk4_run(u, xi, kind, p0, p1, p2, alpha0, bc, dt, n_steps, sample_every):
    if use_numba():
        return rk4_run_numba(u, xi, kind, p0, p1, p2, alpha0, bc,
                             dt, n_steps, sample_every)
    return rk4_run_numpy(u, xi, kind, p0, p1, p2, alpha0, bc,
                         dt, n_steps, sample_every)


def profile_residual(phi1, phi2, c, alpha0, h, offs, wts, kind, p0, p1, p2):
    if use_numba():
        return profile_residual_numba(phi1, phi2, c, alpha0, h,
                                      offs, wts, kind, p0, p1, p2)
    return profile_residual_numpy(phi1, phi2, c, alpha0, h,
                                  offs, wts, kind, p0, p1, p2)


def profile_F(phi1, offs, wts, kind, p0, p1, p2):
    if use_numba():
        out = np.empty(phi1.shape[0])
        profile_F_numba(phi1, offs, wts, kind, p0, p1, p2, out)
        return out
    return profile_F_numpy(phi1, offs, wts, kind, p0, p1, p2)


def stationary_sweep(phi, offs, wts, kind, p0, p1, p2, omega, n_iter):
    if use_numba():
        return stationary_sweep_numba(phi, offs, wts, kind, p0, p1, p2,
                                      omega, n_iter)
    return stationary_sweep_numpy(phi, offs, wts, kind, p0, p1, p2,
                                  omega, n_iter)
