import numpy as np
import pytest

import fkwaves as fk
from fkwaves import lattice, wave
from fkwaves.errors import (
    CoverageError,
    GateError,
    NoStationaryProfileError,
)
from conftest import constant_force


# ---------------------------------------------------------------------------
# residual
# ---------------------------------------------------------------------------

def interior(grid, model):
    """Mask of nodes farther than r* from either domain end."""
    pad = model.r_star + 1e-9
    return (grid.z >= grid.z_min + pad) & (grid.z <= grid.z_max - pad)


def test_residual_zero_on_zero_state(classical0):
    g = wave.make_grid(classical0, c=0.7)
    g.phi1[:] = 0.0
    g.phi2[:] = 0.0
    res1, res2 = wave.profile_residual(g, classical0)
    keep = interior(g, classical0)
    assert np.max(np.abs(res1[keep])) == 0.0
    assert np.max(np.abs(res2[keep])) == 0.0


def test_residual_zero_on_interior_zero(classical0):
    b = classical0.interior_zero()
    g = wave.make_grid(classical0, c=-0.4)
    g.phi1[:] = b
    g.phi2[:] = b
    res1, res2 = wave.profile_residual(g, classical0)
    keep = interior(g, classical0)
    assert np.max(np.abs(res1[keep])) < 1e-12
    assert np.max(np.abs(res2[keep])) < 1e-11


def test_grid_requires_node_at_zero():
    with pytest.raises(ValueError):
        wave.ProfileGrid(-1.05, 0.1, np.zeros(22), np.zeros(22), 0.0)


# ---------------------------------------------------------------------------
# Newton
# ---------------------------------------------------------------------------

def test_newton_self_consistent(cubic_newton, cubic25):
    res1, res2 = wave.profile_residual(cubic_newton.grid, cubic25)
    assert max(np.max(np.abs(res1)), np.max(np.abs(res2))) < 1e-9
    assert cubic_newton.residual_sup < 1e-9
    cubic_newton.validate(residual_tol=1e-9)


def test_newton_symmetric_cubic_velocity_zero():
    m = fk.make_model(fk.cubic_bistable(1, 1, 0.5), m0=0.05)
    sol = wave.solve_auto(m, h=0.1)
    assert abs(sol.c) <= 1e-6


def test_newton_cubic_sign_and_cross_method(cubic25, cubic_newton):
    # sign oracle: integral of f over (0,1) is kappa*(1-2b)/12 > 0 for b=1/4
    v = np.linspace(0.0, 1.0, 20001)
    quad = np.trapezoid(fk.eval_f(cubic25.nonlinearity, v), v)
    assert quad == pytest.approx((1 - 2 * 0.25) / 12.0, abs=1e-6)
    assert quad > 0.0
    assert cubic_newton.c > 0.0
    sol_pt = wave.solve_pseudotime(cubic25, wave.make_grid(cubic25, c=0.3))
    assert abs(sol_pt.c - cubic_newton.c) / abs(cubic_newton.c) < 1e-3


def test_newton_matches_lattice_velocity(classical02, front_run_02):
    _, traj, slope = front_run_02
    c_lat = -slope
    level = classical02.phase_level()
    cs = []
    for h in (0.02, 0.01):
        init = wave.extract_from_lattice(traj, c_lat, level, classical02, h=h)
        cs.append(wave.solve_newton(classical02, init).c)
    c_rich = 2.0 * cs[1] - cs[0]
    assert abs(c_rich - c_lat) / abs(c_lat) < 1e-3


def test_pseudotime_warm_restart_is_immediate(cubic25, cubic_newton):
    sol = wave.solve_pseudotime(cubic25, cubic_newton.grid)
    assert sol.iterations <= 2
    assert abs(sol.c - cubic_newton.c) < 1e-6


def test_pseudotime_symmetric_from_tanh(classical0):
    # symmetric force from a tanh guess: the freezing iteration settles on
    # the pinned front with velocity zero
    sol = wave.solve_pseudotime(classical0, wave.make_grid(classical0, h=0.1))
    assert abs(sol.c) < 1e-6
    assert sol.residual_sup <= 1e-8


def test_pseudotime_pinned_symmetric(classical0):
    # symmetric model relaxes toward the pinned front: c -> 0, then the
    # pipeline reroutes to the stationary solver
    sol = wave.solve_auto(classical0)
    assert sol.method == "stationary"
    assert sol.c == 0.0


# ---------------------------------------------------------------------------
# stationary
# ---------------------------------------------------------------------------

def test_stationary_symmetric(classical0):
    sol = wave.solve_stationary(classical0, wave.make_grid(classical0))
    assert sol.residual_sup <= 1e-8
    assert sol.grid.phi1[sol.grid.index0] == pytest.approx(0.5, abs=1e-9)
    assert np.array_equal(sol.grid.phi1, sol.grid.phi2)
    assert sol.monotone_defect >= -1e-8


def test_stationary_constant_input(classical0):
    g = wave.make_grid(classical0)
    g.phi1[:] = 0.0
    g.phi2[:] = 0.0
    sol = wave.solve_stationary(classical0, g)
    assert sol.residual_sup <= 1e-8
    # constant region survives; only the truncation seam deviates
    keep = sol.grid.z <= sol.grid.z_max - 10.0
    assert np.max(np.abs(sol.grid.phi1[keep])) < 1e-8


def test_stationary_depinned_rejected():
    m = fk.make_model(fk.classical_fk(0.4), m0=0.005)
    with pytest.raises(NoStationaryProfileError):
        wave.solve_stationary(m, wave.make_grid(m, level=0.5))


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------

def synthetic_wave_traj(c, M=200, n_t=400, width=2.0):
    """Exact sampled wave u_i(t) = phi1(i + c t - z0), xi = phi2."""
    a0 = 10.0

    def phi1(z):
        return 0.5 * (1.0 + np.tanh(z / width))

    def dphi1(z):
        return 0.5 / (width * np.cosh(z / width) ** 2)

    def phi2(z):
        return np.clip(phi1(z) + (c / a0) * dphi1(z), 0.0, 1.0)

    z0 = M // 2
    times = np.linspace(0.0, 40.0, n_t)
    i = np.arange(M)
    u = np.stack([phi1(i + c * t - z0) for t in times])
    xi = np.stack([phi2(i + c * t - z0) for t in times])
    traj = lattice.Trajectory(times, u, xi, lattice.FIXED)
    return traj, phi1, phi2, z0


def test_extract_recovers_synthetic_wave(classical02):
    c = -0.8
    traj, phi1, phi2, z0 = synthetic_wave_traj(c)
    g = wave.extract_from_lattice(traj, c, 0.5, classical02, half_width=12.0,
                                  h=0.1)
    ref1 = phi1(g.z)
    ref2 = phi2(g.z)
    keep = np.abs(g.z) <= 8.0
    h = 0.1
    assert np.max(np.abs(g.phi1[keep] - ref1[keep])) <= 2.0 * h ** 2
    assert np.max(np.abs(g.phi2[keep] - ref2[keep])) <= 2.0 * h ** 2


def test_extract_snaps_half_width_to_grid(classical02):
    # a half-width that is not a multiple of h must still put z=0 on a node
    traj, _, _, _ = synthetic_wave_traj(-0.8)
    g = wave.extract_from_lattice(traj, -0.8, 0.5, classical02,
                                  half_width=10.13, h=0.1)
    assert g.index0 >= 0
    assert abs(g.z[g.index0]) < 1e-12


def test_extract_requires_motion(classical02, front_run_02):
    _, traj, _ = front_run_02
    with pytest.raises(GateError):
        wave.extract_from_lattice(traj, 0.0, 0.9, classical02)


def test_extract_coverage_error(classical02):
    traj, _, _, _ = synthetic_wave_traj(-0.5, M=200, n_t=60)
    with pytest.raises(CoverageError):
        wave.extract_from_lattice(traj, -0.5, 0.5, classical02,
                                  half_width=150.0, h=0.1)


def test_extract_newton_pipeline(classical02, front_run_02, newton_sol_02):
    assert newton_sol_02.iterations <= 5
    assert newton_sol_02.residual_sup < 1e-10


# ---------------------------------------------------------------------------
# hull extrapolation
# ---------------------------------------------------------------------------

def test_hull_gate_needs_bistable():
    g0 = 0.3
    m = fk.make_model(constant_force(g0), m0=0.05, check=True)
    with pytest.raises(GateError):
        wave.hull_extrapolate(m, [16, 32, 64])


def test_hull_pinned_limit_zero(classical0):
    res = wave.hull_extrapolate(classical0, [8, 12, 16])
    assert abs(res.c_limit) < 1e-8
    assert all(abs(row["c_p"]) < 1e-8 for row in res.table)


def test_hull_matches_lattice(classical02, front_run_02):
    _, _, slope = front_run_02
    res = wave.hull_extrapolate(classical02, [16, 24, 32])
    assert abs(res.c_limit - (-slope)) / abs(slope) < 1e-2


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------

def test_continuation_single_value(cubic25, cubic_newton):
    out = wave.continue_in_parameter(cubic25, "b_param", [0.25], cubic_newton)
    assert len(out) == 1
    assert abs(out[0].c - cubic_newton.c) < 1e-8


def test_continuation_forward_backward(cubic25, cubic_newton):
    values = [0.25, 0.30, 0.35]
    fwd = wave.continue_in_parameter(cubic25, "b_param", values, cubic_newton)
    seed_b = fwd[-1]
    bwd = wave.continue_in_parameter(cubic25, "b_param", values[::-1], seed_b)
    for a, b in zip(fwd, bwd[::-1]):
        assert abs(a.c - b.c) < 1e-6
    # weaker asymmetry means slower front: |c| decreases toward b = 1/2
    speeds = [abs(s.c) for s in fwd]
    assert speeds[0] > speeds[1] > speeds[2]


def test_model_with_rejects_mismatched_parameter(cubic25):
    with pytest.raises(ValueError):
        wave.model_with(cubic25, "L", 0.1)


# ---------------------------------------------------------------------------
# solution invariants
# ---------------------------------------------------------------------------

def test_first_equation_identity(cubic_newton, cubic25, newton_sol_02,
                                 classical02):
    assert wave.first_equation_gap(cubic_newton, cubic25) <= 1e-9
    assert wave.first_equation_gap(newton_sol_02, classical02) <= 1e-9


def test_monotone_defect_and_limits(cubic_newton, newton_sol_02):
    for sol in (cubic_newton, newton_sol_02):
        assert sol.monotone_defect >= -1e-8
        assert wave.limits_ok(sol.grid, tol=1e-4)


def test_shared_limits(newton_sol_02):
    g = newton_sol_02.grid
    edge = max(2, g.K // 10)
    assert abs(g.phi1[0] - g.phi2[0]) < 1e-6
    assert abs(g.phi1[-1] - g.phi2[-1]) < 1e-6
    assert np.max(np.abs(g.phi1[:edge] - g.phi2[:edge])) < 1e-4


def test_gradient_bound(newton_sol_02, classical02):
    g = newton_sol_02.grid
    a0 = classical02.alpha0
    D1 = np.abs(np.diff(g.phi1)) / g.h
    bound = np.max(np.abs(a0 * (g.phi2 - g.phi1))) / abs(g.c) + 1e-6
    assert np.max(D1) <= bound * (1.0 + 1e-6)


def test_translation_gauge(cubic25):
    base = wave.make_grid(cubic25, c=0.3)
    sol_a = wave.solve_newton(cubic25, base, wave.PhaseCondition(0.25))
    sol_b = wave.solve_newton(cubic25, base, wave.PhaseCondition(0.6))
    assert abs(sol_a.phase_level - 0.25) < 1e-9
    assert abs(sol_b.phase_level - 0.6) < 1e-9
    _, d1, d2 = wave.align_profiles(sol_a, sol_b)
    assert max(d1, d2) <= 1e-3


def test_plateau_of_stationary(classical0):
    sol = wave.solve_stationary(classical0, wave.make_grid(classical0))
    g = sol.grid
    width = int(round(2.5 * classical0.r_star / g.h))
    left = g.phi2[:width]
    assert np.max(left) - np.min(left) < 1e-10
    assert np.max(np.abs(g.phi1[:width] - left[0])) < 1e-8
