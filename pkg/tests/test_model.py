import math

import numpy as np
import pytest

import fkwaves as fk
from fkwaves.errors import (
    AmbiguousRootError,
    DomainError,
    ExtensionError,
    NotBistableError,
)
from fkwaves.model import ModelParams, ShiftStencil

TWO_PI = 2.0 * math.pi


def f_classical(v, L):
    return -np.sin(TWO_PI * (v - L)) - math.sin(TWO_PI * L)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def test_eval_F_classical_values():
    nl = fk.classical_fk(0.0)
    assert fk.eval_F(nl, [0.0, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    assert fk.eval_F(nl, [0.25, 0.25, 0.25]) == pytest.approx(-1.0, abs=1e-15)


def test_eval_F_cubic_value():
    nl = fk.cubic_bistable(1.0, 1.0, 0.25)
    # 0.5 * 0.25 * 0.5
    assert fk.eval_F(nl, [0.5, 0.5, 0.5]) == pytest.approx(0.0625, abs=1e-15)


def test_eval_f_diagonal():
    assert fk.eval_f(fk.classical_fk(0.1), 0.0) == pytest.approx(0.0, abs=1e-15)
    assert fk.eval_f(fk.classical_fk(0.0), 0.5) == pytest.approx(0.0, abs=1e-12)
    assert fk.eval_f(fk.cubic_bistable(1, 1, 0.25), 0.25) == pytest.approx(0.0, abs=1e-15)


def test_eval_f_periodic_classical():
    nl = fk.classical_fk(0.13)
    v = np.linspace(-1.0, 2.0, 301)
    assert np.allclose(fk.eval_f(nl, v + 1.0), fk.eval_f(nl, v), atol=1e-12)


def test_custom_box_domain_error():
    nl = fk.custom_tabulated(lambda X: X[0] * 0.0)
    with pytest.raises(DomainError):
        fk.eval_F(nl, [1.5, 0.0, 0.0])
    # clamped extension evaluates fine
    nlc = fk.custom_tabulated(lambda X: X[0] * 0.0, clamp_extension=True)
    assert fk.eval_F(nlc, [1.5, 0.0, 0.0]) == 0.0


# ---------------------------------------------------------------------------
# interior zero of f
# ---------------------------------------------------------------------------

def bisect_zero(fn, lo, hi, tol=1e-14):
    flo = fn(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if abs(hi - lo) < tol:
            break
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_interior_zero_symmetric():
    assert fk.find_interior_zero(fk.classical_fk(0.0)) == pytest.approx(0.5, abs=1e-10)


def test_interior_zero_shifted():
    # independent bisection oracle on f_L; analytically b = 1/2 + 2L
    L = 0.1
    oracle = bisect_zero(lambda v: f_classical(v, L), 0.4, 0.9)
    b = fk.find_interior_zero(fk.classical_fk(L))
    assert b == pytest.approx(oracle, abs=1e-9)
    assert b == pytest.approx(0.5 + 2 * L, abs=1e-9)


def test_interior_zero_cubic_constructed():
    assert fk.find_interior_zero(fk.cubic_bistable(1, 1, 0.25)) == pytest.approx(
        0.25, abs=1e-10)


def test_interior_zero_bracketing():
    nl = fk.classical_fk(0.1)
    b = fk.find_interior_zero(nl, tol=1e-12)
    eps = 1e-11
    assert fk.eval_f(nl, b - eps) < 0.0
    assert fk.eval_f(nl, b + eps) > 0.0


def test_interior_zero_errors():
    flat = fk.custom_tabulated(lambda X: np.full(X.shape[1:], 0.3),
                               periodic_form=True)
    with pytest.raises(NotBistableError):
        fk.find_interior_zero(flat)
    wavy = fk.custom_tabulated(lambda X: -np.sin(4 * np.pi * X[0]),
                               periodic_form=True)
    with pytest.raises(AmbiguousRootError):
        fk.find_interior_zero(wavy)


# ---------------------------------------------------------------------------
# assumption scan
# ---------------------------------------------------------------------------

def grid_min_monV0(nl, alpha0, n=20001):
    """Oracle: dense 1-D scan of 2 dF/dX0 + alpha0 along the X0 axis."""
    v = np.linspace(0.0, 1.0, n)
    h = 1e-6
    X = np.stack([v, np.full_like(v, 0.3), np.full_like(v, 0.7)])
    Xp, Xm = X.copy(), X.copy()
    Xp[0] += h
    Xm[0] -= h
    from fkwaves.model import eval_F_stack
    d0 = (eval_F_stack(nl, Xp) - eval_F_stack(nl, Xm)) / (2 * h)
    return float(np.min(2.0 * d0 + alpha0))


def test_margin_against_grid_oracle():
    nl = fk.classical_fk(0.0)
    params = ModelParams(m0=0.005)
    rep = fk.check_assumptions(nl, params, grid_density=64)
    oracle = grid_min_monV0(nl, params.alpha0)
    analytic = params.alpha0 - (4.0 + 4.0 * math.pi)
    assert rep.monV0_margin == pytest.approx(oracle, abs=1e-5)
    assert rep.monV0_margin == pytest.approx(analytic, abs=1e-5)
    assert rep.gate_A


def test_margin_violation_flagged():
    rep = fk.check_assumptions(fk.classical_fk(0.0), ModelParams(m0=0.05),
                               grid_density=64)
    assert rep.monV0_margin < 0.0
    assert not rep.gate_A
    assert any("margin" in r for r in rep.gate_reasons())


def test_cubic_report():
    rep = fk.check_assumptions(fk.cubic_bistable(1, 1, 0.25),
                               ModelParams(m0=0.05), grid_density=64)
    assert rep.offdiag_monotone
    assert rep.sign_pattern_ok
    assert rep.monV0_margin > 0.0
    assert rep.b == pytest.approx(0.25, abs=1e-9)
    assert rep.fprime_b > 0.0
    assert rep.beta0 > 0.0


def test_classical_d_assumptions():
    rep = fk.check_assumptions(fk.classical_fk(0.2), ModelParams(m0=0.005),
                               grid_density=64)
    assert rep.dplus_strict and rep.dminus_strict
    assert rep.same_sign_shifts == "mixed"
    assert rep.gate_D


def test_grid_density_precondition():
    with pytest.raises(ValueError):
        fk.check_assumptions(fk.classical_fk(0.0), ModelParams(m0=0.005),
                             grid_density=8)


def test_margin_affine_in_alpha0():
    nl = fk.classical_fk(0.1)
    base = fk.check_assumptions(nl, ModelParams.from_alpha0(64.0),
                                grid_density=32).monV0_margin
    for delta in (1.0, 4.0, 32.0):
        shifted = fk.check_assumptions(
            nl, ModelParams.from_alpha0(64.0 + delta), grid_density=32
        ).monV0_margin
        assert abs((shifted - base) - delta) < 1e-12


# ---------------------------------------------------------------------------
# alpha*
# ---------------------------------------------------------------------------

def test_alpha_star_classical():
    a = fk.alpha_star(fk.classical_fk(0.0), grid_density=100000)
    assert 16.56 <= a <= 16.58
    assert a == pytest.approx(4.0 + 4.0 * math.pi, abs=1e-4)


def test_alpha_star_L_independent():
    vals = [fk.alpha_star(fk.classical_fk(L), grid_density=20001)
            for L in (0.0, 0.05, 0.1, 0.2)]
    assert all(16.56 <= v <= 16.58 for v in vals)


def test_alpha_star_cubic_oracle():
    d, kappa, b = 1.0, 1.0, 0.25
    v = np.linspace(0.0, 1.0, 200001)
    p_prime = -3.0 * v ** 2 + 2.0 * (1.0 + b) * v - b
    oracle = -2.0 * np.min(-2.0 * d + kappa * p_prime)
    a = fk.alpha_star(fk.cubic_bistable(d, kappa, b), grid_density=20001)
    assert a == pytest.approx(float(oracle), abs=1e-6)


def test_alpha_star_linear_coupling():
    lin = fk.custom_tabulated(lambda X: X[1] + X[2] - 2.0 * X[0],
                              periodic_form=True)
    assert fk.alpha_star(lin, grid_density=4096) == pytest.approx(4.0, abs=1e-9)


# ---------------------------------------------------------------------------
# extension validation
# ---------------------------------------------------------------------------

def test_validate_extension():
    assert fk.validate_extension(fk.classical_fk(0.2))
    assert not fk.validate_extension(fk.cubic_bistable(1, 1, 0.25))


def test_validate_extension_lemma_precondition():
    bad = fk.custom_tabulated(lambda X: X[0], clamp_extension=True)
    with pytest.raises(ExtensionError):
        fk.validate_extension(bad)


def test_validate_extension_box_only_reports_missing():
    box = fk.custom_tabulated(lambda X: 0.0 * X[0])
    assert fk.validate_extension(box) is False


def test_offdiag_monotone_probes():
    rng = np.random.default_rng(7)
    for nl in (fk.classical_fk(0.15), fk.cubic_bistable(2.0, 1.0, 0.4)):
        X = rng.uniform(0.05, 0.95, size=(3, 64))
        from fkwaves.model import eval_F_stack
        for i in (1, 2):
            Xp = X.copy()
            Xp[i] += 1e-6
            assert np.all(eval_F_stack(nl, Xp) - eval_F_stack(nl, X) >= -1e-12)


# ---------------------------------------------------------------------------
# parameters, stencils, reflection
# ---------------------------------------------------------------------------

def test_model_params():
    p = ModelParams(m0=0.005)
    assert p.alpha0 == 1.0 / (2.0 * 0.005)
    assert ModelParams.from_alpha0(100.0).m0 == pytest.approx(0.005)
    with pytest.raises(ValueError):
        ModelParams(m0=0.0)


def test_stencil_invariants():
    s = ShiftStencil((0.0, 1.0, -1.0))
    assert s.r_star == 1.0 and s.integer_only
    with pytest.raises(ValueError):
        ShiftStencil((1.0, 0.0))
    with pytest.raises(ValueError):
        ShiftStencil((0.0, 0.0))
    assert not ShiftStencil((0.0, 0.5)).integer_only


def test_reflected_models():
    rng = np.random.default_rng(5)
    X = rng.uniform(0.0, 1.0, size=(3, 32))
    from fkwaves.model import eval_F_stack

    m = fk.make_model(fk.cubic_bistable(1, 1, 0.25), m0=0.05)
    hat = fk.reflected_model(m)
    assert hat.nonlinearity.b_param == pytest.approx(0.75)
    assert np.allclose(eval_F_stack(hat.nonlinearity, X),
                       -eval_F_stack(m.nonlinearity, 1.0 - X), atol=1e-14)

    mc = fk.make_model(fk.classical_fk(0.2), m0=0.005)
    hatc = fk.reflected_model(mc)
    assert hatc.nonlinearity.L == pytest.approx(-0.2)
    assert np.allclose(eval_F_stack(hatc.nonlinearity, X),
                       -eval_F_stack(mc.nonlinearity, 1.0 - X), atol=1e-13)
    assert tuple(hatc.stencil.shifts) == (0.0, -1.0, 1.0)
