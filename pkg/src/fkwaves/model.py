"""Nonlinearities, shift stencils, physical parameters and assumption checks.

A model couples a nonlinearity F(X_0, ..., X_N) (X_0 is the on-site slot)
with a shift stencil r_0=0, r_1, ..., r_N and the relaxation rate
alpha0 = 1/(2*m0).  Before any solver runs, `check_assumptions` scans F
with finite differences and fills an AssumptionReport whose gates the
solvers consult.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    AmbiguousRootError,
    DomainError,
    ExtensionError,
    NotBistableError,
)

TWO_PI = 2.0 * math.pi

# Finite-difference step for diagnostic derivatives of F (F is assumed
# Lipschitz, not smooth, so derivatives are never load-bearing).
FD_STEP = 1.0e-6

CLASSICAL_FK = "classical_fk"
CUBIC_BISTABLE = "cubic_bistable"
CUSTOM_TABULATED = "custom_tabulated"


@dataclass(frozen=True)
class ModelParams:
    """Mass and driving-force parameters.  m0 is the source of truth."""

    m0: float
    L: float = 0.0

    def __post_init__(self):
        if not (self.m0 > 0.0 and math.isfinite(self.m0)):
            raise ValueError(f"m0 must be a positive finite real, got {self.m0}")

    @property
    def alpha0(self) -> float:
        return 1.0 / (2.0 * self.m0)

    @staticmethod
    def from_alpha0(alpha0: float, L: float = 0.0) -> "ModelParams":
        return ModelParams(m0=1.0 / (2.0 * alpha0), L=L)


@dataclass(frozen=True)
class ShiftStencil:
    """Ordered shifts r_0..r_N with r_0 = 0 (the on-site argument)."""

    shifts: tuple

    def __post_init__(self):
        shifts = tuple(float(r) for r in self.shifts)
        object.__setattr__(self, "shifts", shifts)
        if len(shifts) < 2:
            raise ValueError("stencil needs at least one neighbor shift")
        if shifts[0] != 0.0:
            raise ValueError(f"r_0 must be 0, got {shifts[0]}")
        if self.r_star <= 0.0:
            raise ValueError("max |r_i| must be positive")

    @property
    def r_star(self) -> float:
        return max(abs(r) for r in self.shifts)

    @property
    def integer_only(self) -> bool:
        return all(float(r).is_integer() for r in self.shifts)

    @property
    def n_args(self) -> int:
        return len(self.shifts)


NEAREST_NEIGHBOR = ShiftStencil((0.0, 1.0, -1.0))


@dataclass(frozen=True)
class Nonlinearity:
    """Evaluation rule for F on [0,1]^(N+1) (builtins extend to all of R^(N+1)).

    kind is one of classical_fk | cubic_bistable | custom_tabulated.
    Custom rules receive a stacked array X of shape (n_args, ...) and must
    evaluate elementwise over the trailing axes.
    """

    kind: str
    L: float = 0.0
    d: float = 1.0
    kappa: float = 1.0
    b_param: float = 0.25
    func: Optional[Callable] = None
    n_args: int = 3
    periodic_form: bool = False
    clamp_extension: bool = False

    def __post_init__(self):
        if self.kind not in (CLASSICAL_FK, CUBIC_BISTABLE, CUSTOM_TABULATED):
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == CUSTOM_TABULATED and self.func is None:
            raise ValueError("custom_tabulated requires an evaluation rule")
        if self.kind == CUBIC_BISTABLE:
            if not (self.d > 0 and self.kappa > 0 and 0.0 < self.b_param < 1.0):
                raise ValueError("cubic_bistable needs d > 0, kappa > 0, b in (0,1)")

    @property
    def is_builtin(self) -> bool:
        return self.kind in (CLASSICAL_FK, CUBIC_BISTABLE)

    @property
    def whole_line(self) -> bool:
        """True if F is evaluable on all of R^(N+1)."""
        return self.is_builtin or self.periodic_form or self.clamp_extension


def classical_fk(L: float = 0.0) -> Nonlinearity:
    return Nonlinearity(kind=CLASSICAL_FK, L=float(L))


def cubic_bistable(d: float = 1.0, kappa: float = 1.0, b_param: float = 0.25) -> Nonlinearity:
    return Nonlinearity(kind=CUBIC_BISTABLE, d=float(d), kappa=float(kappa), b_param=float(b_param))


def custom_tabulated(func: Callable, n_args: int = 3, periodic_form: bool = False,
                     clamp_extension: bool = False) -> Nonlinearity:
    return Nonlinearity(
        kind=CUSTOM_TABULATED,
        func=func,
        n_args=int(n_args),
        periodic_form=periodic_form,
        clamp_extension=clamp_extension,
    )


def default_stencil(nl: Nonlinearity) -> ShiftStencil:
    if nl.is_builtin:
        return NEAREST_NEIGHBOR
    if nl.n_args == 3:
        return NEAREST_NEIGHBOR
    raise ValueError("custom nonlinearity with n_args != 3 needs an explicit stencil")


def eval_F_stack(nl: Nonlinearity, X: np.ndarray) -> np.ndarray:
    """Evaluate F on stacked arguments X of shape (n_args, ...)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] != n_args_of(nl):
        raise ValueError(f"expected {n_args_of(nl)} arguments, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite argument passed to F")
    if nl.kind == CLASSICAL_FK:
        x0, x1, x2 = X[0], X[1], X[2]
        return x1 + x2 - 2.0 * x0 - np.sin(TWO_PI * (x0 - nl.L)) - math.sin(TWO_PI * nl.L)
    if nl.kind == CUBIC_BISTABLE:
        x0, x1, x2 = X[0], X[1], X[2]
        return nl.d * (x1 + x2 - 2.0 * x0) + nl.kappa * x0 * (x0 - nl.b_param) * (1.0 - x0)
    if nl.clamp_extension:
        X = np.clip(X, 0.0, 1.0)
    elif not nl.periodic_form:
        if np.any(X < -1e-12) or np.any(X > 1.0 + 1e-12):
            raise DomainError(
                "custom nonlinearity evaluated outside [0,1]^(N+1) without an extension"
            )
    out = np.asarray(nl.func(X), dtype=float)
    if out.shape != X.shape[1:]:
        raise ValueError("custom rule must evaluate elementwise over trailing axes")
    return out


def n_args_of(nl: Nonlinearity) -> int:
    return 3 if nl.is_builtin else nl.n_args


def eval_F(nl: Nonlinearity, X: Sequence[float]) -> float:
    """F at a single argument vector of length N+1."""
    X = np.asarray(X, dtype=float).reshape(-1, 1)
    return float(eval_F_stack(nl, X)[0])


def eval_f(nl: Nonlinearity, v) -> float:
    """Diagonal restriction f(v) = F(v, ..., v)."""
    v = np.asarray(v, dtype=float)
    X = np.broadcast_to(v, (n_args_of(nl),) + v.shape).copy()
    out = eval_F_stack(nl, X)
    return float(out) if v.ndim == 0 else out


def _dF(nl: Nonlinearity, X: np.ndarray, i: int) -> np.ndarray:
    """Centered finite-difference derivative of F in slot i, stacked args."""
    h = FD_STEP * np.maximum(1.0, np.abs(X[i]))
    Xp = X.copy()
    Xm = X.copy()
    Xp[i] = X[i] + h
    Xm[i] = X[i] - h
    if nl.kind == CUSTOM_TABULATED and not nl.whole_line:
        # keep probes inside the box
        Xp[i] = np.minimum(Xp[i], 1.0)
        Xm[i] = np.maximum(Xm[i], 0.0)
        return (eval_F_stack(nl, Xp) - eval_F_stack(nl, Xm)) / (Xp[i] - Xm[i])
    return (eval_F_stack(nl, Xp) - eval_F_stack(nl, Xm)) / (2.0 * h)


def _scan_points(nl: Nonlinearity, grid_density: int) -> np.ndarray:
    """Sample points for derivative scans: dense along X_0, coarse elsewhere.

    Returns stacked coordinates of shape (n_args, n_points).
    """
    n = n_args_of(nl)
    x0 = np.linspace(0.0, 1.0, grid_density)
    if n - 1 <= 2:
        coarse = np.linspace(0.0, 1.0, 5)
        rest = np.meshgrid(*([coarse] * (n - 1)), indexing="ij")
        rest = np.stack([r.ravel() for r in rest]) if n > 1 else np.zeros((0, 1))
    else:
        rng = np.random.default_rng(12345)
        rest = rng.random((n - 1, 64))
    n_rest = rest.shape[1]
    pts = np.empty((n, grid_density * n_rest))
    pts[0] = np.repeat(x0, n_rest)
    pts[1:] = np.tile(rest, grid_density)
    return pts


def find_interior_zero(nl: Nonlinearity, tol: float = 1e-12) -> float:
    """Interior zero b of f with the bistable sign pattern.

    Brackets a single sign change of f in (0,1) on a dense scan, bisects it
    to `tol`, and verifies f'(b) > 0 by centered difference.
    """
    n_scan = 4097
    v = np.linspace(0.0, 1.0, n_scan)[1:-1]
    fv = eval_f(nl, v)
    sign = np.sign(np.where(np.abs(fv) < 1e-13, 0.0, fv))
    nz = sign != 0
    vs, ss = v[nz], sign[nz]
    flips = np.nonzero(ss[1:] * ss[:-1] < 0)[0]
    if len(flips) == 0:
        raise NotBistableError("f has no interior sign change in (0,1)")
    if len(flips) > 1:
        raise AmbiguousRootError(
            f"f has {len(flips)} interior sign changes; zero of f is ambiguous"
        )
    lo, hi = vs[flips[0]], vs[flips[0] + 1]
    flo = eval_f(nl, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = eval_f(nl, mid)
        if abs(fm) <= tol or (hi - lo) < 1e-16:
            break
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    b = 0.5 * (lo + hi)
    if not (0.0 < b < 1.0):
        raise NotBistableError(f"root {b} not interior")
    slope = (eval_f(nl, min(b + FD_STEP, 1.0)) - eval_f(nl, max(b - FD_STEP, 0.0))) / (
        min(b + FD_STEP, 1.0) - max(b - FD_STEP, 0.0)
    )
    if slope <= 0.0:
        raise NotBistableError(f"f'(b) = {slope:.3g} <= 0 at b = {b:.6g}")
    return b


def alpha_star(nl: Nonlinearity, grid_density: int = 65536) -> float:
    """Smallest alpha0 with a positive on-site monotonicity margin.

    alpha_star = -2 * min over samples of dF/dX_0; a nonpositive value
    means any alpha0 > 0 works.
    """
    pts = _scan_points(nl, grid_density)
    d0 = _dF(nl, pts, 0)
    return float(-2.0 * np.min(d0))


def _beta0_search(nl: Nonlinearity, b: Optional[float]) -> float:
    """Largest beta with f strictly decreasing on [0,beta] and [1-beta,1].

    Bisection to 1e-4 resolution, monotonicity tested on a 33-point
    diagonal grid (inverse monotonicity is only needed near the corners).
    """

    def ok(beta: float) -> bool:
        if beta <= 0.0:
            return False
        for lo, hi in ((0.0, beta), (1.0 - beta, 1.0)):
            vv = np.linspace(lo, hi, 33)
            fv = eval_f(nl, vv)
            if not np.all(np.diff(fv) < 0.0):
                return False
        return True

    cap = 0.5 if b is None else min(b, 1.0 - b)
    if ok(cap):
        return cap
    lo_b, hi_b = 0.0, cap
    while hi_b - lo_b > 1e-4:
        mid = 0.5 * (lo_b + hi_b)
        if ok(mid):
            lo_b = mid
        else:
            hi_b = mid
    return lo_b


@dataclass(frozen=True)
class AssumptionReport:
    """Numerical scan of the structural assumptions on (F, r, alpha0)."""

    lipschitz_constant: float
    offdiag_monotone: bool
    monV0_margin: float
    b: float
    fprime_b: float
    sign_pattern_ok: bool
    beta0: float
    dplus_strict: bool
    dminus_strict: bool
    same_sign_shifts: str  # all_nonpositive | all_nonnegative | mixed
    alpha0: float = 0.0

    @property
    def gate_A(self) -> bool:
        return self.offdiag_monotone and self.monV0_margin > 0.0

    @property
    def gate_B(self) -> bool:
        return self.sign_pattern_ok and self.fprime_b > 0.0

    @property
    def gate_C(self) -> bool:
        return self.beta0 > 0.0

    @property
    def gate_D(self) -> bool:
        return (
            self.dplus_strict
            or self.dminus_strict
            or self.same_sign_shifts != "mixed"
        )

    def gate_reasons(self) -> list:
        reasons = []
        if not self.offdiag_monotone:
            reasons.append("off-diagonal monotonicity fails")
        if self.monV0_margin <= 0.0:
            reasons.append(
                f"on-site margin 2*dF/dX0 + alpha0 = {self.monV0_margin:.4g} <= 0"
            )
        if not self.sign_pattern_ok:
            reasons.append("bistable sign pattern of f fails")
        if self.beta0 <= 0.0:
            reasons.append("no inverse-monotonicity margin near the corners")
        if not self.gate_D:
            reasons.append("neither same-sign shifts nor strict neighbor monotonicity")
        return reasons


def check_assumptions(
    nl: Nonlinearity,
    params: ModelParams,
    grid_density: int = 64,
    stencil: Optional[ShiftStencil] = None,
) -> AssumptionReport:
    """Scan F on a sample grid and fill every AssumptionReport field."""
    if grid_density < 16:
        raise ValueError("grid_density must be >= 16 for the on-site margin scan")
    stencil = stencil or default_stencil(nl)
    pts = _scan_points(nl, grid_density)
    n = n_args_of(nl)

    derivs = np.stack([_dF(nl, pts, i) for i in range(n)])
    if not np.all(np.isfinite(derivs)):
        raise ValueError("non-finite F values during assumption scan")

    lipschitz = float(np.max(np.sum(np.abs(derivs), axis=0)))
    offdiag_ok = bool(np.all(derivs[1:] >= -1e-9)) if n > 1 else True
    margin = float(np.min(2.0 * derivs[0] + params.alpha0))

    try:
        b = find_interior_zero(nl)
        fprime_b = float(
            (eval_f(nl, b + FD_STEP) - eval_f(nl, b - FD_STEP)) / (2.0 * FD_STEP)
        )
        vv = np.linspace(0.0, 1.0, 2049)
        fv = eval_f(nl, vv)
        left = (vv > 1e-3) & (vv < b - 1e-3)
        right = (vv > b + 1e-3) & (vv < 1.0 - 1e-3)
        sign_ok = (
            abs(eval_f(nl, 0.0)) <= 1e-10
            and abs(eval_f(nl, 1.0)) <= 1e-10
            and np.all(fv[left] < 0.0)
            and np.all(fv[right] > 0.0)
        )
    except (NotBistableError, AmbiguousRootError):
        b, fprime_b, sign_ok = math.nan, math.nan, False

    beta0 = _beta0_search(nl, None if math.isnan(b) else b)

    shifts = np.array(stencil.shifts)
    strict_margin = 1e-8
    dplus = any(
        r > 0 and np.min(derivs[i]) > strict_margin
        for i, r in enumerate(shifts)
    )
    dminus = any(
        r < 0 and np.min(derivs[i]) > strict_margin
        for i, r in enumerate(shifts)
    )
    if np.all(shifts <= 0.0):
        same_sign = "all_nonpositive"
    elif np.all(shifts >= 0.0):
        same_sign = "all_nonnegative"
    else:
        same_sign = "mixed"

    return AssumptionReport(
        lipschitz_constant=lipschitz,
        offdiag_monotone=offdiag_ok,
        monV0_margin=margin,
        b=b,
        fprime_b=fprime_b,
        sign_pattern_ok=bool(sign_ok),
        beta0=beta0,
        dplus_strict=bool(dplus),
        dminus_strict=bool(dminus),
        same_sign_shifts=same_sign,
        alpha0=params.alpha0,
    )


def validate_extension(nl: Nonlinearity, samples: int = 256, tol: float = 1e-9,
                       seed: int = 0) -> bool:
    """Check the whole-line extension: diagonal 1-periodicity and
    off-diagonal monotonicity at random probes in [-2,2]^(N+1).

    Raises ExtensionError when F(0,...,0) != F(1,...,1) (no extension can
    exist); returns False when evaluation outside the box is impossible or
    periodicity fails.
    """
    n = n_args_of(nl)
    f0 = eval_F(nl, [0.0] * n)
    f1 = eval_F(nl, [1.0] * n)
    if abs(f1 - f0) > 1e-10:
        raise ExtensionError(
            f"F(1,...,1) - F(0,...,0) = {f1 - f0:.3g} != 0; no periodic extension exists"
        )
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n, samples))
    try:
        gap = np.abs(eval_F_stack(nl, X + 1.0) - eval_F_stack(nl, X))
        if np.max(gap) > tol:
            return False
        for i in range(1, n):
            if np.min(_dF(nl, X, i)) < -1e-9:
                return False
    except DomainError:
        return False
    return True


@dataclass(frozen=True)
class ModelDescriptor:
    """Bundle of nonlinearity, stencil, parameters and assumption report."""

    nonlinearity: Nonlinearity
    stencil: ShiftStencil
    params: ModelParams
    report: Optional[AssumptionReport] = field(default=None, compare=False)

    @property
    def alpha0(self) -> float:
        return self.params.alpha0

    @property
    def r_star(self) -> float:
        return self.stencil.r_star

    def checked(self, grid_density: int = 64) -> "ModelDescriptor":
        report = check_assumptions(
            self.nonlinearity, self.params, grid_density, self.stencil
        )
        return ModelDescriptor(self.nonlinearity, self.stencil, self.params, report)

    def interior_zero(self) -> float:
        if self.report is not None and not math.isnan(self.report.b):
            return self.report.b
        return find_interior_zero(self.nonlinearity)

    def phase_level(self) -> float:
        """Default front normalization level: b, or 0.5 when f has no
        interior zero (swept parameters can leave the bistable range)."""
        try:
            return self.interior_zero()
        except (NotBistableError, AmbiguousRootError):
            return 0.5


def make_model(
    nl: Nonlinearity,
    m0: float,
    stencil: Optional[ShiftStencil] = None,
    check: bool = True,
    grid_density: int = 64,
) -> ModelDescriptor:
    params = ModelParams(m0=m0, L=nl.L)
    stencil = stencil or default_stencil(nl)
    desc = ModelDescriptor(nl, stencil, params)
    return desc.checked(grid_density) if check else desc


def reflected_model(model: ModelDescriptor, check: bool = True) -> ModelDescriptor:
    """Dual model F^(X) = -F(1-X) with reversed stencil.

    Wave solutions map to reflected waves with opposite velocity; the
    interior zero moves to 1 - b.
    """
    nl = model.nonlinearity
    if nl.kind == CLASSICAL_FK:
        hat = classical_fk(L=-nl.L)
    elif nl.kind == CUBIC_BISTABLE:
        hat = cubic_bistable(d=nl.d, kappa=nl.kappa, b_param=1.0 - nl.b_param)
    else:
        base = nl.func

        def hat_func(X, _base=base):
            return -np.asarray(_base(1.0 - np.asarray(X)), dtype=float)

        hat = custom_tabulated(
            hat_func,
            n_args=nl.n_args,
            periodic_form=nl.periodic_form,
            clamp_extension=nl.clamp_extension,
        )
    rev = ShiftStencil(tuple(-r for r in model.stencil.shifts))
    desc = ModelDescriptor(hat, rev, model.params)
    return desc.checked() if check else desc
