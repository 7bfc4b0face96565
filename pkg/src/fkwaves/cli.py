"""Command-line front end.

Subcommands: check-model, simulate, wave, hull, sweep, verify.  All read a
JSON run-config (--config) and write bit-stable CSV/JSON files under --out.
Wall-clock columns are emitted as 0.0 unless --timings is given, so that
identical runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import lattice, verify, wave
from .config import RunConfig, build_model, load_config
from .errors import FkError
from .model import alpha_star, eval_f
from .output import write_csv, write_json

PINNING_THRESHOLD = lattice.PINNING_THRESHOLD


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fkwaves",
        description="Traveling-wave solvers for damped-inertial "
                    "Frenkel-Kontorova lattices",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run-config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--workers", type=int, default=None,
                       help="override sweep worker count")
        p.add_argument("--timings", action="store_true",
                       help="emit real wall times (breaks byte determinism)")
        if name == "simulate":
            p.add_argument("--dump-trajectory", action="store_true",
                           help="also write trajectory.csv (t,i,u,xi)")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = RunConfig(model=cfg.model, lattice=cfg.lattice,
                            wave=cfg.wave, sweep=cfg.sweep, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        return args.fn(cfg, args)
    except FkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _gate_or_fail(model, need_bistable=True):
    rep = model.report
    if not rep.gate_A:
        raise FkError("assumption gate failed: " + "; ".join(rep.gate_reasons()))
    if need_bistable and not rep.gate_B:
        raise FkError("assumption gate failed: bistable sign pattern of f")


def cmd_check_model(cfg: RunConfig, args) -> int:
    model = build_model(cfg)
    rep = model.report
    a_star = alpha_star(model.nonlinearity)
    ok = rep.alpha0 > a_star
    print(f"kind            : {model.nonlinearity.kind}")
    print(f"alpha0          : {rep.alpha0:.6g} "
          f"({'>' if ok else '<='} alpha*~{a_star:.6g}: {'OK' if ok else 'FAIL'})")
    print(f"monV0_margin    : {rep.monV0_margin:.6g}")
    print(f"lipschitz       : {rep.lipschitz_constant:.6g}")
    print(f"offdiag_monotone: {rep.offdiag_monotone}")
    b_txt = "nan" if math.isnan(rep.b) else f"{rep.b:.6g}"
    print(f"b               : {b_txt}  (f'(b) = "
          f"{'nan' if math.isnan(rep.fprime_b) else format(rep.fprime_b, '.6g')})")
    print(f"sign_pattern_ok : {rep.sign_pattern_ok}")
    print(f"beta0           : {rep.beta0:.6g}")
    print(f"shift signs     : {rep.same_sign_shifts} "
          f"(D+ strict: {rep.dplus_strict}, D- strict: {rep.dminus_strict})")
    gates = rep.gate_A and rep.gate_B
    print(f"gates           : {'pass' if gates else 'FAIL'}")
    if not gates:
        for reason in rep.gate_reasons():
            print(f"  - {reason}")
    return 0 if gates else 1


def cmd_simulate(cfg: RunConfig, args) -> int:
    model = build_model(cfg)
    _gate_or_fail(model)
    lb = cfg.lattice
    dt = lb.dt
    if dt is not None and dt > lattice.dt_max(model) * (1 + 1e-12):
        raise FkError(
            f"dt={dt} unstable for the explicit stepper: the stiffest rate is "
            f"2*alpha0, keep dt <= {lattice.dt_max(model):.6g}"
        )
    trace, traj = lattice.run_front(model, M=lb.M, T=lb.T, dt=dt,
                                    init_style=lb.init_style)
    slope, r2 = lattice.measure_velocity(trace)
    c = -slope  # level crossing drifts at -c in the z = i + c t frame
    write_csv(os.path.join(args.out, "trace.csv"), ("t", "position"),
              zip(trace.times.tolist(), trace.positions.tolist()))
    if getattr(args, "dump_trajectory", False):
        rows = []
        for s, t in enumerate(traj.times.tolist()):
            for i in range(traj.u.shape[1]):
                rows.append((t, i, float(traj.u[s, i]), float(traj.xi[s, i])))
        write_csv(os.path.join(args.out, "trajectory.csv"),
                  ("t", "i", "u", "xi"), rows)
    if abs(c) < PINNING_THRESHOLD:
        print(f"pinned (|c| = {abs(c):.3g} below {PINNING_THRESHOLD})")
    else:
        print(f"c = {c!r}  r2 = {r2!r}")
    if traj.stopped_early:
        print(f"note: run stopped early ({traj.stop_reason})")
    return 0


def _solve_from_config(model, cfg: RunConfig):
    wb = cfg.wave
    h = wb.h
    half = None
    if wb.z_min is not None or wb.z_max is not None:
        z_min = wb.z_min if wb.z_min is not None else -wave.default_half_width(model)
        z_max = wb.z_max if wb.z_max is not None else wave.default_half_width(model)
        half = max(-z_min, z_max)
    level = wb.phase_level
    phase = wave.PhaseCondition(level) if level is not None else None
    if wb.method == "stationary":
        init = wave.make_grid(model, half_width=half, h=h, level=level)
        return wave.solve_stationary(model, init)
    if wb.method in ("newton", "pseudotime"):
        # initial velocity sign from the force balance over (0,1)
        v = np.linspace(0.0, 1.0, 4097)
        balance = float(np.trapezoid(eval_f(model.nonlinearity, v), v))
        c0 = 0.1 * math.copysign(1.0, balance) if abs(balance) > 1e-12 else 0.0
        init = wave.make_grid(model, half_width=half, h=h, level=level, c=c0)
        if wb.method == "newton":
            return wave.solve_newton(model, init, phase, tol=wb.tol,
                                     max_iter=wb.max_iter)
        return wave.solve_pseudotime(model, init, phase)
    return wave.solve_auto(model, M=cfg.lattice.M, T=cfg.lattice.T, h=h,
                           half_width=half, phase=phase, tol=wb.tol,
                           max_iter=wb.max_iter, dt=cfg.lattice.dt)


def cmd_wave(cfg: RunConfig, args) -> int:
    model = build_model(cfg)
    _gate_or_fail(model)
    sol = _solve_from_config(model, cfg)
    g = sol.grid
    write_csv(os.path.join(args.out, "profile.csv"), ("z", "phi1", "phi2"),
              zip(g.z.tolist(), g.phi1.tolist(), g.phi2.tolist()))
    write_json(os.path.join(args.out, "solution.json"), {
        "c": g.c,
        "residual_sup": sol.residual_sup,
        "monotone_defect": sol.monotone_defect,
        "method": sol.method,
        "phase_level": sol.phase_level,
        "grid": {"z_min": g.z_min, "z_max": g.z_max, "h": g.h},
    })
    label = "pinned" if sol.pinned else "traveling"
    print(f"{label}: c = {g.c!r}  residual_sup = {sol.residual_sup:.3g}  "
          f"method = {sol.method}")
    return 0


def cmd_hull(cfg: RunConfig, args) -> int:
    model = build_model(cfg)
    _gate_or_fail(model)
    M = cfg.lattice.M
    M_list = sorted({max(8, M // 4), max(12, M // 2), max(16, M)})
    result = wave.hull_extrapolate(model, M_list, dt=cfg.lattice.dt)
    write_csv(os.path.join(args.out, "hull.csv"),
              ("M", "p", "lambda_p", "c_p", "converged"),
              [(row["M"], row["p"], row["lambda_p"], row["c_p"],
                row["converged"]) for row in result.table])
    write_json(os.path.join(args.out, "hull.json"), {
        "c_limit": result.c_limit,
        "extrapolated": result.extrapolated,
        "table": result.table,
    })
    print(f"c_limit = {result.c_limit!r} "
          f"({'extrapolated' if result.extrapolated else 'last c_p'})")
    return 0


def _sweep_values(sweep) -> np.ndarray:
    n = int(math.floor((sweep.stop - sweep.start) / sweep.step + 1e-9)) + 1
    return sweep.start + sweep.step * np.arange(max(n, 1))


def _sweep_point(model, cfg: RunConfig, param: str, value: float,
                 timings: bool):
    t0 = time.perf_counter()
    m = wave.model_with(model, param, float(value))
    try:
        sol = wave.solve_auto(m, M=cfg.lattice.M, T=cfg.lattice.T,
                              h=cfg.wave.h, tol=cfg.wave.tol,
                              max_iter=cfg.wave.max_iter, dt=cfg.lattice.dt)
        rec = {
            "param_value": float(value),
            "c": sol.c,
            "method": sol.method,
            "pinned": sol.pinned,
            "residual_sup": sol.residual_sup,
        }
    except FkError as exc:
        rec = {
            "param_value": float(value),
            "c": float("nan"),
            "method": f"error: {exc}",
            "pinned": False,
            "residual_sup": float("nan"),
        }
    rec["wall_time"] = time.perf_counter() - t0 if timings else 0.0
    return rec


def cmd_sweep(cfg: RunConfig, args) -> int:
    if cfg.sweep is None:
        raise FkError("config has no sweep block")
    model = build_model(cfg)
    _gate_or_fail(model, need_bistable=False)
    values = _sweep_values(cfg.sweep)
    workers = args.workers if args.workers is not None else cfg.sweep.workers
    cap = os.environ.get("FKWAVES_THREADS")
    if cap:
        workers = min(workers, max(1, int(cap)))
    # each point is solved from canonical initial data derived only from
    # its parameter value, so the records are independent of worker count
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(
                lambda v: _sweep_point(model, cfg, cfg.sweep.param, v,
                                       args.timings),
                values,
            ))
    else:
        records = [_sweep_point(model, cfg, cfg.sweep.param, v, args.timings)
                   for v in values]
    records.sort(key=lambda r: r["param_value"])
    write_csv(
        os.path.join(args.out, "sweep.csv"),
        ("param_value", "c", "method", "pinned", "residual_sup", "wall_time"),
        [(r["param_value"], r["c"], r["method"], r["pinned"],
          r["residual_sup"], r["wall_time"]) for r in records],
    )
    pinned_vals = [r["param_value"] for r in records if r["pinned"]]
    moving_vals = [r["param_value"] for r in records if not r["pinned"]
                   and math.isfinite(r["c"])]
    if pinned_vals and moving_vals:
        last_pinned = max(v for v in pinned_vals if v < min(moving_vals)) \
            if any(v < min(moving_vals) for v in pinned_vals) else pinned_vals[-1]
        first_moving = min(moving_vals)
        print(f"depinning threshold {cfg.sweep.param}_c = "
              f"{0.5 * (last_pinned + first_moving)!r} "
              f"+- {0.5 * cfg.sweep.step!r}")
    elif pinned_vals:
        print("entire sweep pinned")
    else:
        print("entire sweep depinned")
    return 0


def cmd_verify(cfg: RunConfig, args) -> int:
    model = build_model(cfg)
    options = {
        "M": cfg.lattice.M,
        "T": cfg.lattice.T,
    }
    if cfg.wave.h is not None:
        options["h"] = cfg.wave.h
    reports = verify.run_suite(model, options, seed=cfg.seed)
    payload = []
    for r in reports:
        d = r.as_dict()
        if not args.timings:
            d["runtime"] = 0.0
        payload.append(d)
    write_json(os.path.join(args.out, "report.json"), payload)
    failed = [r for r in reports if not r.skipped and not r.passed]
    for r in reports:
        if r.skipped:
            state = f"SKIP ({r.skip_reason})"
        else:
            state = "PASS" if r.passed else "FAIL"
        print(f"{r.name:24s} {state}")
    return 1 if failed else 0


_COMMANDS = {
    "check-model": cmd_check_model,
    "simulate": cmd_simulate,
    "wave": cmd_wave,
    "hull": cmd_hull,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


if __name__ == "__main__":
    sys.exit(main())
