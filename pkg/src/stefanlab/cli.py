"""Command-line driver: ``python -m stefanlab <command> --config run.json --out DIR``.

Exit codes depend only on the terminal status: 0 horizon reached or decay
certified, 2 blow-up detected, 3 numerical failure, 4 configuration error,
5 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .classifier import ClassifierRules, bisect_lambda_runs, classify, verdict_audit
from .config import RunConfig, load_config, parse_config
from .diagnostics import (BLOWUP_DETECTED, DECAY_CERTIFIED, NUMERICAL_FAILURE, REACHED_HORIZON,
                          Trajectory, energy_identity_residual, energy_lower_bound,
                          energy_monotonicity_violation, mass_balance_residual)
from .errors import BadBracketError, ConfigError, InvalidSpecError, NotComputable
from .model import DirichletConstant, NonlinearFlux
from .output import ensure_writable, write_checkpoints, write_json, write_records_csv
from .reference import neumann_similarity_A, smallness_bound, decay_supersolution

log = logging.getLogger("stefanlab")

EXIT_OK, EXIT_BLOWUP, EXIT_FAILURE, EXIT_CONFIG, EXIT_IO = 0, 2, 3, 4, 5

STATUS_EXIT = {REACHED_HORIZON: EXIT_OK, DECAY_CERTIFIED: EXIT_OK,
               BLOWUP_DETECTED: EXIT_BLOWUP, NUMERICAL_FAILURE: EXIT_FAILURE}

# relative tolerances of the identity checks
MASS_TOL = 5e-3
ENERGY_TOL = 1e-2
MONOTONE_TOL = 1e-10
ORDER_TOL = 1e-8
SIMILARITY_TOL = 1e-2


def exit_code(status: str) -> int:
    return STATUS_EXIT[status]


# ---------------------------------------------------------------------------
# Run summaries
# ---------------------------------------------------------------------------

def identity_maxima(traj: Trajectory) -> dict:
    """Largest mass-balance and energy-identity residuals after the warm-up."""
    t = traj.column("t")
    ks = [k for k in range(len(t)) if t[k] >= traj.t_warmup]
    mass = max((mass_balance_residual(traj, k) for k in ks), default=0.0)
    out = {"mass_balance": mass}
    if isinstance(traj.spec.bc, NonlinearFlux) and traj.dissipation is not None and len(ks) > 1:
        E = traj.column("energy")
        out["energy_identity"] = max(
            energy_identity_residual(traj, a, b) / (1.0 + abs(E[a])) for a, b in zip(ks[:-1], ks[1:]))
    return out


def summarize(traj: Trajectory, cfg: RunConfig, wall: float, rules: ClassifierRules = None) -> dict:
    rep = classify(traj, rules or cfg.rules)
    out = {
        "status": traj.status,
        "t_final": traj.t_final,
        "n_records": len(traj),
        "classification": rep.to_dict(),
        "blowup_time_estimate": rep.blowup_time_estimate,
        "flags": list(traj.flags),
        "wall_time": wall,
        "version": __version__,
        "config": cfg.to_dict(),
    }
    if traj.status != NUMERICAL_FAILURE:
        out["residual_maxima"] = identity_maxima(traj)
    else:
        out["failure_time"] = traj.failure_time
    return out


def _simulate(cfg: RunConfig):
    from .solver import run
    t0 = time.perf_counter()
    traj = run(cfg.spec, cfg.numerics)
    return traj, time.perf_counter() - t0


def _write_run(traj, summary, paths):
    write_records_csv(traj, paths.csv_path)
    if traj.checkpoints:
        write_checkpoints(traj, paths.checkpoint_dir)
    write_json(summary, paths.json_path)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, out_dir, jobs=1) -> int:
    paths = cfg.output.under(out_dir)
    try:
        ensure_writable(paths.csv_path)
        ensure_writable(paths.json_path)
    except OSError as exc:
        log.error("output not writable: %s", exc)
        return EXIT_IO
    traj, wall = _simulate(cfg)
    summary = summarize(traj, cfg, wall)
    try:
        _write_run(traj, summary, paths)
    except OSError as exc:
        log.error("writing results failed: %s", exc)
        return EXIT_IO
    log.info("status %s at t=%.6g", traj.status, traj.t_final)
    return exit_code(traj.status)


def _check(name, passed, measured, tolerance, note=""):
    return {"check": name, "pass": bool(passed), "measured": measured, "tolerance": tolerance, "note": note}


def verify_checks(cfg: RunConfig) -> list:
    """Identity suite at the configuration's resolution."""
    from .solver import run
    spec = cfg.spec
    num = cfg.numerics.resolved(spec.s0)
    flux = isinstance(spec.bc, NonlinearFlux)
    if not num.checkpoint_times:
        num = replace(num, checkpoint_times=tuple(np.linspace(0.0, num.t_end, 21)[1:]))
    num = replace(num, stop_on_certificate=False)
    traj = run(spec, num)
    checks = []
    if traj.status == NUMERICAL_FAILURE:
        return [_check("run", False, traj.failure_time, None, "numerical failure")]
    t = traj.column("t")
    ks = [k for k in range(len(t)) if t[k] >= traj.t_warmup]
    warm_note = ""
    if not ks:
        ks = list(range(1, len(t)))
        warm_note = "warm-up longer than the run; all records used"
    prof = spec.initial_profile()
    mass_tol = MASS_TOL * (spec.s0 + prof.l1_norm())
    mass = max(mass_balance_residual(traj, k) for k in ks)
    checks.append(_check("mass_balance", mass <= mass_tol, mass, mass_tol, warm_note))

    if flux:
        E = traj.column("energy")
        idx = [cp.index for cp in traj.checkpoints]
        worst = max((energy_identity_residual(traj, a, b) / (1.0 + abs(E[a]))
                     for a, b in zip(idx[:-1], idx[1:])), default=0.0)
        checks.append(_check("energy_identity", worst <= ENERGY_TOL, worst, ENERGY_TOL))
        mono = energy_monotonicity_violation(traj, traj.t_warmup)
        checks.append(_check("energy_monotone", mono <= MONOTONE_TOL, mono, MONOTONE_TOL))
        if traj.status == REACHED_HORIZON:
            viol = sum(1 for r in traj.records if r.t >= traj.t_warmup and r.energy < energy_lower_bound(r))
            checks.append(_check("energy_lower_bound", viol == 0, viol, 0))
        else:
            checks.append(_check("energy_lower_bound", True, None, 0, f"skipped: run ended {traj.status}"))
        checks.append(_containment_check(cfg, num))
    else:
        checks.append(_check("energy_identity", True, None, None, "skipped: needs the nonlinear flux condition"))
    if isinstance(spec.bc, DirichletConstant):
        A = neumann_similarity_A(spec.bc.u0, 1e-10).A
        t_off = (spec.s0 / A) ** 2 if A > 0 else 0.0
        rec = traj.records[-1]
        err = abs(rec.s / math.sqrt(rec.t + t_off) - A) / A
        checks.append(_check("similarity", err <= SIMILARITY_TOL, err, SIMILARITY_TOL))
    else:
        checks.append(_check("similarity", True, None, None, "skipped: needs a constant Dirichlet condition"))
    return checks


def _containment_check(cfg, num):
    """Run with data under the supersolution and check ``u <= v``, ``s <= sigma``."""
    from .solver import run
    spec = cfg.spec
    phi = spec.initial_profile()
    bound = smallness_bound(spec.s0, spec.p)
    lam = 0.9 * bound / (phi.linf_norm() / spec.lam)
    small = spec.with_lambda(lam)
    sup = decay_supersolution(spec.s0, spec.p)
    audit = sup.audit()
    traj = run(small, replace(num, stop_on_certificate=False))
    worst = 0.0
    for cp in traj.checkpoints:
        worst = max(worst, float(np.max(cp.u - sup(cp.t, cp.x))), cp.s - float(sup.sigma(cp.t)))
    passed = audit["ok"] and worst <= 0.0 and traj.status != NUMERICAL_FAILURE
    return _check("supersolution_containment", passed, worst, 0.0,
                  f"lambda={lam:.6g}; closed-form residual signs {'ok' if audit['ok'] else 'violated'}")


def cmd_verify(cfg: RunConfig, out_dir, jobs=1) -> int:
    out = Path(out_dir)
    try:
        ensure_writable(out / "verify.json")
    except OSError as exc:
        log.error("output not writable: %s", exc)
        return EXIT_IO
    checks = verify_checks(cfg)
    for c in checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['check']}: measured={c['measured']} tol={c['tolerance']} {c['note']}")
    ok = all(c["pass"] for c in checks)
    write_json({"checks": checks, "pass": ok, "version": __version__, "config": cfg.to_dict()},
               out / "verify.json")
    return EXIT_OK if ok else EXIT_FAILURE


def _sweep_task(args):
    cfg, lam = args
    spec = cfg.spec.with_lambda(lam)
    c = replace(cfg, spec=spec)
    traj, wall = _simulate(c)
    return lam, traj, summarize(traj, c, wall)


def cmd_sweep(cfg: RunConfig, out_dir, jobs=1, lambdas=None) -> int:
    lambdas = list(lambdas if lambdas is not None else cfg.sweep.lambdas)
    if not lambdas:
        log.error("sweep needs at least one lambda")
        return EXIT_CONFIG
    if any(not (l > 0) for l in lambdas):
        log.error("sweep lambdas must be positive")
        return EXIT_CONFIG
    out = Path(out_dir)
    try:
        ensure_writable(out / "sweep.json")
    except OSError as exc:
        log.error("output not writable: %s", exc)
        return EXIT_IO
    tasks = [(cfg, float(l)) for l in lambdas]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    runs = []
    try:
        for i, (lam, traj, summary) in enumerate(results):
            d = out / f"run_{i:03d}"
            d.mkdir(parents=True, exist_ok=True)
            write_records_csv(traj, d / "trajectory.csv")
            if traj.checkpoints:
                write_checkpoints(traj, d / "checkpoints")
            write_json(summary, d / "summary.json")
            runs.append({"lambda": lam, "status": summary["status"],
                         "verdict": summary["classification"]["verdict"], "dir": d.name})
        audit = verdict_audit([r["lambda"] for r in runs], [r["verdict"] for r in runs])
        write_json({"runs": runs, "monotonicity_audit": audit, "version": __version__,
                    "config": cfg.to_dict()}, out / "sweep.json")
    except OSError as exc:
        log.error("writing results failed: %s", exc)
        return EXIT_IO
    for r in runs:
        print(f"lambda={r['lambda']:.6g} {r['verdict']} ({r['status']})")
    if not audit["single_flip"]:
        log.warning("verdicts are not monotone in lambda: %s", audit)
    if any(r["status"] == NUMERICAL_FAILURE for r in runs):
        return EXIT_FAILURE
    return EXIT_OK


def cmd_bisect(cfg: RunConfig, out_dir, jobs=1, lam_lo=None, lam_hi=None, tol=None) -> int:
    b = cfg.bisect
    lam_lo = b.lam_lo if lam_lo is None else lam_lo
    lam_hi = b.lam_hi if lam_hi is None else lam_hi
    tol = b.tol if tol is None else tol
    out = Path(out_dir)
    try:
        ensure_writable(out / "bisect.json")
    except OSError as exc:
        log.error("output not writable: %s", exc)
        return EXIT_IO
    try:
        bis, reports = bisect_lambda_runs(cfg.spec, lam_lo, lam_hi, tol, cfg.numerics, cfg.rules, jobs)
    except BadBracketError as exc:
        log.error("bad bracket: %s", exc)
        return EXIT_CONFIG
    runs = [{"lambda": lam, "verdict": v, "status": reports[lam][1],
             "classification": reports[lam][0].to_dict()} for lam, v in bis.log]
    write_json({"bracket": list(bis.bracket), "width": bis.width, "runs": runs, "flags": bis.flags,
                "version": __version__, "config": cfg.to_dict()}, out / "bisect.json")
    print(f"bracket [{bis.bracket[0]:.10g}, {bis.bracket[1]:.10g}] width {bis.width:.3g}")
    return EXIT_OK


ORDER_THRESHOLDS = {("temporal", 1.0): 0.9, ("temporal", 0.5): 1.8, ("spatial", 0.5): 1.9}


def cmd_convergence(cfg: RunConfig, out_dir, jobs=1, levels=None) -> int:
    from .mms import spatial_convergence, temporal_convergence
    levels = cfg.convergence.levels if levels is None else levels
    if levels < 3:
        log.error("convergence study needs at least 3 levels, got %d", levels)
        return EXIT_CONFIG
    out = Path(out_dir)
    try:
        ensure_writable(out / "convergence.csv")
    except OSError as exc:
        log.error("output not writable: %s", exc)
        return EXIT_IO
    tables = [temporal_convergence(1.0, levels), temporal_convergence(0.5, levels),
              spatial_convergence(levels)]
    ok = True
    with (out / "convergence.csv").open("w") as fh:
        fh.write("study,theta,level,size,error,order\n")
        for tb in tables:
            need = ORDER_THRESHOLDS[(tb.kind, tb.theta)]
            passed = min(tb.orders) >= need
            ok &= passed
            for r in tb.rows():
                order = "" if r["order"] is None else format(r["order"], ".17g")
                fh.write(f"{tb.kind},{tb.theta},{r['level']},{r['size']:.17g},{r['error']:.17g},{order}\n")
            print(f"{'PASS' if passed else 'FAIL'} {tb.kind} theta={tb.theta}: orders "
                  + ", ".join(f"{o:.3f}" for o in tb.orders) + f" (need >= {need})")
    return EXIT_OK if ok else EXIT_FAILURE


def cmd_selfsimilar(cfg: RunConfig, out_dir, jobs=1, u0=None) -> int:
    """Similarity constant for the configured Dirichlet value and, if the
    configuration is in Dirichlet mode, the run's front compared with it."""
    bc = cfg.spec.bc
    if u0 is None:
        if not isinstance(bc, DirichletConstant):
            log.error("selfsimilar needs --u0 or a Dirichlet boundary condition in the config")
            return EXIT_CONFIG
        u0 = bc.u0
    out = Path(out_dir)
    try:
        ensure_writable(out / "selfsimilar.json")
    except OSError as exc:
        log.error("output not writable: %s", exc)
        return EXIT_IO
    sc = neumann_similarity_A(u0, 1e-12)
    result = {"u0": u0, "A": sc.A, "residual": sc.residual, "version": __version__}
    print(f"u0={u0:.17g} A={sc.A:.17g} residual={sc.residual:.3g}")
    code = EXIT_OK
    if isinstance(bc, DirichletConstant) and bc.u0 == u0:
        traj, wall = _simulate(cfg)
        t_off = (cfg.spec.s0 / sc.A) ** 2 if sc.A > 0 else 0.0
        t = traj.column("t")
        s = traj.column("s")
        ratio = s[1:] / np.sqrt(t[1:] + t_off)
        result["front_ratio_final"] = float(ratio[-1])
        result["relative_error_final"] = float(abs(ratio[-1] - sc.A) / sc.A)
        result["status"] = traj.status
        print(f"s/sqrt(t + t_off) at t={t[-1]:.6g}: {ratio[-1]:.10g} (relative error "
              f"{result['relative_error_final']:.3g})")
        code = exit_code(traj.status)
    result["config"] = cfg.to_dict()
    write_json(result, out / "selfsimilar.json")
    return code


COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "bisect": cmd_bisect,
    "convergence": cmd_convergence,
    "selfsimilar": cmd_selfsimilar,
}


def _assert_seed_free():
    """The package draws no random numbers; fail loudly if any module binds an RNG."""
    import stefanlab
    for name, mod in list(sys.modules.items()):
        if name.startswith("stefanlab") and mod is not None:
            for val in vars(mod).values():
                vname = getattr(val, "__name__", "")
                if vname in ("random", "numpy.random") or type(val).__name__ == "Generator":
                    raise RuntimeError(f"module {name} binds a random number generator")
    return stefanlab


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stefanlab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=False, help="JSON run configuration")
    ap.add_argument("--out", default="stefanlab_out", help="output directory")
    ap.add_argument("--jobs", type=int, default=1, help="parallel runs for sweep/bisect")
    ap.add_argument("--seed-free", action="store_true",
                    help="assert that no random number generator is used")
    ap.add_argument("--lambdas", type=float, nargs="*", help="sweep amplitudes")
    ap.add_argument("--lo", type=float, help="bisection lower amplitude")
    ap.add_argument("--hi", type=float, help="bisection upper amplitude")
    ap.add_argument("--tol", type=float, help="bisection bracket width")
    ap.add_argument("--levels", type=int, help="convergence refinement levels")
    ap.add_argument("--u0", type=float, help="Dirichlet value for selfsimilar")
    return ap


def _setup_logging():
    level = os.environ.get("STEFANLAB_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if level not in levels:
        log.error("STEFANLAB_LOG=%r not in {error,info,debug}; using error", level)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.seed_free:
        _assert_seed_free()
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command in ("convergence", "selfsimilar"):
            cfg = parse_config({"p": 3, "s0": 1, "profile": "linear(1)"})
        else:
            raise ConfigError("--config", "required for this command")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    extra = {}
    if args.command == "sweep" and args.lambdas is not None:
        extra["lambdas"] = args.lambdas
    if args.command == "bisect":
        extra = {"lam_lo": args.lo, "lam_hi": args.hi, "tol": args.tol}
    if args.command == "convergence" and args.levels is not None:
        extra["levels"] = args.levels
    if args.command == "selfsimilar" and args.u0 is not None:
        extra["u0"] = args.u0
    try:
        return COMMANDS[args.command](cfg, args.out, args.jobs, **extra)
    except (InvalidSpecError, NotComputable) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
