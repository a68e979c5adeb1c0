"""Batch front-end: load a config, run one subcommand, write CSV + manifest."""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import discrete as disc
from .config import (Config, apply_overrides, load_config, load_preset,
                     parse_blowup, parse_discrete, parse_discrete_init,
                     parse_init, parse_model)
from .equilibrium import estimate_pi, FUNCTIONAL_NAMES
from .limit_ode import (McPrecisionError, blowup_solution, convergence_sweep,
                        solve_limit_ode)
from .model import InvalidModelError, validate_spec, ValidatedModel
from .reports import RunManifest, write_csv
from .simulator import (KIND_NAMES, simulate, simulate_coupled,
                        simulate_dominating, simulate_truncated)
from .util import default_workers, keyed_seed, replica_seeds


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (McPrecisionError, disc.PsiCacheBudgetExceeded) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="synapsim")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="path to a TOML config")
        src.add_argument("--preset", help="bundled preset name")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--replicas", type=int, default=None)
        sp.add_argument("--horizon", type=float, default=None)
        sp.add_argument("--epsilon", type=float, default=None)
        sp.add_argument("--stride", type=int, default=None)
        sp.add_argument("--workers", type=int, default=default_workers())
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE")
        sp.add_argument("--output-dir", default=None,
                        help="default: $SYNAPSIM_OUT or ./synapsim-out")

    sp = sub.add_parser("validate", help="assumption report only")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("simulate", help="one trajectory to CSV")
    common(sp)
    sp.add_argument("--system", choices=["full", "dominating", "truncated", "discrete"],
                    default="full")
    sp.add_argument("--K", type=float, default=None, help="truncation level")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("couple", help="shared-randomness coupling audit")
    common(sp)
    sp.add_argument("--paths", type=int, default=None)
    sp.set_defaults(func=cmd_couple)

    sp = sub.add_parser("equilibrium", help="Pi_w functional table over a w grid")
    common(sp)
    sp.add_argument("--w-grid", type=float, nargs="+", default=None)
    sp.set_defaults(func=cmd_equilibrium)

    sp = sub.add_parser("limit-ode", help="integrate the averaging limit")
    common(sp)
    sp.add_argument("--rhs", choices=["closed-form", "monte-carlo"], default=None)
    sp.add_argument("--step", type=float, default=None)
    sp.set_defaults(func=cmd_limit_ode)

    sp = sub.add_parser("blowup", help="closed-form blow-up solution and S0 table")
    common(sp)
    sp.set_defaults(func=cmd_blowup)

    sp = sub.add_parser("sweep", help="epsilon-convergence report")
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def _setup(args, section: str = "run"):
    cfg = load_preset(args.preset) if args.preset else load_config(args.config)
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    run = {**cfg.section("run"), **cfg.section(section)}
    if args.seed is not None:
        run["seed"] = args.seed
    if args.replicas is not None:
        run["replicas"] = args.replicas
    if args.horizon is not None:
        run["horizon"] = args.horizon
    if args.epsilon is not None:
        run["epsilon"] = args.epsilon
    if args.stride is not None:
        run["stride"] = args.stride
    run.setdefault("seed", 0)
    run.setdefault("stride", 1)
    out_dir = Path(args.output_dir or os.environ.get("SYNAPSIM_OUT", "synapsim-out"))
    return cfg, run, out_dir


def _validated(cfg: Config) -> ValidatedModel:
    spec = parse_model(cfg)
    report = validate_spec(spec)
    if not report.ok:
        raise InvalidModelError(report)
    return ValidatedModel(spec)


def cmd_validate(args) -> int:
    cfg, run, out_dir = _setup(args)
    spec = parse_model(cfg)
    report = validate_spec(spec)
    man = RunManifest("validate", cfg.source, cfg.raw_text, run["seed"],
                      {"checks": len(report.checks)})
    rows = []
    bad = {v.assumption: v for v in report.issues}
    for name in report.checks:
        v = bad.get(name)
        rows.append((name, "ok" if v is None else "violated",
                     "" if v is None else v.message,
                     "" if v is None or v.probe is None else v.probe))
    path = write_csv(out_dir / "validation.csv",
                     ["assumption", "status", "message", "probe"], rows,
                     preamble=cfg.raw_text)
    man.add(path)
    man.write(out_dir)
    lo, hi, step = report.grid
    print(f"validate: {len(report.checks)} checks on grid [{lo:g},{hi:g}] step {step:g}; "
          f"{len(report.issues)} violation(s)")
    for v in report.issues:
        print(f"  {v}")
    return 0 if report.ok else 1


def _traj_rows(traj, kind_names):
    ell = traj.cp_states.shape[1] - 4 if traj.cp_states.size else traj.u0.z.size
    first = (0.0, traj.u0.x, *traj.u0.z, traj.u0.omega_p, traj.u0.omega_d,
             traj.u0.w, "init")
    yield first
    for idx, row in zip(traj.cp_index, traj.cp_states):
        yield (traj.times[idx], *row[: ell + 3], row[ell + 3],
               kind_names[int(traj.kinds[idx])])
    f = traj.final_state
    yield (traj.horizon, f.x, *f.z, f.omega_p, f.omega_d, f.w, "end")


def cmd_simulate(args) -> int:
    cfg, run, out_dir = _setup(args)
    seed = int(run["seed"])
    horizon = float(run.get("horizon", 1.0))
    eps = float(run.get("epsilon", 1.0))
    stride = int(run["stride"])
    budget = int(run.get("max_events", 10_000_000))
    man = RunManifest("simulate", cfg.source, cfg.raw_text, seed,
                      {"system": args.system, "horizon": horizon, "epsilon": eps,
                       "stride": stride, "max_events": budget})
    if args.system == "discrete":
        params = parse_discrete(cfg)
        u0 = parse_discrete_init(cfg, params.ell)
        traj = disc.simulate_discrete(params, u0, horizon, eps,
                                      keyed_seed(seed, 1), stride=stride,
                                      max_events=budget)
        ell = params.ell
        header = (["t", "x"] + [f"z{i+1}" for i in range(ell)]
                  + ["omega_p", "omega_d", "w", "event"])
        rows = [(0.0, u0.x, *u0.z, u0.omega_p, u0.omega_d, u0.w, "init")]
        for idx, row in zip(traj.cp_index, traj.cp_states):
            rows.append((traj.times[idx], int(row[0]),
                         *[int(v) for v in row[1:1 + ell]],
                         row[1 + ell], row[2 + ell], int(row[3 + ell]),
                         disc.KIND_NAMES[int(traj.kinds[idx])]))
        f = traj.final_state
        rows.append((horizon, f.x, *f.z, f.omega_p, f.omega_d, f.w, "end"))
        path = write_csv(out_dir / "trajectory.csv", header, rows, cfg.raw_text)
        n_ev = traj.n_events
    else:
        model = _validated(cfg)
        u0 = parse_init(cfg, model.spec.ell)
        rng = keyed_seed(seed, 1)
        info = f"seed={seed}"
        if args.system == "dominating":
            traj = simulate_dominating(model, u0, horizon, eps, rng, stride=stride,
                                       seed_info=info, max_events=budget)
        elif args.system == "truncated":
            K = args.K if args.K is not None else float(run.get("K", math.inf))
            traj = simulate_truncated(model, K, u0, horizon, eps, rng,
                                      stride=stride, seed_info=info,
                                      max_events=budget)
        else:
            traj = simulate(model, u0, horizon, eps, rng, stride=stride,
                            seed_info=info, max_events=budget)
        ell = traj.model.spec.ell
        header = (["t", "x"] + [f"z{i+1}" for i in range(ell)]
                  + ["omega_p", "omega_d", "w", "event"])
        path = write_csv(out_dir / "trajectory.csv", header,
                         _traj_rows(traj, KIND_NAMES), cfg.raw_text)
        occ = _occupation_report(traj)
        man.add(write_csv(out_dir / "occupation.csv", ["functional", "value"],
                          occ, cfg.raw_text))
        n_ev = traj.n_events
    man.add(path)
    man.write(out_dir)
    if traj.truncated:
        print(f"error: event budget ({budget}) exhausted at t="
              f"{traj.times[-1]:.6g}; trajectory truncated", file=sys.stderr)
        print(f"simulate[{args.system}]: {n_ev} events (truncated) -> {path}")
        return 2
    print(f"simulate[{args.system}]: {n_ev} events -> {path}")
    return 0


def _occupation_report(traj):
    from synapsim.simulator import PolyFunctional, occupation_functionals
    ell = traj.model.spec.ell
    ones = np.ones(ell)
    gs = {"time": PolyFunctional(c0=1.0), "x": PolyFunctional(cx=1.0),
          "x^2": PolyFunctional(cxx=1.0), "z": PolyFunctional(cz=ones),
          "x*z": PolyFunctional(cxz=ones)}
    totals = occupation_functionals(traj, gs)
    return [(name, totals[name]) for name in gs]


def cmd_couple(args) -> int:
    cfg, run, out_dir = _setup(args, "couple")
    model = _validated(cfg)
    u0 = parse_init(cfg, model.spec.ell)
    seed = int(run["seed"])
    paths = int(args.paths or run.get("paths", 200))
    horizon = float(run.get("horizon", 1.0))
    eps = float(run.get("epsilon", 0.05))
    n_samples = int(run.get("sample_times", 100))
    ts = np.linspace(horizon / n_samples, horizon, n_samples)
    man = RunManifest("couple", cfg.source, cfg.raw_text, seed,
                      {"paths": paths, "horizon": horizon, "epsilon": eps,
                       "sample_times": n_samples})
    rows = []
    violations = 0
    for k, s in enumerate(replica_seeds(keyed_seed(seed, 2), paths)):
        pair = simulate_coupled(model, u0, horizon, eps, s)
        orig = pair.original.sample(ts)
        dom = pair.dominating.sample(ts)
        for t, u, ub in zip(ts, orig, dom):
            ok = (u.x <= ub.x + 1e-9 and float(np.max(u.z)) <= ub.z[0] + 1e-9
                  and max(u.omega_p, u.omega_d) <= ub.omega_p + 1e-9
                  and abs(u.w) <= ub.w + 1e-9)
            violations += not ok
            rows.append((k, t, u.x, ub.x, float(np.max(u.z)), float(ub.z[0]),
                         max(u.omega_p, u.omega_d), ub.omega_p, abs(u.w), ub.w,
                         ok))
    path = write_csv(out_dir / "coupling_audit.csv",
                     ["path", "t", "x", "x_bar", "z_max", "z_bar", "omega_max",
                      "omega_bar", "w_abs", "w_bar", "ok"], rows, cfg.raw_text)
    man.add(path)
    man.write(out_dir)
    print(f"couple: {paths} paths x {n_samples} sample times, "
          f"{violations} order violations -> {path}")
    return 0 if violations == 0 else 1


def cmd_equilibrium(args) -> int:
    cfg, run, out_dir = _setup(args, "equilibrium")
    model = _validated(cfg)
    seed = int(run["seed"])
    replicas = int(run.get("replicas", 32))
    eq = cfg.section("equilibrium")
    w_grid = args.w_grid or eq.get("w_grid", [1.0])
    horizon = eq.get("horizon")   # None -> relaxation-time defaults
    burnin = eq.get("burnin")
    man = RunManifest("equilibrium", cfg.source, cfg.raw_text, seed,
                      {"w_grid": list(w_grid), "replicas": replicas})
    rows = []
    for i, w in enumerate(w_grid):
        est = estimate_pi(float(w), model, horizon=horizon, burnin=burnin,
                          replicas=replicas, seed=keyed_seed(seed, 3, i),
                          workers=args.workers)
        for name in FUNCTIONAL_NAMES:
            e = est[name]
            rows.append((w, name, e.mean, e.se, replicas, est.horizon))
    path = write_csv(out_dir / "equilibrium.csv",
                     ["w", "functional", "estimate", "se", "replicas", "horizon"],
                     rows, cfg.raw_text)
    man.add(path)
    man.write(out_dir)
    print(f"equilibrium: {len(w_grid)} weights x {len(FUNCTIONAL_NAMES)} "
          f"functionals -> {path}")
    return 0


def cmd_limit_ode(args) -> int:
    cfg, run, out_dir = _setup(args, "limit_ode")
    model = _validated(cfg)
    u0 = parse_init(cfg, model.spec.ell)
    seed = int(run["seed"])
    rhs = args.rhs or run.get("rhs", "closed-form")
    step = float(args.step or run.get("step", 1e-3))
    horizon = float(run.get("horizon", 1.0))
    sol = solve_limit_ode(model, (u0.omega_p, u0.omega_d, u0.w), horizon,
                          rhs=rhs, step=step, seed=seed,
                          replicas=int(run.get("replicas", 32)),
                          workers=args.workers)
    man = RunManifest("limit-ode", cfg.source, cfg.raw_text, seed,
                      {"rhs": rhs, "step": step, "horizon": horizon,
                       "blowup_time": sol.blowup_time})
    rows = []
    for i, t in enumerate(sol.ts):
        if sol.step_se is not None and i > 0:
            se = sol.step_se[i - 1]
            extra = (se["psi_p"], se["psi_d"], se["zbeta"], se["replicas"])
        else:
            extra = (0.0, 0.0, 0.0, 0)
        rows.append((t, sol.omega_p[i], sol.omega_d[i], sol.w[i], *extra))
    path = write_csv(out_dir / "limit_ode.csv",
                     ["t", "omega_p", "omega_d", "w", "se_psi_p", "se_psi_d",
                      "se_zbeta", "rhs_replicas"], rows, cfg.raw_text)
    man.add(path)
    man.write(out_dir)
    tail = f", blow-up ceiling hit at t={sol.blowup_time:g}" if sol.blowup_time else ""
    print(f"limit-ode[{rhs}]: {len(sol.ts)} points{tail} -> {path}")
    return 0


def cmd_blowup(args) -> int:
    cfg, run, out_dir = _setup(args)
    coeffs, w0 = parse_blowup(cfg)
    sol = blowup_solution(coeffs, w0)
    man = RunManifest("blowup", cfg.source, cfg.raw_text, int(run["seed"]),
                      {"case": sol.case, "S0": sol.S0})
    table = write_csv(out_dir / "blowup.csv",
                      ["lambda2", "lambda1", "lambda0", "delta", "case", "w0", "S0"],
                      [(coeffs.lambda2, coeffs.lambda1, coeffs.lambda0,
                        coeffs.discriminant, sol.case, w0, sol.S0)], cfg.raw_text)
    ts = np.linspace(0.0, 0.95 * sol.S0, 200)
    curve = write_csv(out_dir / "blowup_curve.csv", ["t", "w"],
                      [(t, float(np.real(sol.value(float(t))))) for t in ts],
                      cfg.raw_text)
    man.add(table)
    man.add(curve)
    man.write(out_dir)
    print(f"blowup[{sol.case}]: S0 = {sol.S0:.17g} -> {table}")
    return 0


def cmd_sweep(args) -> int:
    cfg, run, out_dir = _setup(args, "sweep")
    model = _validated(cfg)
    u0 = parse_init(cfg, model.spec.ell)
    seed = int(run["seed"])
    epsilons = [float(e) for e in run.get("epsilons", [0.1, 0.03, 0.01])]
    horizon = float(run.get("horizon", 0.4))
    replicas = int(run.get("replicas", 64))
    grid = int(run.get("grid", 101))
    report = convergence_sweep(model, epsilons, horizon, replicas, seed=seed,
                               u0=u0, grid_n=grid, workers=args.workers)
    man = RunManifest("sweep", cfg.source, cfg.raw_text, seed,
                      {"epsilons": epsilons, "horizon": horizon,
                       "replicas": replicas, "grid": grid,
                       "monotone": report.monotone})
    rows = []
    for e in report.entries:
        for i, t in enumerate(report.ts):
            rows.append((e.epsilon, t, e.mean_path[i], e.sd_path[i],
                         report.limit_w[i], abs(e.mean_path[i] - report.limit_w[i])))
    path = write_csv(out_dir / "sweep.csv",
                     ["epsilon", "time", "mean_W", "sd_W", "limit_w", "abs_error"],
                     rows, cfg.raw_text)
    summary = write_csv(out_dir / "sweep_summary.csv", ["epsilon", "sup_error"],
                        [(e.epsilon, e.sup_error) for e in report.entries],
                        cfg.raw_text)
    man.add(path)
    man.add(summary)
    man.write(out_dir)
    errs = ", ".join(f"{e.epsilon:g}: {e.sup_error:.4g}" for e in report.entries)
    print(f"sweep: sup errors {{{errs}}}, monotone={report.monotone} -> {summary}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
