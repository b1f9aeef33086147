"""Command-line interface.

Subcommands: simulate | solve | compare | static | verify.
Exit codes: 0 ok, 1 acceptance failure, 2 config error, 3 runtime error.
Every run writes its artifacts into one directory (scenario hash + seed)
and finishes with a manifest listing a sha256 per file, so interrupted or
tampered runs are detectable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import simulator as sim
from . import verify as verify_mod
from .config import ConfigError, ScenarioFile
from .defects import DefectError
from .harness import (grand_canonical, report_thresholds_met, run_convergence,
                      smoothed_density)
from .manifest import write_manifest
from .measures import build_local_equilibrium
from .solver import Solver, SolverError
from .thermo import FugacityOverflowError


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _out_dir(args, sf: ScenarioFile, seed: int) -> Path:
    root = Path(args.out) if args.out else Path("runs")
    d = root / f"{sf.name}-{sf.content_hash()[:8]}-s{seed}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_density_csv(path: Path, blocks) -> None:
    """blocks: iterable of (time, xs, values)."""
    with open(path, "w") as f:
        f.write("time,x,rho\n")
        for t, xs, vals in blocks:
            for x, v in zip(xs, vals):
                f.write(f"{_fmt(t)},{_fmt(x)},{_fmt(v)}\n")


def _solver_sidecar(result, defects) -> dict:
    return {
        "snapshot_times": result.times,
        "atoms": {
            str(j): {"t": [p[0] for p in tr], "m": [p[1] for p in tr]}
            for j, tr in result.atom_trace.items()
        },
        "reservoirs": {str(j): v for j, v in
                       result.snapshots[-1].reservoirs.items()},
        "regime_log": [[t, j, regime] for t, j, regime in result.regime_log],
        "mass_drift": result.mass_drift,
        "dirichlet_energy": result.dirichlet_energy,
        "defects": [
            {"index": j, "x": d.x, "beta": d.beta, "lam": d.lam, "class": c}
            for j, (d, c) in enumerate(defects)
        ],
        "atom_masses": {
            str(j): [s.atoms.get(j) for s in result.snapshots]
            for j in result.snapshots[-1].atoms
        },
    }


def cmd_solve(args) -> int:
    sf = ScenarioFile.load(args.config)
    cfg = sf.solver_config()
    out = _out_dir(args, sf, seed=0)
    result = Solver(cfg).solve()
    xs = np.arange(cfg.M) / cfg.M
    _write_density_csv(out / "density.csv",
                       ((t, xs, s.rho) for t, s in
                        zip(result.times, result.snapshots)))
    (out / "atoms.json").write_text(
        json.dumps(_solver_sidecar(result, sf.defects), indent=2, sort_keys=True))
    write_manifest(out, sf.content_hash(), [],
                   {"command": "solve", "mass_drift": result.mass_drift})
    print(f"solve: wrote {out} (mass drift {result.mass_drift:.2e})")
    return 0


def cmd_simulate(args) -> int:
    sf = ScenarioFile.load(args.config)
    settings = sf.sim_settings()
    seed = args.seed if args.seed is not None else settings["seed"]
    out = _out_dir(args, sf, seed)
    gc = grand_canonical(sf.rate)
    marginals = build_local_equilibrium(
        gc, sf.rho0, sf.atoms0, sf.c0, settings["N"], sf.defects)
    state = sim.init_state(gc, sf.defects, marginals, seed)
    event_log = [] if args.event_log else None
    rows = []
    for t in settings["times"]:
        sim.advance_to(state, t, event_log=event_log)
        rows.append((t, state.snapshot()))
    if args.format == "json":
        payload = {
            "N": settings["N"], "seed": seed,
            "snapshots": [{"time": t, "occupancy": occ.tolist()}
                          for t, occ in rows],
        }
        (out / "snapshots.json").write_text(json.dumps(payload, sort_keys=True))
    else:
        with open(out / "snapshots.csv", "w") as f:
            f.write("time,site,occupancy\n")
            for t, occ in rows:
                for k, n in enumerate(occ):
                    f.write(f"{_fmt(t)},{k},{n}\n")
    if event_log is not None:
        with open(out / "events.csv", "w") as f:
            f.write("t,site,dir\n")
            for t, k, d in event_log:
                f.write(f"{_fmt(t)},{k},{d}\n")
    write_manifest(out, sf.content_hash(), [seed],
                   {"command": "simulate", "events": state.events,
                    "total": state.total})
    print(f"simulate: wrote {out} ({state.events} events)")
    return 0


def cmd_compare(args) -> int:
    import os

    sf = ScenarioFile.load(args.config)
    scenario = sf.scenario()
    out = _out_dir(args, sf, scenario.seed)
    workers = args.workers if args.workers else os.cpu_count()
    report = run_convergence(scenario, workers=workers)
    passed = report_thresholds_met(scenario, report)
    payload = report.to_dict()
    payload["thresholds_met"] = passed
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    with open(out / "report.csv", "w") as f:
        f.write("N,t,l1_mean,l1_se,l1_pooled,replicas_ok\n")
        for e in report.entries:
            f.write(f"{e.N},{_fmt(e.t)},{_fmt(e.l1_mean)},{_fmt(e.l1_se)},"
                    f"{_fmt(e.l1_pooled)},{e.replicas_ok}\n")
    with open(out / "defects.csv", "w") as f:
        f.write("N,t,defect,class,value_mean,value_se,target,abs_gap_mean\n")
        for e in report.entries:
            for cls_name, table in (("critical", e.critical),
                                    ("super", e.super_slow)):
                for j, st in table.items():
                    f.write(f"{e.N},{_fmt(e.t)},{j},{cls_name},"
                            f"{_fmt(st['value_mean'])},{_fmt(st['value_se'])},"
                            f"{_fmt(st['target'])},{_fmt(st['abs_gap_mean'])}\n")
    _write_comparison_profiles(out, sf, scenario)
    write_manifest(out, sf.content_hash(), [scenario.seed],
                   {"command": "compare", "thresholds_met": passed,
                    "failures": len(report.failures)})
    print(f"compare: wrote {out} (thresholds_met={passed})")
    return 0 if passed else 1


def _write_comparison_profiles(out: Path, sf: ScenarioFile, scenario) -> None:
    """Pooled smoothed empirical densities next to the PDE ones, for plots."""
    from .harness import derive_seed
    pde = Solver(scenario.solver_config()).solve()
    (out / "atoms.json").write_text(
        json.dumps(_solver_sidecar(pde, sf.defects), indent=2, sort_keys=True))
    xs = np.arange(scenario.M) / scenario.M
    blocks = []
    for t, s in zip(pde.times, pde.snapshots):
        blocks.append(("pde", 0, t, s.rho))
    N = max(scenario.n_ladder)
    gc = scenario.gc
    mean_density = {t: np.zeros(scenario.M) for t in scenario.obs_times}
    for r in range(scenario.replicas):
        seed = derive_seed(scenario.seed, N, r)
        marginals = build_local_equilibrium(
            gc, scenario.rho0, scenario.atoms0, scenario.c0, N, scenario.defects)
        state = sim.init_state(gc, scenario.defects, marginals, seed)
        for t in scenario.obs_times:
            sim.advance_to(state, t)
            mean_density[t] += smoothed_density(state, scenario.theta, xs)
    for t in scenario.obs_times:
        blocks.append(("empirical", N, t, mean_density[t] / scenario.replicas))
    with open(out / "profiles.csv", "w") as f:
        f.write("kind,N,time,x,value\n")
        for kind, N_, t, vals in blocks:
            for x, v in zip(xs, vals):
                f.write(f"{kind},{N_},{_fmt(t)},{_fmt(x)},{_fmt(v)}\n")


def cmd_static(args) -> int:
    sf = ScenarioFile.load(args.config)
    tab = sf.static
    if "N" not in tab or "samples" not in tab:
        raise ConfigError("missing field 'N' or 'samples' in [static]")
    from .harness import static_limit_check
    gc = grand_canonical(sf.rate)
    seed = args.seed if args.seed is not None else int(tab.get("seed", 1))
    result = static_limit_check(gc, float(tab.get("c", sf.c0)), sf.defects,
                                int(tab["N"]), int(tab["samples"]), seed=seed)
    out = _out_dir(args, sf, seed)
    (out / "static.json").write_text(json.dumps(result.to_dict(), indent=2,
                                                sort_keys=True))
    with open(out / "static.csv", "w") as f:
        f.write("defect,class,site,mean_occ,scaled,target\n")
        for j, d in result.defects.items():
            f.write(f"{j},{d['class']},{d['site']},{_fmt(d['mean_occ'])},"
                    f"{_fmt(d['scaled'])},{_fmt(d['target'])}\n")
    write_manifest(out, sf.content_hash(), [seed], {"command": "static"})
    print(f"static: wrote {out} (bulk {result.bulk_mean:.4f} vs {result.bulk_target})")
    return 0


def cmd_verify(args) -> int:
    checks = verify_mod.run_suite(args.suite)
    for c in checks:
        print(c.line())
    ok = all(c.ok for c in checks)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify-{args.suite}.json").write_text(json.dumps(
            [{"name": c.name, "ok": bool(c.ok), "detail": c.detail}
             for c in checks],
            indent=2))
    print(f"verify {args.suite}: {'ok' if ok else 'FAILED'} "
          f"({sum(c.ok for c in checks)}/{len(checks)})")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="zrlab",
        description="Zero-range defect laboratory: simulate, solve, compare.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("config", help="scenario TOML file")
        sp.add_argument("--out", help="output root directory (default: runs/)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker threads for replica sweeps")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("simulate", help="run the lattice chain, write snapshots")
    common(sp)
    sp.add_argument("--event-log", action="store_true",
                    help="also write the (t, site, dir) event audit log")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("solve", help="run the macroscopic solver")
    common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("compare", help="simulator-vs-solver convergence study")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("static", help="static condensation check")
    common(sp)
    sp.set_defaults(func=cmd_static)

    sp = sub.add_parser("verify", help="run a property suite")
    sp.add_argument("suite", choices=sorted(verify_mod.SUITES) + ["all"])
    sp.add_argument("--out", help="directory for machine-readable results")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DefectError) as e:
        print(f"error: config: {e}", file=sys.stderr)
        return 2
    except (SolverError, sim.SimulationError, FugacityOverflowError,
            ArithmeticError) as e:
        print(f"error: runtime: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
