"""Command-line harness: table building, single solves, studies, experiments.

Exit codes: 0 success, 2 solver failure, 3 IO/config error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import doc_metric
from .config import ConfigError, RunConfig, load_config
from .geometry import EmptyRegion, build_regions
from .montecarlo import transition_success_stats
from .potential_solver import NoValidSolution, WaveformParams, solve_cycle
from .simulator import presets, run_experiment, summarize

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holoraft",
        description="Holonomic control of docked swimming-module lattices")
    parser.add_argument("--config", type=str, default=None,
                        help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config RNG seed")
    parser.add_argument("--out", type=str, default=None,
                        help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("build-tables",
                   help="precompute and cache the DoC lookup tables")

    p_solve = sub.add_parser("solve", help="solve one swim cycle for a wrench")
    p_solve.add_argument("--fx", type=float, default=0.0)
    p_solve.add_argument("--fy", type=float, default=0.0)
    p_solve.add_argument("--tau", type=float, default=0.0)

    p_stats = sub.add_parser("transition-stats",
                             help="Monte-Carlo transition success rates")
    p_stats.add_argument("--trials", type=int, default=None,
                         help="trials per side (overrides config)")
    p_stats.add_argument("--side", type=int, action="append", default=None,
                         help="lattice side (repeatable)")

    p_exp = sub.add_parser("experiment", help="run a closed-loop experiment")
    p_exp.add_argument("--preset", choices=sorted(presets()), default=None)
    return parser


def _load(args) -> RunConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    return load_config(args.config, overrides)


def _tables(cfg: RunConfig, regions):
    return doc_metric.load_or_build_tables(cfg.tables_dir, cfg.geometry,
                                           cfg.region_resolution, regions)


def cmd_build_tables(cfg: RunConfig) -> int:
    regions = build_regions(cfg.geometry, cfg.region_resolution)
    tables = doc_metric.build_tables(regions)
    for rel, table in tables.tables.items():
        path = doc_metric.table_path(cfg.tables_dir, rel)
        doc_metric.write_table(table, path, cfg.geometry)
        print(f"wrote {path} ({table.values.nbytes} value bytes)")
    return EXIT_OK


def cmd_solve(cfg: RunConfig, wrench) -> int:
    structure = cfg.structure()
    regions = build_regions(cfg.geometry, cfg.region_resolution)
    tables = _tables(cfg, regions)
    init = [WaveformParams(-math.pi / 2, 0.0)] * structure.n_modules
    try:
        sol = solve_cycle(structure, np.asarray(wrench), init, cfg.solver,
                          tables, regions)
    except NoValidSolution as exc:
        print(f"no valid solution: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    record = {
        "wrench_desired": list(wrench),
        "achieved": [float(v) for v in sol.achieved],
        "error": sol.error,
        "min_doc": sol.min_doc,
        "collision_free": sol.collision_free,
        "params": [{"phi0": p.phi0, "amp": p.amp} for p in sol.params],
    }
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "solution.json").write_text(json.dumps(record, sort_keys=True,
                                                  indent=1))
    print(f"desired  [Fx Fy tau] = {wrench}")
    print(f"achieved [Fx Fy tau] = {[round(v, 6) for v in record['achieved']]}")
    print(f"error J = {sol.error:.3e}   min DoC = {sol.min_doc:.3f}")
    for i, p in enumerate(sol.params):
        print(f"  module {i}: phi0 = {p.phi0:+.3f}  A = {p.amp:+.2f}")
    print(f"wrote {out / 'solution.json'}")
    return EXIT_OK


def cmd_transition_stats(cfg: RunConfig, sides, trials) -> int:
    regions = build_regions(cfg.geometry, cfg.region_resolution)
    sides = tuple(sides) if sides else cfg.stats.sides
    report = []
    for side in sides:
        n = trials if trials is not None else cfg.stats.trials.get(side, 1000)
        if n <= 0:
            continue
        stats = transition_success_stats(
            side, n, regions, seed=cfg.seed,
            condition_margin=cfg.stats.condition_margin,
            check_margin=cfg.stats.check_margin,
            t_trans=cfg.transition.t_trans)
        lo, hi = stats.wilson_interval()
        report.append({"side": side, "trials": n, "successes": stats.successes,
                       "rate": stats.rate, "ci95": [lo, hi]})
        print(f"side {side}: {stats.successes}/{n} "
              f"rate {stats.rate:.4f}  95% CI [{lo:.4f}, {hi:.4f}]")
    if not report:
        print("no trials requested")
        return EXIT_OK
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transition_stats.json").write_text(
        json.dumps(report, sort_keys=True, indent=1))
    print(f"wrote {out / 'transition_stats.json'}")
    return EXIT_OK


def cmd_experiment(cfg: RunConfig, preset: str | None) -> int:
    spec = presets()[preset] if preset else cfg.experiment
    structure = cfg.structure()
    regions = build_regions(cfg.geometry, cfg.region_resolution)
    tables = _tables(cfg, regions)
    log = run_experiment(spec, structure, cfg.geometry, regions, tables,
                         cfg.solver, cfg.transition, cfg.gains, cfg.sim,
                         seed=cfg.seed, initial_yaw=cfg.initial_yaw,
                         literal_square=cfg.literal_square_drag)
    summary = summarize(log, spec, structure, cfg.geometry, regions,
                        cfg.sim.audit_resolution)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.export_csv(out / f"{spec.name}_trajectory.csv")
    log.export_cycles_jsonl(out / f"{spec.name}_cycles.jsonl")
    (out / f"{spec.name}_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1))
    print(f"experiment {spec.name}: {len(log.cycles)} cycles, "
          f"{summary['hold_cycles']} holds, "
          f"{summary['no_transition_cycles']} failed transitions")
    for leg in summary["legs"]:
        print(f"  leg v_des={leg['v_des']} theta={leg['theta_des']:.3f}: "
              f"mean speed {leg['mean_speed']:.4f} m/s "
              f"(commanded {leg['commanded_speed']:.4f}), "
              f"heading error {leg['heading_error_deg']:.1f} deg")
    audit = summary["audit"]
    verdict = ("clean" if audit["violation_time"] is None
               else f"VIOLATION at t={audit['violation_time']:.3f}s")
    doc = ("n/a" if audit["min_doc"] is None
           else f"{audit['min_doc']:.3f}")
    print(f"  audit: {verdict}, min point DoC {doc}")
    print(f"wrote {out / (spec.name + '_trajectory.csv')}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "build-tables":
            return cmd_build_tables(cfg)
        if args.command == "solve":
            return cmd_solve(cfg, [args.fx, args.fy, args.tau])
        if args.command == "transition-stats":
            return cmd_transition_stats(cfg, args.side, args.trials)
        if args.command == "experiment":
            return cmd_experiment(cfg, args.preset)
        raise AssertionError(f"unhandled command {args.command}")
    except (ConfigError, EmptyRegion, doc_metric.CacheError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
