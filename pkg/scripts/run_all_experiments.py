#!/usr/bin/env python3
"""Run the four canned closed-loop experiments and print their summaries.

Outputs (trajectory CSV, per-cycle JSONL, summary JSON) land in --out;
DoC tables are loaded from --tables or built on first use.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from holoraft.config import load_config
from holoraft.doc_metric import load_or_build_tables
from holoraft.geometry import build_regions
from holoraft.simulator import presets, run_experiment, summarize


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="YAML run configuration")
    ap.add_argument("--out", default="out/experiments")
    ap.add_argument("--tables", default="tables")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cfg = load_config(args.config, {"seed": args.seed, "out_dir": args.out,
                                    "tables_dir": args.tables})
    structure = cfg.structure()
    regions = build_regions(cfg.geometry, cfg.region_resolution)
    tables = load_or_build_tables(cfg.tables_dir, cfg.geometry,
                                  cfg.region_resolution, regions)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for name, spec in presets().items():
        log = run_experiment(spec, structure, cfg.geometry, regions, tables,
                             cfg.solver, cfg.transition, cfg.gains, cfg.sim,
                             seed=cfg.seed, initial_yaw=cfg.initial_yaw)
        summary = summarize(log, spec, structure, cfg.geometry, regions,
                            cfg.sim.audit_resolution)
        log.export_csv(out / f"{name}_trajectory.csv")
        log.export_cycles_jsonl(out / f"{name}_cycles.jsonl")
        (out / f"{name}_summary.json").write_text(
            json.dumps(summary, sort_keys=True, indent=1))
        legs = "; ".join(
            f"v={leg['v_des']} speed {leg['mean_speed']:.4f}/"
            f"{leg['commanded_speed']:.4f} heading "
            f"{leg['heading_error_deg']:.1f} deg" for leg in summary["legs"])
        audit = ("clean" if summary["audit"]["violation_time"] is None
                 else "COLLISION")
        print(f"{name}: {legs} | audit {audit}")
    print(f"artifacts in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
