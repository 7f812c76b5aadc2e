"""Command line interface.

Subcommands cover the full workflow: generate a world and sensor logs, run
the filter on a log, evaluate an estimate against ground truth, sweep the
whole ablation matrix, and print the default configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .experiments import (ExperimentConfig, default_config_dict,
                          load_experiment_config, run_experiment,
                          variant_config)
from .frames import read_frames, write_frames
from .metrics import Trajectory, compute_report
from .particle_filter import run_filter, write_estimates_csv
from .semantic_map import load_map, save_map, save_walls_csv
from .simulate import generate_trajectory, generate_vineyard, simulate_stream


def _load_cfg(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_experiment_config(args.config)
    return ExperimentConfig()


def cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wall_map = generate_vineyard(cfg.vineyard, np.random.default_rng(cfg.world_seed))
    save_map(wall_map, out / "map.csv")
    save_walls_csv(wall_map, out / "walls.csv")
    gt_poses = generate_trajectory(wall_map, "serpentine", cfg.speed, cfg.dt)
    ts = np.arange(len(gt_poses)) * cfg.dt
    Trajectory.from_poses(ts, gt_poses).save_csv(out / "gt.csv")
    seeds = [args.seed] if args.seed is not None else list(cfg.seeds)
    for seed in seeds:
        frames = simulate_stream(wall_map, gt_poses, cfg.sim, seed, cfg.dt)
        write_frames(frames, out / f"frames_seed{seed}.jsonl")
    print(f"wrote world + {len(seeds)} frame log(s) to {out}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_cfg(args)
    wall_map = load_map(args.map)
    frames = read_frames(args.frames)
    fc = variant_config(cfg.filter, args.variant)
    run = run_filter(frames, wall_map, fc, args.seed)
    write_estimates_csv(run, args.out)
    print(f"filtered {len(frames)} frames -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    wall_map = load_map(args.map)
    est = Trajectory.load_csv(args.est)
    gt = Trajectory.load_csv(args.gt)
    report = compute_report(est, gt, wall_map, args.method, args.experiment,
                            args.seed)
    doc = report.to_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


# Ordering gates checked by `matrix --check`: the reference method must beat
# both baselines, and removing a cue must cost what it is supposed to cost.
def acceptance_gates(aggregates: dict) -> list[tuple[str, bool]]:
    ape = {m: aggregates[m]["ape_raw"][0] for m in aggregates}
    row = {m: aggregates[m]["row_fraction"][0] for m in aggregates}
    gates = [
        ("noisy_gnss ape_raw in [2.5, 3.5]", 2.5 <= ape["noisy_gnss"] <= 3.5),
        ("full ape_raw < noisy_gnss", ape["full"] < ape["noisy_gnss"]),
        ("full ape_raw < geometry_only", ape["full"] < ape["geometry_only"]),
        ("full row_fraction > noisy_gnss", row["full"] > row["noisy_gnss"]),
        ("full row_fraction > geometry_only", row["full"] > row["geometry_only"]),
        ("no_gnss ape_raw > 2x full", ape["no_gnss"] > 2.0 * ape["full"]),
        ("no_semantic row_fraction < full", row["no_semantic"] < row["full"]),
        ("no_corridor row_fraction < full", row["no_corridor"] < row["full"]),
    ]
    return gates


def cmd_matrix(args) -> int:
    cfg = _load_cfg(args)
    result = run_experiment(cfg, outdir=args.out,
                            write_frames_files=args.write_frames)
    print(f"{'method':<20} {'ape_raw':>14} {'row_fraction':>16}")
    for method in cfg.methods:
        agg = result.aggregates[method]
        am, asd = agg["ape_raw"]
        rm, rsd = agg["row_fraction"]
        print(f"{method:<20} {am:>7.3f} +-{asd:<5.3f} {rm:>9.3f} +-{rsd:<5.3f}")
    if args.check:
        missing = [m for m in ("noisy_gnss", "full", "geometry_only", "no_gnss",
                               "no_semantic", "no_corridor")
                   if m not in result.aggregates]
        if missing:
            print(f"cannot check acceptance gates, methods missing: {missing}")
            return 2
        failures = 0
        for label, ok in acceptance_gates(result.aggregates):
            print(f"{'PASS' if ok else 'FAIL'}  {label}")
            failures += 0 if ok else 1
        if failures:
            print(f"{failures} acceptance gate(s) failed")
            return 1
        print("all acceptance gates passed")
    return 0


def cmd_print_config(args) -> int:
    print(json.dumps(default_config_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rowloc",
        description="Row-structured field localisation: simulator, filter, evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate world, trajectory and frame logs")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="single seed (default: all seeds from the config)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the filter over a frame log")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--frames", required=True, help="frame log (JSON lines)")
    p.add_argument("--map", required=True, help="landmark map CSV")
    p.add_argument("--out", required=True, help="estimate CSV to write")
    p.add_argument("--variant", default="full", help="filter variant name")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="evaluate an estimate against ground truth")
    p.add_argument("--est", required=True, help="estimate CSV")
    p.add_argument("--gt", required=True, help="ground-truth CSV")
    p.add_argument("--map", required=True, help="landmark map CSV")
    p.add_argument("--method", default="full")
    p.add_argument("--experiment", default="adhoc")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="also write the report to this JSON file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("matrix", help="run the (method x seed) matrix")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--check", action="store_true",
                   help="verify acceptance gates; nonzero exit on failure")
    p.add_argument("--write-frames", action="store_true",
                   help="also write the simulated frame logs")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("print-config", help="dump the default configuration")
    p.set_defaults(func=cmd_print_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
