"""Command-line interface.

Subcommands:
  run      execute the experiment described by a JSON config file
  sweep    same, overriding the SNR list from the command line
  inspect  generate and print one scene (optionally save it)
  oracle   run the small-instance reference cross-checks
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .experiment import ExperimentConfig, run_experiment
from .scene import observe, sample_scene, scene_hash, scene_to_text


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config \
        else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out_path = args.out
    if getattr(args, "variant", None):
        cfg.variants = [args.variant]
    if getattr(args, "snrs", None):
        cfg.snr_db = [float(s) for s in args.snrs.split(",")]
    cfg.__post_init__()
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    results = run_experiment(cfg, threads=args.threads)
    aborted = [r for r in results if r.error]
    for r in aborted:
        print(f"ABORTED {r.variant} snr={r.snr_db} trial={r.trial}: {r.error}",
              file=sys.stderr)
    print(f"wrote {len(results)} rows to {cfg.out_path} "
          f"({len(aborted)} aborted)")
    return 1 if aborted else 0


def _cmd_inspect(args) -> int:
    cfg = _load_config(args)
    arr, grid, markov, _ = cfg.build_system()
    seed = cfg.base_seed
    scene = sample_scene(arr, grid, markov, cfg.n_paths, seed,
                         gain_law=cfg.gain_law)
    obs = observe(scene, cfg.snr_db[0], seed + 1_000_003)
    print(f"scene hash {scene_hash(scene)}  |h| = "
          f"{np.linalg.norm(scene.h):.4f}  M = {arr.m_total}  "
          f"Q = {grid.q_total}")
    for i, p in enumerate(scene.paths):
        s = p.scatterer
        print(f"path {i}: gain {p.gain:.3f}  az {s.azimuth_rad:.3f} rad  "
              f"el {s.elevation_rad:.3f} rad  r {s.distance_m:.2f} m  "
              f"grid idx {scene.truth_grid_index[i]}")
        for row in p.vr.mask.T:
            print("   " + "".join("#" if b else "." for b in row))
    print(f"observation: snr {obs.snr_db} dB, noise precision "
          f"{obs.noise_precision:.4g}")
    if args.save:
        with open(args.save, "w") as f:
            f.write(scene_to_text(scene, obs))
        print(f"saved to {args.save}")
    return 0


def _cmd_oracle(args) -> int:
    from . import oracle_suite

    failures = oracle_suite.run_all(verbose=True)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="xlmimo",
                                 description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the base seed")
    common.add_argument("--out", default=None, help="override the output path")
    common.add_argument("--variant", default=None,
                        help="run a single algorithm variant")
    common.add_argument("--threads", type=int, default=1,
                        help="parallel trial workers")

    p_run = sub.add_parser("run", parents=[common],
                           help="run the experiment in a config file")
    p_run.add_argument("config", nargs="?", default=None,
                       help="JSON config path (defaults to the desk-scale config)")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="run a config across an SNR list")
    p_sweep.add_argument("config", nargs="?", default=None)
    p_sweep.add_argument("--snrs", required=True,
                         help="comma-separated SNR list in dB")
    p_sweep.set_defaults(func=_cmd_run)

    p_ins = sub.add_parser("inspect", parents=[common],
                           help="print one generated scene")
    p_ins.add_argument("config", nargs="?", default=None)
    p_ins.add_argument("--save", default=None, help="write the scene to a file")
    p_ins.set_defaults(func=_cmd_inspect)

    p_or = sub.add_parser("oracle", help="run reference cross-checks")
    p_or.set_defaults(func=_cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
