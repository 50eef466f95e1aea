"""Monte-Carlo experiment driver: config, trial execution, persistence.

Trials are keyed by seed so every variant (and every SNR point) sees
the identical scene sequence; results land in a delimited text file
with one row per trial plus a sibling aggregate file. Reruns of the
same config reproduce the scientific columns exactly; wall-clock
timing is the one non-deterministic column and can be disabled.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import ArrayConfig, fresnel_distance
from .metrics import nmse, vr_error_rate
from .pipeline import run_alternating_map, run_subarray_omp
from .polar_grid import build_fixed_grid
from .priors import HierarchicalPriorParams, calibrate_markov
from .scene import observe, sample_scene, scene_hash

VARIANTS = ("proposed-2d-markov", "proposed-iid", "on-grid",
            "subarray-omp", "genie-aided")

OBS_SEED_OFFSET = 1_000_003  # scene and noise streams stay distinct


@dataclass
class ExperimentConfig:
    # array
    m_x: int = 64
    m_z: int = 8
    k_x: int = 8
    k_z: int = 2
    carrier_hz: float = 30e9
    # grid
    m1: int = 32
    m2: int = 8
    n_r: int = 4
    # scene law; small p10 = strongly clustered visibility regions
    n_paths: int = 4
    kappa: float = 0.5
    p10_x: float = 0.05
    p10_z: float = 0.05
    gain_law: str = "complex-gaussian"
    # experiment
    snr_db: list = field(default_factory=lambda: [-4.0])
    trials: int = 50
    base_seed: int = 1234
    variants: list = field(default_factory=lambda: list(VARIANTS))
    # iteration budget
    n_outer: int = 25
    n_vbi: int = 50
    n_ep: int = 5
    n_sweeps: int = 10
    # thresholds
    c_thresh: float = 3.0
    eta: float = 0.5
    vbi_tol: float = 1e-6
    omp_max_atoms: int = 8
    # output
    out_path: str = "results.csv"
    measure_walltime: bool = True

    def __post_init__(self):
        for name in ("trials", "n_outer", "n_vbi", "n_ep", "n_sweeps",
                     "n_paths", "omp_max_atoms"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants: {sorted(unknown)}; "
                             f"choose from {VARIANTS}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("damping factor must lie in (0, 1)")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as f:
            return cls(**json.load(f))

    def to_file(self, path) -> None:
        with open(path, "w") as f:
            json.dump(asdict(self), f, indent=1)

    def build_system(self):
        """Array config, fixed grid, Markov params, hierarchical priors."""
        arr = ArrayConfig(self.m_x, self.m_z, self.k_x, self.k_z,
                          self.carrier_hz)
        r_min = 2.0 * fresnel_distance(arr)
        grid = build_fixed_grid(arr, self.m1, self.m2, r_min, n_r=self.n_r)
        markov = calibrate_markov(self.kappa, self.p10_x, self.p10_z)
        hier = HierarchicalPriorParams.with_default_support(
            grid.q_total, self.n_paths)
        return arr, grid, markov, hier


@dataclass
class TrialResult:
    variant: str
    snr_db: float
    trial: int
    seed: int
    scene_hash: str
    nmse: float
    vr_error_rate: float
    iterations_run: int
    wall_ms: float
    nmse_trace: list = field(default_factory=list)
    err_trace: list = field(default_factory=list)
    error: str = ""


def run_trial(cfg: ExperimentConfig, variant: str, snr_db: float,
              trial: int) -> TrialResult:
    """One (variant, SNR, trial) cell; deterministic given the config."""
    arr, grid, markov, hier = cfg.build_system()
    seed = cfg.base_seed + trial
    scene = sample_scene(arr, grid, markov, cfg.n_paths, seed,
                         gain_law=cfg.gain_law)
    obs = observe(scene, snr_db, seed + OBS_SEED_OFFSET)
    digest = scene_hash(scene)
    t0 = time.perf_counter()
    try:
        if variant == "subarray-omp":
            res = run_subarray_omp(arr, grid, obs.y,
                                   1.0 / obs.noise_precision,
                                   max_atoms=cfg.omp_max_atoms)
            h_hat, masks = res.h_hat, res.masks
            iters = res.iterations_run
            nmse_trace, err_trace = [], []
            final_grid = None
        else:
            res = run_alternating_map(
                arr, grid, markov, hier, obs.y,
                n_outer=cfg.n_outer, n_vbi=cfg.n_vbi, vbi_tol=cfg.vbi_tol,
                n_ep=cfg.n_ep, n_sweeps=cfg.n_sweeps, eta=cfg.eta,
                c_thresh=cfg.c_thresh,
                use_markov=(variant != "proposed-iid"),
                refine_grid=(variant in ("proposed-2d-markov", "proposed-iid")),
                genie_scene=scene if variant == "genie-aided" else None,
                trace_scene=scene)
            h_hat, masks = res.h_hat, res.masks
            iters = res.iterations_run
            nmse_trace, err_trace = res.nmse_trace, res.err_trace
            final_grid = res.grid
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        wall = (time.perf_counter() - t0) * 1e3 if cfg.measure_walltime else 0.0
        return TrialResult(variant, snr_db, trial, seed, digest,
                           float("nan"), float("nan"), 0, wall,
                           error=f"{type(exc).__name__}: {exc}")
    wall = (time.perf_counter() - t0) * 1e3 if cfg.measure_walltime else 0.0
    return TrialResult(variant, snr_db, trial, seed, digest,
                       nmse(h_hat, scene.h),
                       vr_error_rate(scene, masks, final_grid=final_grid),
                       iters, wall, nmse_trace, err_trace)


def _trial_cell(args):
    cfg_dict, variant, snr_db, trial = args
    return run_trial(ExperimentConfig(**cfg_dict), variant, snr_db, trial)


def run_experiment(cfg: ExperimentConfig, threads: int = 1):
    """All cells of the (variant, SNR, trial) lattice; returns the results.

    Rows are written in deterministic (variant, snr, trial) order
    regardless of execution order. Raises nothing on per-trial aborts;
    inspect the returned rows' ``error`` fields (the CLI maps them to a
    nonzero exit code).
    """
    cells = [(variant, snr, trial)
             for variant in cfg.variants
             for snr in cfg.snr_db
             for trial in range(cfg.trials)]
    if threads > 1:
        cfg_dict = asdict(cfg)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                _trial_cell, [(cfg_dict, v, s, t) for v, s, t in cells]))
    else:
        results = [run_trial(cfg, v, s, t) for v, s, t in cells]
    order = {v: i for i, v in enumerate(cfg.variants)}
    results.sort(key=lambda r: (order[r.variant], r.snr_db, r.trial))
    write_results(cfg, results)
    return results


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def aggregate_path(out_path: str) -> str:
    stem, dot, ext = str(out_path).rpartition(".")
    return f"{stem}.agg.{ext}" if dot else f"{out_path}.agg"


def write_results(cfg: ExperimentConfig, results) -> None:
    cols = ["variant", "snr_db", "trial", "seed", "scene_hash", "nmse",
            "vr_error_rate", "iterations_run", "wall_ms"]
    with open(cfg.out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for r in results:
            w.writerow([r.variant, _fmt(r.snr_db), r.trial, r.seed,
                        r.scene_hash, _fmt(r.nmse), _fmt(r.vr_error_rate),
                        r.iterations_run, _fmt(r.wall_ms)])
    groups: dict = {}
    for r in results:
        groups.setdefault((r.variant, r.snr_db), []).append(r)
    with open(aggregate_path(cfg.out_path), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["variant", "snr_db", "trials", "mean_nmse",
                    "mean_vr_error_rate", "mean_wall_ms", "aborted"])
        for (variant, snr), rows in sorted(
                groups.items(), key=lambda kv: ({v: i for i, v in
                                                 enumerate(cfg.variants)}[kv[0][0]],
                                                kv[0][1])):
            good = [r for r in rows if not r.error and np.isfinite(r.nmse)]
            aborted = len(rows) - len(good)
            w.writerow([
                variant, _fmt(snr), len(rows),
                _fmt(float(np.mean([r.nmse for r in good])) if good else float("nan")),
                _fmt(float(np.mean([r.vr_error_rate for r in good])) if good
                     else float("nan")),
                _fmt(float(np.mean([r.wall_ms for r in rows]))),
                aborted,
            ])
