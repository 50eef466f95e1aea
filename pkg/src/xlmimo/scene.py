"""Synthetic non-stationary scenes and noisy observations.

Scatterers are drawn uniformly over realizable direction cosines and
uniformly in inverse distance over the grid's range; per-path
visibility masks come from the 2D Markov prior; gains are unit-variance
complex Gaussian by default. Ground-truth channels are synthesized
with the *exact* spherical-wave steering while the estimators work
with Fresnel dictionaries, so the generator deliberately includes the
model mismatch the approximation is supposed to absorb.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayConfig, ScattererParams, fresnel_distance, steering_exact
from .polar_grid import PolarGrid, VisibilityMap, nearest_grid_index
from .priors import Markov2DParams


@dataclass(frozen=True)
class ChannelPath:
    gain: complex
    scatterer: ScattererParams
    vr: VisibilityMap


@dataclass(frozen=True)
class ChannelScene:
    """Ground truth: paths, the assembled channel, and truth grid indices."""

    paths: tuple
    h: np.ndarray
    truth_grid_index: np.ndarray

    def reassemble(self, cfg: ArrayConfig) -> np.ndarray:
        h = np.zeros(cfg.m_total, dtype=complex)
        for p in self.paths:
            h += p.gain * steering_exact(cfg, p.scatterer) * p.vr.lift(cfg)
        return h


@dataclass(frozen=True)
class Observation:
    y: np.ndarray
    noise_precision: float
    snr_db: float


def sample_vr(params: Markov2DParams, k_x: int, k_z: int, rng) -> VisibilityMap:
    """Raster-scan sample of the directed 2D Markov mask model.

    The corner draws from the steady state; later nodes draw from the
    product of their top (x-axis) and left (z-axis) transition factors,
    renormalized over {0, 1}.
    """
    if k_x < 1 or k_z < 1:
        raise ValueError("mask dimensions must be >= 1")
    rng = np.random.default_rng(rng)
    p = params
    v = np.zeros((k_x, k_z), dtype=np.int8)
    px = np.array([[p.p00_x, p.p01_x], [p.p10_x, p.p11_x]])
    pz = np.array([[p.p00_z, p.p01_z], [p.p10_z, p.p11_z]])
    for ix in range(k_x):
        for iz in range(k_z):
            w1, w0 = 1.0, 1.0
            if ix == 0 and iz == 0:
                w1, w0 = p.kappa, 1.0 - p.kappa
            if ix > 0:
                w1 *= px[v[ix - 1, iz], 1]
                w0 *= px[v[ix - 1, iz], 0]
            if iz > 0:
                w1 *= pz[v[ix, iz - 1], 1]
                w0 *= pz[v[ix, iz - 1], 0]
            total = w1 + w0
            prob_one = w1 / total if total > 0 else 0.0
            v[ix, iz] = 1 if rng.random() < prob_one else 0
    return VisibilityMap(v)


def _sample_direction(rng) -> tuple[float, float]:
    # uniform over the realizable disk u_x^2 + u_z^2 <= 1, by rejection
    while True:
        ux = rng.uniform(-1.0, 1.0)
        uz = rng.uniform(-1.0, 1.0)
        if ux * ux + uz * uz <= 1.0:
            return ux, uz


def sample_scene(cfg: ArrayConfig, grid: PolarGrid,
                 markov_params: Markov2DParams, n_paths: int,
                 rng, gain_law: str = "complex-gaussian") -> ChannelScene:
    """Draw a scene of n_paths scatterers with gains, masks, and channel."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    rng = np.random.default_rng(rng)
    # keep scatterers where the quadratic-phase regime holds
    r_near = max(2.0 * fresnel_distance(cfg), 1.0 / grid.inv_r_hi)
    s_lo, s_hi = grid.inv_r_lo, 1.0 / r_near
    paths = []
    truth_idx = np.zeros(n_paths, dtype=int)
    h = np.zeros(cfg.m_total, dtype=complex)
    for l in range(n_paths):
        ux, uz = _sample_direction(rng)
        r = 1.0 / rng.uniform(s_lo, s_hi)
        scat = ScattererParams.from_dir_cosines(ux, uz, r)
        if gain_law == "complex-gaussian":
            gain = (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2)
        elif gain_law == "unit-modulus":
            gain = np.exp(2j * np.pi * rng.random())
        else:
            raise ValueError(f"unknown gain law {gain_law!r}")
        # a scatterer no sub-array can see is not a path; redraw all-zero
        # masks (bounded, so absorbing-zero priors still pass through)
        for _ in range(50):
            vr = sample_vr(markov_params, cfg.k_x, cfg.k_z, rng)
            if vr.mask.any():
                break
        paths.append(ChannelPath(complex(gain), scat, vr))
        truth_idx[l] = nearest_grid_index(grid, ux, uz, r)
        h += gain * steering_exact(cfg, scat) * vr.lift(cfg)
    return ChannelScene(tuple(paths), h, truth_idx)


def observe(scene: ChannelScene, snr_db: float, rng) -> Observation:
    """Add white complex Gaussian noise at the requested per-antenna SNR.

    SNR is average received signal power per antenna over noise power
    per antenna: ||h||^2 / (M / gamma).
    """
    h = scene.h
    m = h.size
    energy = float(np.vdot(h, h).real)
    if energy == 0.0:
        raise ValueError("degenerate scene: zero channel, SNR undefined")
    rng = np.random.default_rng(rng)
    noise_var = energy / (m * 10.0 ** (snr_db / 10.0))
    gamma = 1.0 / noise_var
    w = np.sqrt(noise_var / 2.0) * (rng.standard_normal(m)
                                    + 1j * rng.standard_normal(m))
    return Observation(h + w, gamma, snr_db)


def scene_to_text(scene: ChannelScene, obs: Observation = None) -> str:
    """Structured-text serialization of a scene (and optional observation)."""
    doc = {
        "paths": [
            {
                "gain": [p.gain.real, p.gain.imag],
                "azimuth_rad": p.scatterer.azimuth_rad,
                "elevation_rad": p.scatterer.elevation_rad,
                "distance_m": p.scatterer.distance_m,
                "vr": p.vr.mask.astype(int).tolist(),
            }
            for p in scene.paths
        ],
        "truth_grid_index": scene.truth_grid_index.tolist(),
        "h": _interleave(scene.h),
    }
    if obs is not None:
        doc["observation"] = {
            "y": _interleave(obs.y),
            "noise_precision": obs.noise_precision,
            "snr_db": obs.snr_db,
        }
    return json.dumps(doc, indent=1)


def scene_from_text(text: str):
    """Inverse of scene_to_text; returns (scene, observation-or-None)."""
    doc = json.loads(text)
    paths = tuple(
        ChannelPath(
            complex(p["gain"][0], p["gain"][1]),
            ScattererParams(p["azimuth_rad"], p["elevation_rad"], p["distance_m"]),
            VisibilityMap(np.array(p["vr"])),
        )
        for p in doc["paths"]
    )
    scene = ChannelScene(paths, _deinterleave(doc["h"]),
                         np.array(doc["truth_grid_index"], dtype=int))
    obs = None
    if "observation" in doc:
        o = doc["observation"]
        obs = Observation(_deinterleave(o["y"]), o["noise_precision"], o["snr_db"])
    return scene, obs


def scene_hash(scene: ChannelScene) -> str:
    """Short stable digest of a scene's ground truth."""
    return hashlib.sha256(scene_to_text(scene).encode()).hexdigest()[:12]


def _interleave(z: np.ndarray) -> list:
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out.tolist()


def _deinterleave(vals) -> np.ndarray:
    arr = np.asarray(vals, dtype=float)
    return arr[0::2] + 1j * arr[1::2]
