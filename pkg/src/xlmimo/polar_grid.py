"""Polar-domain grid, steering dictionary, and visibility lift.

The grid jointly samples direction cosines and distance: angle points
uniform on [-1, 1] per axis (endpoints included), and for each angle
pair the *inverse* distance sampled uniformly between 1/r_max and
1/r_min. The far end r_max is capped at twice the Rayleigh distance,
standing in for the far-field ring.

The grid carries two copies of its points: the immutable construction
values (the refinement module's reset/reference) and the dynamic
values it is allowed to move.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ArrayConfig,
    fresnel_distance,
    rayleigh_distance,
    steering_fresnel_dir,
)


@dataclass
class PolarGrid:
    """Dynamic polar-domain grid over Q points.

    dir_cos_x, dir_cos_z, distance_m are the live (refinable) point
    parameters; fixed_* are the frozen construction values.
    """

    dir_cos_x: np.ndarray
    dir_cos_z: np.ndarray
    distance_m: np.ndarray
    m1: int
    m2: int
    distances_per_angle: np.ndarray
    inv_r_lo: float     # 1 / r_max
    inv_r_hi: float     # 1 / r_min
    fixed_dir_cos_x: np.ndarray = field(default=None)
    fixed_dir_cos_z: np.ndarray = field(default=None)
    fixed_distance_m: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.fixed_dir_cos_x is None:
            self.fixed_dir_cos_x = self.dir_cos_x.copy()
            self.fixed_dir_cos_z = self.dir_cos_z.copy()
            self.fixed_distance_m = self.distance_m.copy()
        self.fixed_dir_cos_x.setflags(write=False)
        self.fixed_dir_cos_z.setflags(write=False)
        self.fixed_distance_m.setflags(write=False)

    @property
    def q_total(self) -> int:
        return self.dir_cos_x.size

    def copy(self) -> "PolarGrid":
        return PolarGrid(
            self.dir_cos_x.copy(), self.dir_cos_z.copy(), self.distance_m.copy(),
            self.m1, self.m2, self.distances_per_angle,
            self.inv_r_lo, self.inv_r_hi,
            self.fixed_dir_cos_x, self.fixed_dir_cos_z, self.fixed_distance_m,
        )

    def angle_cell_sizes(self) -> tuple[float, float, float]:
        """Fixed-grid spacing per coordinate (u_x, u_z, 1/r)."""
        du_x = 2.0 / (self.m1 - 1) if self.m1 > 1 else 2.0
        du_z = 2.0 / (self.m2 - 1) if self.m2 > 1 else 2.0
        n_r = int(self.distances_per_angle[0])
        ds = ((self.inv_r_hi - self.inv_r_lo) / (n_r - 1)) if n_r > 1 \
            else (self.inv_r_hi - self.inv_r_lo)
        return du_x, du_z, ds

    def save(self, path) -> None:
        """One record per point: u_x u_z r (whitespace-delimited text)."""
        with open(path, "w") as f:
            f.write(f"# polar grid Q={self.q_total} m1={self.m1} m2={self.m2} "
                    f"inv_r=[{float(self.inv_r_lo)!r},{float(self.inv_r_hi)!r}]\n")
            for ux, uz, r in zip(self.dir_cos_x, self.dir_cos_z, self.distance_m):
                f.write(f"{float(ux)!r} {float(uz)!r} {float(r)!r}\n")

    @staticmethod
    def load(path) -> "PolarGrid":
        with open(path) as f:
            header = f.readline()
            rows = np.array([[float(t) for t in line.split()]
                             for line in f if line.strip()])
        meta = {}
        for tok in header.lstrip("# ").split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                meta[k] = v
        inv_lo, inv_hi = (float(x) for x in meta["inv_r"].strip("[]").split(","))
        m1, m2, q = int(meta["m1"]), int(meta["m2"]), int(meta["Q"])
        n_r = q // (m1 * m2)
        return PolarGrid(rows[:, 0], rows[:, 1], rows[:, 2], m1, m2,
                         np.full(m1 * m2, n_r, dtype=int), inv_lo, inv_hi)


@dataclass(frozen=True)
class VisibilityMap:
    """Binary sub-array visibility mask, shape (k_x, k_z)."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if not np.isin(m, (0, 1)).all():
            raise ValueError("visibility mask entries must be 0 or 1")
        object.__setattr__(self, "mask", m.astype(np.int8))

    def lift(self, cfg: ArrayConfig) -> np.ndarray:
        """Element-level visibility vector vec(V kron ones(n_x, n_z)), length M."""
        if self.mask.shape != (cfg.k_x, cfg.k_z):
            raise ValueError(
                f"mask shape {self.mask.shape} != ({cfg.k_x}, {cfg.k_z})")
        block = np.kron(self.mask, np.ones((cfg.n_x, cfg.n_z), dtype=np.int8))
        return block.flatten(order="F").astype(float)


def build_fixed_grid(cfg: ArrayConfig, m1: int, m2: int, r_min: float,
                     n_r: int = 4, r_max: float = None) -> PolarGrid:
    """Construct the fixed polar grid (and its dynamic working copy).

    Angle points include the endpoints +-1. Distances per angle pair are
    uniform in 1/r between 1/r_max and 1/r_min, identical for every
    angle. Deterministic: no randomness.
    """
    if m1 < 1 or m2 < 1 or n_r < 1:
        raise ValueError("grid sizes must be >= 1")
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    if r_min <= fresnel_distance(cfg):
        raise ValueError(
            f"r_min={r_min} must exceed the Fresnel distance "
            f"{fresnel_distance(cfg):.3g} for the quadratic phase to hold")
    if r_max is None:
        r_max = 2.0 * rayleigh_distance(cfg)
    if r_max <= r_min:
        raise ValueError("r_max must exceed r_min")

    ux = np.linspace(-1.0, 1.0, m1) if m1 > 1 else np.array([0.0])
    uz = np.linspace(-1.0, 1.0, m2) if m2 > 1 else np.array([0.0])
    inv_lo, inv_hi = 1.0 / r_max, 1.0 / r_min
    s = np.linspace(inv_lo, inv_hi, n_r) if n_r > 1 else np.array([inv_hi])
    r = 1.0 / s

    # point order: angle pair (m1-major over m2), then distance
    gx = np.repeat(np.repeat(ux, m2), n_r)
    gz = np.repeat(np.tile(uz, m1), n_r)
    gr = np.tile(r, m1 * m2)
    counts = np.full(m1 * m2, n_r, dtype=int)
    return PolarGrid(gx, gz, gr, m1, m2, counts, inv_lo, inv_hi)


def dictionary(cfg: ArrayConfig, grid: PolarGrid) -> np.ndarray:
    """Fresnel steering dictionary, complex (M, Q); every column unit-norm."""
    return steering_fresnel_dir(cfg, grid.dir_cos_x, grid.dir_cos_z,
                                grid.distance_m)


def vr_dictionary(cfg: ArrayConfig, masks) -> np.ndarray:
    """Stack of element-level visibility lifts, real (M, Q)."""
    cols = [m.lift(cfg) if isinstance(m, VisibilityMap)
            else VisibilityMap(m).lift(cfg) for m in masks]
    return np.column_stack(cols) if cols else np.zeros((cfg.m_total, 0))


def effective_sensing_matrix(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Elementwise product of steering dictionary and visibility lift."""
    if a.shape != u.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {u.shape}")
    return a * u


def lift_masks(cfg: ArrayConfig, masks: np.ndarray) -> np.ndarray:
    """Vectorized lift of a (Q, k_x, k_z) mask stack to an (M, Q) dictionary."""
    rep = np.repeat(np.repeat(masks, cfg.n_x, axis=1), cfg.n_z, axis=2)
    return rep.transpose(2, 1, 0).reshape(cfg.m_total, -1).astype(float)


def nearest_grid_index(grid: PolarGrid, dir_cos_x: float, dir_cos_z: float,
                       distance_m: float) -> int:
    """Index of the fixed-grid point closest in cell-normalized (u_x, u_z, 1/r)."""
    du_x, du_z, ds = grid.angle_cell_sizes()
    d2 = ((grid.fixed_dir_cos_x - dir_cos_x) / du_x) ** 2 \
        + ((grid.fixed_dir_cos_z - dir_cos_z) / du_z) ** 2 \
        + ((1.0 / grid.fixed_distance_m - 1.0 / distance_m) / ds) ** 2
    return int(np.argmin(d2))
