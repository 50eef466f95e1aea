"""Channel-estimation and VR-detection performance metrics."""

from __future__ import annotations

import numpy as np

from .polar_grid import PolarGrid
from .scene import ChannelScene


def nmse(h_hat: np.ndarray, h_true: np.ndarray) -> float:
    """||h_hat - h||^2 / ||h||^2."""
    if h_hat.shape != h_true.shape:
        raise ValueError("length mismatch")
    denom = float(np.vdot(h_true, h_true).real)
    if denom == 0.0:
        raise ValueError("true channel is zero; NMSE undefined")
    diff = h_hat - h_true
    return float(np.vdot(diff, diff).real) / denom


def vr_error_rate(scene: ChannelScene, masks: np.ndarray,
                  final_grid: PolarGrid = None) -> float:
    """Fraction of mismatched visibility bits at the truth-nearest grid points.

    masks is the (Q, k_x, k_z) stack of detected masks; each path's
    truth mask is compared entrywise against the detected mask at the
    grid point nearest the true scatterer position. By default that is
    the scene's frozen fixed-grid index; when the estimator refined the
    grid, pass its final grid so "nearest" reflects where its points
    actually ended up.
    """
    n_paths = len(scene.paths)
    k_x, k_z = scene.paths[0].vr.mask.shape
    wrong = 0
    for path, qi in zip(scene.paths, scene.truth_grid_index):
        if final_grid is not None:
            s = path.scatterer
            qi = _nearest_dynamic_index(final_grid, s.dir_cos_x, s.dir_cos_z,
                                        s.distance_m)
        wrong += int(np.abs(path.vr.mask - masks[qi]).sum())
    return wrong / (k_x * k_z * n_paths)


def _nearest_dynamic_index(grid: PolarGrid, dir_cos_x, dir_cos_z,
                           distance_m) -> int:
    """Nearest point of the (possibly refined) dynamic grid, same metric."""
    du_x, du_z, ds = grid.angle_cell_sizes()
    d2 = ((grid.dir_cos_x - dir_cos_x) / du_x) ** 2 \
        + ((grid.dir_cos_z - dir_cos_z) / du_z) ** 2 \
        + ((1.0 / grid.distance_m - 1.0 / distance_m) / ds) ** 2
    return int(np.argmin(d2))
