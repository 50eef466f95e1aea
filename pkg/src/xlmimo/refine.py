"""Gradient-ascent refinement of the dynamic polar grid.

Maximizes the log posterior of the grid parameters — up to a constant,
the negative weighted residual energy of the current reconstruction —
by sequential block updates over (u_x, u_z, 1/r) with Armijo
backtracking. Only points in the caller's active set move; moves are
clipped to a trust radius measured in fixed-grid cells so neighboring
points cannot swap identities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ArrayConfig, steering_fresnel_dir
from .polar_grid import PolarGrid


@dataclass(frozen=True)
class GridRefineConfig:
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    max_backtracks: int = 20
    initial_steps: tuple = (1.0, 1.0, 1.0)   # per block, in trust-radius units
    trust_radius: float = 0.5                # per coordinate, in grid cells

    def __post_init__(self):
        if not 0.0 < self.armijo_shrink < 1.0:
            raise ValueError("armijo_shrink must lie in (0, 1)")
        if not 0.0 < self.armijo_slope < 1.0:
            raise ValueError("armijo_slope must lie in (0, 1)")
        if self.trust_radius <= 0:
            raise ValueError("trust_radius must be positive")


def log_posterior(y: np.ndarray, a_dict: np.ndarray, u_dict: np.ndarray,
                  x_hat: np.ndarray, gamma_hat: float) -> float:
    """-gamma_hat * ||y - (A o U) x||^2 (additive constant dropped)."""
    resid = y - (a_dict * u_dict) @ x_hat
    return -gamma_hat * float(np.vdot(resid, resid).real)


def _phase_derivatives(cfg: ArrayConfig, ux, uz, r):
    """Per-element phase derivatives wrt (u_x, u_z, 1/r), each (M, n)."""
    d = cfg.spacing_m
    k = 2.0 * np.pi / cfg.wavelength_m
    ddx = (cfg.delta_x() * d)[None, :, None]          # (1, m_x, 1)
    ddz = (cfg.delta_z() * d)[:, None, None]          # (m_z, 1, 1)
    ux = np.asarray(ux)[None, None, :]
    uz = np.asarray(uz)[None, None, :]
    rr = np.asarray(r)[None, None, :]
    m = cfg.m_total
    zeros_shape = (cfg.m_z, cfg.m_x, ux.shape[-1])
    d_ux = np.broadcast_to(k * (ddx + ddx**2 * ux / rr), zeros_shape)
    d_uz = np.broadcast_to(k * (ddz + ddz**2 * uz / rr), zeros_shape)
    d_invr = np.broadcast_to(-k * (ddx**2 * (1 - ux**2)
                                   + ddz**2 * (1 - uz**2)) / 2.0, zeros_shape)
    return (d_ux.reshape(m, -1), d_uz.reshape(m, -1), d_invr.reshape(m, -1))


def gradient(cfg: ArrayConfig, y: np.ndarray, grid: PolarGrid,
             u_dict: np.ndarray, x_hat: np.ndarray, gamma_hat: float,
             active: np.ndarray):
    """Analytic gradients of the log posterior at the active points.

    Returns three length-Q arrays (zero off the active set) for the
    u_x, u_z, and 1/r blocks.
    """
    q_total = grid.q_total
    g_ux = np.zeros(q_total)
    g_uz = np.zeros(q_total)
    g_invr = np.zeros(q_total)
    if active.size == 0:
        return g_ux, g_uz, g_invr
    ux = grid.dir_cos_x[active]
    uz = grid.dir_cos_z[active]
    rr = grid.distance_m[active]
    cols = steering_fresnel_dir(cfg, ux, uz, rr) * u_dict[:, active]
    resid = y - cols @ x_hat[active]
    d_ux, d_uz, d_invr = _phase_derivatives(cfg, ux, uz, rr)
    # d residual / d coordinate = -x_q * (j * dpsi) o column
    weights = np.conj(resid)[:, None] * (1j * cols)
    proj_ux = (weights * d_ux).sum(axis=0)
    proj_uz = (weights * d_uz).sum(axis=0)
    proj_invr = (weights * d_invr).sum(axis=0)
    g_ux[active] = 2.0 * gamma_hat * (x_hat[active] * proj_ux).real
    g_uz[active] = 2.0 * gamma_hat * (x_hat[active] * proj_uz).real
    g_invr[active] = 2.0 * gamma_hat * (x_hat[active] * proj_invr).real
    return g_ux, g_uz, g_invr


def _objective_for(cfg, y, grid_arrays, u_dict, x_hat, gamma_hat, active,
                   frozen_recon):
    """L with only the active columns rebuilt from candidate coordinates."""
    ux, uz, rr = grid_arrays
    cols = steering_fresnel_dir(cfg, ux[active], uz[active], rr[active]) \
        * u_dict[:, active]
    resid = y - frozen_recon - cols @ x_hat[active]
    return -gamma_hat * float(np.vdot(resid, resid).real)


def refine_step(cfg: ArrayConfig, y: np.ndarray, grid: PolarGrid,
                u_dict: np.ndarray, x_hat: np.ndarray, gamma_hat: float,
                active: np.ndarray, rcfg: GridRefineConfig = GridRefineConfig()):
    """One sequential block-ascent pass over (u_x, u_z, 1/r).

    Mutates the grid's dynamic arrays in place and returns the pair
    (objective before, objective after), both evaluated on the same
    fixed-inactive-residual path so the after value is never below the
    before value: each block either takes an Armijo-accepted step or
    is skipped.
    """
    du_x, du_z, ds = grid.angle_cell_sizes()
    trust = (rcfg.trust_radius * du_x, rcfg.trust_radius * du_z,
             rcfg.trust_radius * ds)
    inv_lo, inv_hi = grid.inv_r_lo, grid.inv_r_hi

    # residual contribution of the inactive columns stays fixed all pass
    inactive_mask = np.ones(grid.q_total, dtype=bool)
    inactive_mask[active] = False
    live = np.flatnonzero((x_hat != 0) & inactive_mask)
    if live.size:
        cols = steering_fresnel_dir(cfg, grid.dir_cos_x[live],
                                    grid.dir_cos_z[live],
                                    grid.distance_m[live]) * u_dict[:, live]
        frozen_recon = cols @ x_hat[live]
    else:
        frozen_recon = np.zeros_like(y)

    arrays = (grid.dir_cos_x, grid.dir_cos_z, grid.distance_m)
    current_l = _objective_for(cfg, y, arrays, u_dict, x_hat, gamma_hat,
                               active, frozen_recon)
    l_before = current_l

    for block in range(3):
        g_all = gradient(cfg, y, grid, u_dict, x_hat, gamma_hat, active)[block]
        g = g_all[active]
        gmax = np.max(np.abs(g)) if g.size else 0.0
        if gmax == 0.0:
            continue
        if block == 0:
            vals = grid.dir_cos_x[active]
        elif block == 1:
            vals = grid.dir_cos_z[active]
        else:
            vals = 1.0 / grid.distance_m[active]
        step = rcfg.initial_steps[block] * trust[block] / gmax
        for _ in range(rcfg.max_backtracks):
            move = np.clip(step * g, -trust[block], trust[block])
            if block < 2:
                cand = np.clip(vals + move, -1.0, 1.0)
            else:
                cand = np.clip(vals + move, inv_lo, inv_hi)
            delta = cand - vals
            cand_arrays = [a.copy() for a in arrays]
            if block == 0:
                cand_arrays[0][active] = cand
            elif block == 1:
                cand_arrays[1][active] = cand
            else:
                cand_arrays[2][active] = 1.0 / cand
            cand_l = _objective_for(cfg, y, cand_arrays, u_dict, x_hat,
                                    gamma_hat, active, frozen_recon)
            if cand_l >= current_l + rcfg.armijo_slope * float(g @ delta):
                grid.dir_cos_x[:] = cand_arrays[0]
                grid.dir_cos_z[:] = cand_arrays[1]
                grid.distance_m[:] = cand_arrays[2]
                current_l = cand_l
                break
            step *= rcfg.armijo_shrink
        # all backtracks failed: leave this block unchanged
    return l_before, current_l
