"""Structured expectation propagation for visibility detection.

Given the channel-estimation pass's gains and noise precision, each
sub-array's observation is a small linear model in its binary
visibility bits. Two modules exchange extrinsic Gaussian messages:
Module A runs per-sub-array LMMSE on the real-valued lift of that
model; Module B projects back to binary variables and runs sum-product
message passing over each retained grid point's sub-array lattice
under the 2D Markov prior (or an independent Bernoulli prior for the
conventional-EP variant). A negative-variance guard and damping keep
the loopy exchange stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ArrayConfig
from .kernels import PROB_CEIL, PROB_FLOOR, bp_sweeps
from .priors import Markov2DParams


def subarray_partition(cfg: ArrayConfig) -> np.ndarray:
    """Flat antenna indices per sub-array, shape (k_x, k_z, N).

    Uses the package-wide x-major element ordering; the sets partition
    range(M).
    """
    idx = np.arange(cfg.m_total).reshape(cfg.m_z, cfg.m_x)  # [m_z, m_x]
    out = np.empty((cfg.k_x, cfg.k_z, cfg.n_per_subarray), dtype=int)
    for kx in range(cfg.k_x):
        for kz in range(cfg.k_z):
            block = idx[kz * cfg.n_z:(kz + 1) * cfg.n_z,
                        kx * cfg.n_x:(kx + 1) * cfg.n_x]
            out[kx, kz] = np.sort(block.reshape(-1))
    return out


def polar_filter(x_hat: np.ndarray, gamma_hat: float,
                 c_thresh: float = 3.0) -> np.ndarray:
    """Indices of gains whose energy clears c_thresh times the noise power."""
    if gamma_hat <= 0:
        raise ValueError("noise precision must be positive")
    eps = c_thresh / gamma_hat
    return np.flatnonzero(np.abs(x_hat) ** 2 > eps)


@dataclass
class SubarrayModel:
    """Real-lifted per-sub-array sensing matrices over the retained points."""

    index_sets: np.ndarray       # (k_x, k_z, N) antenna indices
    h_real: np.ndarray           # (k_x, k_z, 2N, n_omega)
    omega: np.ndarray            # retained grid indices


def build_subarray_models(a_dict: np.ndarray, x_hat: np.ndarray,
                          omega: np.ndarray, index_sets: np.ndarray) -> SubarrayModel:
    """Gain-scaled, row-restricted steering columns, stacked real over imag."""
    if omega.size == 0:
        raise ValueError("retained index set is empty")
    k_x, k_z, n = index_sets.shape
    cols = a_dict[:, omega] * x_hat[omega][None, :]
    h_real = np.empty((k_x, k_z, 2 * n, omega.size))
    for kx in range(k_x):
        for kz in range(k_z):
            block = cols[index_sets[kx, kz], :]
            h_real[kx, kz, :n] = block.real
            h_real[kx, kz, n:] = block.imag
    return SubarrayModel(index_sets, h_real, omega.copy())


def lmmse_module_a(h_tilde: np.ndarray, y_tilde: np.ndarray, noise_prec: float,
                   a_pri_mean: np.ndarray, a_pri_var: np.ndarray,
                   prev_b_mean: np.ndarray, prev_b_var: np.ndarray):
    """One sub-array's LMMSE posterior and its extrinsic toward Module B.

    The posterior inverts only the (small) retained-point system. Any
    element whose extrinsic variance would be non-positive keeps its
    previous Module-B prior instead.
    """
    if (a_pri_var <= 0).any():
        raise ValueError("prior variances must be positive")
    n_omega = h_tilde.shape[1]
    gram = noise_prec * h_tilde.T @ h_tilde
    gram[np.diag_indices(n_omega)] += 1.0 / a_pri_var
    cov = np.linalg.inv(gram)
    post_mean = cov @ (a_pri_mean / a_pri_var + noise_prec * h_tilde.T @ y_tilde)
    post_var = np.diag(cov).copy()

    inv_diff = 1.0 / post_var - 1.0 / a_pri_var
    ok = inv_diff > 0
    b_var = prev_b_var.copy()
    b_mean = prev_b_mean.copy()
    b_var[ok] = 1.0 / inv_diff[ok]
    b_mean[ok] = b_var[ok] * (post_mean[ok] / post_var[ok]
                              - a_pri_mean[ok] / a_pri_var[ok])
    return post_mean, post_var, b_mean, b_var


def _likelihoods(b_mean: np.ndarray, b_var: np.ndarray):
    """Per-node pseudo-observation likelihoods of v=1 and v=0, max-normalized."""
    l1 = -(1.0 - b_mean) ** 2 / (2.0 * b_var)
    l0 = -(b_mean) ** 2 / (2.0 * b_var)
    top = np.maximum(l1, l0)
    return np.exp(l1 - top), np.exp(l0 - top)


def markov_module_b(b_mean: np.ndarray, b_var: np.ndarray,
                    params: Markov2DParams, n_sweeps: int = 10):
    """Sum-product posteriors of the visibility bits under the 2D Markov prior.

    Inputs are (n_omega, k_x, k_z) pseudo-observation moments; each
    retained grid point's lattice is an independent sub-graph. Returns
    Bernoulli posterior means/variances and the posterior probabilities.
    """
    if (b_var <= 0).any():
        raise ValueError("pseudo-observation variances must be positive")
    n_omega, k_x, k_z = b_mean.shape
    pi1, pi0 = _likelihoods(b_mean, b_var)
    gl = np.full((n_omega, k_x, k_z), 0.5)
    gr = np.full((n_omega, k_x, k_z), 0.5)
    gt = np.full((n_omega, k_x, k_z), 0.5)
    gb = np.full((n_omega, k_x, k_z), 0.5)
    # the corner's phantom left slot carries the steady-state prior
    gl[:, 0, 0] = params.kappa
    bp_sweeps(gl, gr, gt, gb, pi1, pi0,
              params.p01_x, params.p10_x, params.p01_z, params.p10_z,
              int(n_sweeps))
    w1 = gl * gr * gt * gb
    w0 = (1.0 - gl) * (1.0 - gr) * (1.0 - gt) * (1.0 - gb)
    pi_out = w1 / np.maximum(w1 + w0, PROB_FLOOR)
    num = pi1 * pi_out
    den = num + pi0 * (1.0 - pi_out)
    p_hat = np.clip(num / np.maximum(den, PROB_FLOOR), PROB_FLOOR, PROB_CEIL)
    return p_hat, p_hat * (1.0 - p_hat), p_hat


def iid_module_b(b_mean: np.ndarray, b_var: np.ndarray, kappa: float,
                 n_sweeps: int = 0):
    """Independent-Bernoulli counterpart of the Markov module."""
    if (b_var <= 0).any():
        raise ValueError("pseudo-observation variances must be positive")
    pi1, pi0 = _likelihoods(b_mean, b_var)
    num = kappa * pi1
    den = num + (1.0 - kappa) * pi0
    p_hat = np.clip(num / np.maximum(den, PROB_FLOOR), PROB_FLOOR, PROB_CEIL)
    return p_hat, p_hat * (1.0 - p_hat), p_hat


def extrinsic_b_to_a(b_post_mean: np.ndarray, b_post_var: np.ndarray,
                     b_pri_mean: np.ndarray, b_pri_var: np.ndarray,
                     a_pri_mean: np.ndarray, a_pri_var: np.ndarray,
                     eta: float):
    """Damped extrinsic update of Module A's prior, with the variance guard.

    Elements where the Bernoulli posterior variance does not shrink
    below the pseudo-observation variance keep their previous prior
    untouched; the rest blend the raw extrinsic with the previous value
    by the damping factor.
    """
    ok = b_post_var < b_pri_var
    new_mean = a_pri_mean.copy()
    new_var = a_pri_var.copy()
    inv_var = 1.0 / b_post_var[ok] - 1.0 / b_pri_var[ok]
    raw_var = 1.0 / inv_var
    raw_mean = raw_var * (b_post_mean[ok] / b_post_var[ok]
                          - b_pri_mean[ok] / b_pri_var[ok])
    new_mean[ok] = eta * raw_mean + (1.0 - eta) * a_pri_mean[ok]
    new_var[ok] = eta * raw_var + (1.0 - eta) * a_pri_var[ok]
    return new_mean, new_var


def run_structured_ep(cfg: ArrayConfig, a_dict: np.ndarray, x_hat: np.ndarray,
                      gamma_hat: float, y: np.ndarray,
                      markov_params: Markov2DParams, omega: np.ndarray,
                      n_iter: int = 5, n_sweeps: int = 10, eta: float = 0.5,
                      use_markov: bool = True, index_sets: np.ndarray = None):
    """Full VR detection pass; returns (masks, posterior probs over omega).

    Masks for grid points outside the retained set are all-zero; the
    caller decides what to feed at the first outer iteration (all-ones
    per the overall algorithm's initialization).
    """
    if omega.size == 0:
        raise ValueError("retained index set is empty; skip the VR update")
    if index_sets is None:
        index_sets = subarray_partition(cfg)
    model = build_subarray_models(a_dict, x_hat, omega, index_sets)
    k_x, k_z, n = index_sets.shape
    n_omega = omega.size
    # real lift halves the per-component noise variance
    noise_prec = 2.0 * gamma_hat

    kap = markov_params.kappa
    a_mean = np.full((n_omega, k_x, k_z), kap)
    a_var = np.full((n_omega, k_x, k_z), max(kap * (1.0 - kap), 1e-3))
    b_mean = a_mean.copy()
    b_var = a_var.copy()
    y_tilde = np.empty((k_x, k_z, 2 * n))
    for kx in range(k_x):
        for kz in range(k_z):
            yk = y[index_sets[kx, kz]]
            y_tilde[kx, kz, :n] = yk.real
            y_tilde[kx, kz, n:] = yk.imag

    p_hat = np.full((n_omega, k_x, k_z), kap)
    for _ in range(n_iter):
        for kx in range(k_x):
            for kz in range(k_z):
                _, _, bm, bv = lmmse_module_a(
                    model.h_real[kx, kz], y_tilde[kx, kz], noise_prec,
                    a_mean[:, kx, kz], a_var[:, kx, kz],
                    b_mean[:, kx, kz], b_var[:, kx, kz])
                b_mean[:, kx, kz] = bm
                b_var[:, kx, kz] = bv
        if use_markov:
            post_mean, post_var, p_hat = markov_module_b(
                b_mean, b_var, markov_params, n_sweeps)
        else:
            post_mean, post_var, p_hat = iid_module_b(
                b_mean, b_var, markov_params.kappa)
        a_mean, a_var = extrinsic_b_to_a(post_mean, post_var, b_mean, b_var,
                                         a_mean, a_var, eta)

    masks = np.zeros((x_hat.size, k_x, k_z), dtype=np.int8)
    masks[omega] = (p_hat >= 0.5).astype(np.int8)
    return masks, p_hat
