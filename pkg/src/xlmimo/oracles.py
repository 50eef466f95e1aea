"""Reference implementations for cross-checking the fast paths.

Everything here is deliberately written the slow, direct way (dense
inverses, exhaustive enumeration, finite differences) and shares no
code with the implementations it checks. Used by the test suite and
the ``oracle`` CLI subcommand.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.special import digamma, gammaln

from .priors import HierarchicalPriorParams, Markov2DParams, markov2d_log_prior


def exact_vbi(f_mat: np.ndarray, y: np.ndarray,
              priors: HierarchicalPriorParams, n_iter: int = 200,
              tol: float = 1e-10):
    """Mean-field VBI with the full dense covariance inverse.

    Same hierarchical model and factor schedule as the inverse-free
    estimator, but the gain update solves the exact QxQ system and the
    noise update uses the exact expected residual energy.
    """
    m, q = f_mat.shape
    pr = priors
    lam = np.broadcast_to(pr.lam, (q,)).astype(float)
    s_prob = lam.copy()
    rho_mean = lam * (pr.a / pr.b) + (1 - lam) * (pr.a_bar / pr.b_bar)
    rho_log_mean = np.log(rho_mean)
    gram = f_mat.conj().T @ f_mat
    fy = f_mat.conj().T @ y
    t_like = float(np.linalg.eigvalsh(gram)[-1])
    resid0 = y - f_mat @ (fy / t_like)
    err = float(np.vdot(resid0, resid0).real)
    gamma_mean = float(np.clip(m / err if err > 0 else np.inf, 1e-3, 1e6))
    mu = np.zeros(q, dtype=complex)
    for _ in range(n_iter):
        mu_old = mu
        cov = np.linalg.inv(gamma_mean * gram + np.diag(rho_mean))
        mu = cov @ (gamma_mean * fy)
        sigma_diag = np.diag(cov).real

        energy = np.abs(mu) ** 2 + sigma_diag
        rho_shape = s_prob * pr.a + (1 - s_prob) * pr.a_bar + 1.0
        rho_rate = s_prob * pr.b + (1 - s_prob) * pr.b_bar + energy
        rho_mean = rho_shape / rho_rate
        rho_log_mean = digamma(rho_shape) - np.log(rho_rate)
        log_c1 = (pr.a * np.log(pr.b) - gammaln(pr.a)
                  + (pr.a - 1) * rho_log_mean - pr.b * rho_mean)
        log_c0 = (pr.a_bar * np.log(pr.b_bar) - gammaln(pr.a_bar)
                  + (pr.a_bar - 1) * rho_log_mean - pr.b_bar * rho_mean)
        logit = np.log(lam) - np.log1p(-lam) + log_c1 - log_c0
        s_prob = 1.0 / (1.0 + np.exp(-np.clip(logit, -700, 700)))

        resid = y - f_mat @ mu
        expected_err = float(np.vdot(resid, resid).real) \
            + float(np.sum(cov * gram.T).real)
        gamma_mean = (pr.c + m) / (pr.d + expected_err)
        denom = np.linalg.norm(mu_old)
        if denom > 0 and np.linalg.norm(mu - mu_old) < tol * denom:
            break
    return mu, gamma_mean


def enumerate_mask_posteriors(params: Markov2DParams, b_mean: np.ndarray,
                              b_var: np.ndarray) -> np.ndarray:
    """Exact per-node visibility marginals by summing over all masks.

    b_mean / b_var are the (k_x, k_z) pseudo-observation moments. The
    mask weight is the directed Markov factorization times the Gaussian
    likelihood of each bit; works for any lattice small enough to
    enumerate.
    """
    k_x, k_z = b_mean.shape
    total = np.zeros((k_x, k_z))
    norm = 0.0
    for bits in itertools.product((0, 1), repeat=k_x * k_z):
        v = np.array(bits, dtype=np.int8).reshape(k_x, k_z)
        log_w = markov2d_log_prior(params, v)
        log_w += float(np.sum(-((v - b_mean) ** 2) / (2.0 * b_var)
                              - 0.5 * np.log(2.0 * np.pi * b_var)))
        w = np.exp(log_w)
        total += w * v
        norm += w
    return total / norm


def gaussian_conditioning(h_mat: np.ndarray, y: np.ndarray, noise_prec: float,
                          prior_mean: np.ndarray, prior_var: np.ndarray):
    """Posterior of v in y = H v + noise via joint-covariance conditioning."""
    n_obs = h_mat.shape[0]
    sig_vv = np.diag(prior_var)
    sig_vy = sig_vv @ h_mat.T
    sig_yy = h_mat @ sig_vv @ h_mat.T + np.eye(n_obs) / noise_prec
    gain = np.linalg.solve(sig_yy, sig_vy.T).T
    post_mean = prior_mean + gain @ (y - h_mat @ prior_mean)
    post_cov = sig_vv - gain @ sig_vy.T
    return post_mean, post_cov


def finite_difference(objective, values: np.ndarray, step: float = 1e-6):
    """Central-difference gradient of a scalar function of a vector."""
    grad = np.zeros_like(values, dtype=float)
    for i in range(values.size):
        bumped = values.copy()
        bumped[i] = values[i] + step
        hi = objective(bumped)
        bumped[i] = values[i] - step
        lo = objective(bumped)
        grad[i] = (hi - lo) / (2.0 * step)
    return grad
