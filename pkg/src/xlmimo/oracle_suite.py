"""Small-instance cross-checks against the reference implementations.

Each check prints one pass/fail line; ``run_all`` returns the list of
failures. The test suite runs the same comparisons with pytest
assertions; this module exists so the checks are also reachable from
the command line.
"""

from __future__ import annotations

import numpy as np

from . import oracles
from .ep import lmmse_module_a, markov_module_b
from .geometry import ArrayConfig
from .polar_grid import build_fixed_grid, dictionary, lift_masks
from .priors import HierarchicalPriorParams, calibrate_markov
from .refine import gradient, log_posterior
from .vbi import compute_bound_t, run_ifvbi


def _report(name: str, ok: bool, detail: str, verbose: bool) -> bool:
    if verbose:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return ok


def check_power_iteration(verbose=True) -> bool:
    rng = np.random.default_rng(7)
    f = rng.standard_normal((16, 24)) + 1j * rng.standard_normal((16, 24))
    est = compute_bound_t(f, tol=1e-12, max_iter=5000, safety=0.0)
    ref = float(np.linalg.eigvalsh(f.conj().T @ f)[-1])
    err = abs(est - ref) / ref
    return _report("power iteration vs dense eigensolver", err < 1e-6,
                   f"rel err {err:.2e}", verbose)


def check_ifvbi_vs_exact(verbose=True) -> bool:
    rng = np.random.default_rng(11)
    m, q = 32, 16
    f = rng.standard_normal((m, q)) + 1j * rng.standard_normal((m, q))
    f /= np.linalg.norm(f, axis=0)
    x = np.zeros(q, dtype=complex)
    x[rng.choice(q, 3, replace=False)] = rng.standard_normal(3) \
        + 1j * rng.standard_normal(3)
    noise = 10 ** (-20 / 10) * np.linalg.norm(f @ x) ** 2 / m
    y = f @ x + np.sqrt(noise / 2) * (rng.standard_normal(m)
                                      + 1j * rng.standard_normal(m))
    priors = HierarchicalPriorParams.with_default_support(q, 3)
    mu_fast, _, _ = run_ifvbi(f, y, priors, n_iter=2000, tol=1e-12)
    mu_exact, _ = oracles.exact_vbi(f, y, priors, n_iter=500, tol=1e-12)
    err = np.linalg.norm(mu_fast - mu_exact) / np.linalg.norm(mu_exact)
    return _report("inverse-free VBI vs dense VBI", err < 1e-3,
                   f"rel err {err:.2e}", verbose)


def check_module_b_chain(verbose=True) -> bool:
    rng = np.random.default_rng(3)
    params = calibrate_markov(0.35, 0.25, 0.3)
    b_mean = rng.uniform(-0.5, 1.5, (1, 1, 4))
    b_var = rng.uniform(0.05, 1.0, (1, 1, 4))
    _, _, p_hat = markov_module_b(b_mean, b_var, params, n_sweeps=4)
    ref = oracles.enumerate_mask_posteriors(params, b_mean[0], b_var[0])
    err = float(np.max(np.abs(p_hat[0] - ref)))
    return _report("2D-Markov module vs chain enumeration", err < 1e-10,
                   f"max abs err {err:.2e}", verbose)


def check_lmmse(verbose=True) -> bool:
    rng = np.random.default_rng(5)
    h = rng.standard_normal((4, 3))
    y = rng.standard_normal(4)
    mean0 = rng.uniform(0.2, 0.8, 3)
    var0 = rng.uniform(0.1, 0.5, 3)
    post_mean, post_var, _, _ = lmmse_module_a(
        h, y, 2.0, mean0, var0, mean0.copy(), var0.copy())
    ref_mean, ref_cov = oracles.gaussian_conditioning(h, y, 2.0, mean0, var0)
    err = max(float(np.max(np.abs(post_mean - ref_mean))),
              float(np.max(np.abs(post_var - np.diag(ref_cov)))))
    return _report("LMMSE module vs Gaussian conditioning", err < 1e-10,
                   f"max abs err {err:.2e}", verbose)


def check_grid_gradient(verbose=True) -> bool:
    rng = np.random.default_rng(9)
    arr = ArrayConfig(8, 4, 2, 2, 30e9)
    grid = build_fixed_grid(arr, 4, 3, 2.0, n_r=2, r_max=30.0)
    a_full = dictionary(arr, grid)
    masks = rng.integers(0, 2, (grid.q_total, 2, 2)).astype(np.int8)
    u_dict = lift_masks(arr, masks)
    x_hat = np.zeros(grid.q_total, dtype=complex)
    active = np.array([1, 5, 9])
    x_hat[active] = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    y = (a_full * u_dict) @ x_hat + 0.05 * (
        rng.standard_normal(arr.m_total) + 1j * rng.standard_normal(arr.m_total))
    g_ux, _, _ = gradient(arr, y, grid, u_dict, x_hat, 1.3, active)

    def obj(vals):
        g2 = grid.copy()
        g2.dir_cos_x[active] = vals
        a2 = dictionary(arr, g2)
        return log_posterior(y, a2, u_dict, x_hat, 1.3)

    fd = oracles.finite_difference(obj, grid.dir_cos_x[active].copy())
    err = np.linalg.norm(g_ux[active] - fd) / np.linalg.norm(fd)
    return _report("grid gradient vs finite differences", err < 1e-5,
                   f"rel err {err:.2e}", verbose)


CHECKS = (check_power_iteration, check_ifvbi_vs_exact, check_module_b_chain,
          check_lmmse, check_grid_gradient)


def run_all(verbose=True):
    failures = [c.__name__ for c in CHECKS if not c(verbose)]
    if verbose:
        print(f"{len(CHECKS) - len(failures)}/{len(CHECKS)} oracle checks passed")
    return failures
