import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gammaln

from xlmimo import oracles
from xlmimo.priors import HierarchicalPriorParams
from xlmimo.vbi import (
    compute_bound_t,
    expected_g,
    init_state,
    relaxed_objective,
    run_ifvbi,
    update_qgamma,
    update_qrho_qs,
    update_qx,
    update_z,
)


def random_cs_instance(rng, m=32, q=16, k=3, snr_db=20.0):
    f = rng.standard_normal((m, q)) + 1j * rng.standard_normal((m, q))
    f /= np.linalg.norm(f, axis=0)
    x = np.zeros(q, dtype=complex)
    support = rng.choice(q, k, replace=False)
    x[support] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    clean = f @ x
    noise_var = np.linalg.norm(clean) ** 2 / m * 10 ** (-snr_db / 10)
    y = clean + np.sqrt(noise_var / 2) * (rng.standard_normal(m)
                                          + 1j * rng.standard_normal(m))
    return f, x, y, support


class TestBoundT:
    def test_orthonormal_columns(self):
        rng = np.random.default_rng(0)
        a = np.linalg.qr(rng.standard_normal((20, 8))
                         + 1j * rng.standard_normal((20, 8)))[0]
        t = compute_bound_t(a, tol=1e-10, safety=0.01)
        assert t == pytest.approx(1.01, rel=1e-6)

    def test_scaled_identity(self):
        t = compute_bound_t(2.0 * np.eye(6), tol=1e-10, safety=0.01)
        assert t == pytest.approx(4.0 * 1.01, rel=1e-6)

    def test_matches_dense_eigensolver(self):
        rng = np.random.default_rng(1)
        f = rng.standard_normal((16, 24)) + 1j * rng.standard_normal((16, 24))
        t = compute_bound_t(f, tol=1e-13, max_iter=20000, safety=0.0)
        ref = np.linalg.eigvalsh(f.conj().T @ f)[-1]
        assert abs(t - ref) / ref < 1e-6

    def test_rejects_zero_matrix(self):
        with pytest.raises(ValueError):
            compute_bound_t(np.zeros((4, 4)))

    def test_convergence_error(self):
        rng = np.random.default_rng(2)
        f = rng.standard_normal((30, 30))
        with pytest.raises(RuntimeError):
            compute_bound_t(f, tol=1e-16, max_iter=2)


class TestQxUpdate:
    def test_infinite_precision_pins_zero(self):
        rng = np.random.default_rng(3)
        f, _, y, _ = random_cs_instance(rng)
        priors = HierarchicalPriorParams.with_default_support(16, 3)
        state = init_state(f, y, priors)
        state.rho_mean = np.full(16, 1e18)
        update_qx(state, f, y)
        assert np.max(np.abs(state.mu)) < 1e-12

    def test_tight_bound_reproduces_exact_mean(self):
        # F^H F = T I exactly: one qx step from z = previous mean is exact
        rng = np.random.default_rng(4)
        q = 8
        f = np.linalg.qr(rng.standard_normal((24, q))
                         + 1j * rng.standard_normal((24, q)))[0]
        y = rng.standard_normal(24) + 1j * rng.standard_normal(24)
        priors = HierarchicalPriorParams.with_default_support(q, 2)
        state = init_state(f, y, priors, t_bound=1.0)
        rho = np.full(q, 0.7)
        state.rho_mean = rho
        state.gamma_mean = 2.0
        state.z = rng.standard_normal(q) + 1j * rng.standard_normal(q)
        update_qx(state, f, y)
        exact = np.linalg.solve(
            2.0 * f.conj().T @ f + np.diag(rho), 2.0 * f.conj().T @ y)
        assert np.allclose(state.mu, exact, atol=1e-10)

    def test_qx_z_fixed_point_matches_direct_inverse(self):
        # frozen (gamma, rho): iterating (qx, z) converges to the dense solve
        rng = np.random.default_rng(5)
        f, _, y, _ = random_cs_instance(rng, m=32, q=16)
        priors = HierarchicalPriorParams.with_default_support(16, 3)
        state = init_state(f, y, priors)
        rho = np.full(16, 0.9)
        state.rho_mean = rho
        state.gamma_mean = 50.0
        for _ in range(4000):
            update_qx(state, f, y)
            update_z(state)
        direct = np.linalg.solve(
            50.0 * f.conj().T @ f + np.diag(rho), 50.0 * f.conj().T @ y)
        rel = np.linalg.norm(state.mu - direct) / np.linalg.norm(direct)
        assert rel < 1e-3


class TestGammaUpdate:
    def test_clean_fixed_point(self):
        rng = np.random.default_rng(6)
        f, _, _, _ = random_cs_instance(rng, m=16, q=8)
        priors = HierarchicalPriorParams(lam=np.full(8, 0.3))
        z = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        y = f @ z
        state = init_state(f, y, priors)
        state.z = z
        state.mu = z.copy()
        state.sigma_diag = np.full(8, 1e-30)
        update_qx(state, f, y)  # refresh caches at the new z
        state.mu = z.copy()
        state.sigma_diag = np.full(8, 1e-30)
        update_qgamma(state, priors)
        assert state.gamma_shape == pytest.approx(priors.c + 16)
        assert state.gamma_rate == pytest.approx(priors.d, abs=1e-12)

    def test_shape_is_c_plus_m(self):
        rng = np.random.default_rng(7)
        f, _, y, _ = random_cs_instance(rng, m=64, q=16)
        priors = HierarchicalPriorParams.with_default_support(16, 3, c=1e-6)
        state = init_state(f, y, priors)
        assert state.gamma_shape == pytest.approx(64 + 1e-6)

    def test_expected_g_dominates_residual(self):
        # majorization: <g> >= ||y - F mu||^2 on random states
        rng = np.random.default_rng(8)
        for _ in range(25):
            f, _, y, _ = random_cs_instance(rng, m=24, q=12)
            priors = HierarchicalPriorParams.with_default_support(12, 3)
            state = init_state(f, y, priors)
            state.z = rng.standard_normal(12) + 1j * rng.standard_normal(12)
            update_qx(state, f, y)
            g = expected_g(state)
            resid = y - f @ state.mu
            assert g >= float(np.vdot(resid, resid).real) - 1e-9


class TestRhoSupportUpdate:
    def test_large_energy_activates(self):
        priors = HierarchicalPriorParams(lam=np.array([0.1, 0.1]))
        rng = np.random.default_rng(9)
        f = np.eye(2, dtype=complex)
        state = init_state(f, np.ones(2, dtype=complex), priors)
        state.mu = np.array([10.0 + 0j, 1e-4 + 0j])
        state.sigma_diag = np.array([1e-3, 1e-3])
        update_qrho_qs(state, priors)
        assert state.s_prob[0] > 0.99
        assert state.rho_mean[0] < state.rho_mean[1]

    def test_lambda_one_forces_support(self):
        priors = HierarchicalPriorParams(lam=np.array([1.0 - 1e-15]))
        f = np.eye(1, dtype=complex)
        state = init_state(f, np.zeros(1, dtype=complex), priors)
        state.mu = np.array([1e-8 + 0j])
        state.sigma_diag = np.array([1e-8])
        update_qrho_qs(state, priors)
        assert state.s_prob[0] > 0.999999

    def test_posterior_matches_quadrature_bayes(self):
        # oracle: rho moments by quadrature, then the two-point Bayes rule
        priors = HierarchicalPriorParams(lam=np.array([0.2]))
        f = np.eye(1, dtype=complex)
        state = init_state(f, np.ones(1, dtype=complex), priors)
        state.mu = np.array([0.8 - 0.4j])
        state.sigma_diag = np.array([0.05])
        state.s_prob = np.array([0.37])
        update_qrho_qs(state, priors)

        sbar = 0.37
        energy = abs(0.8 - 0.4j) ** 2 + 0.05
        shape = sbar * priors.a + (1 - sbar) * priors.a_bar + 1.0
        rate = sbar * priors.b + (1 - sbar) * priors.b_bar + energy

        def gamma_pdf(r):
            return np.exp(shape * np.log(rate) - gammaln(shape)
                          + (shape - 1) * np.log(r) - rate * r)

        rho_mean = quad(lambda r: r * gamma_pdf(r), 0, np.inf, limit=300)[0]
        rho_log = quad(lambda r: np.log(r) * gamma_pdf(r), 0, np.inf, limit=300)[0]

        def branch(a, b):
            return (a * np.log(b) - gammaln(a) + (a - 1) * rho_log - b * rho_mean)

        lam = 0.2
        log_c1 = branch(priors.a, priors.b)
        log_c0 = branch(priors.a_bar, priors.b_bar)
        w1 = lam * np.exp(log_c1 - max(log_c1, log_c0))
        w0 = (1 - lam) * np.exp(log_c0 - max(log_c1, log_c0))
        expected = w1 / (w1 + w0)
        assert state.s_prob[0] == pytest.approx(expected, abs=1e-6)


class TestZUpdate:
    def test_z_becomes_mu_and_idempotent(self):
        rng = np.random.default_rng(10)
        f, _, y, _ = random_cs_instance(rng, m=16, q=8)
        priors = HierarchicalPriorParams.with_default_support(8, 2)
        state = init_state(f, y, priors)
        update_qx(state, f, y)
        update_z(state)
        assert np.array_equal(state.z, state.mu)
        z1 = state.z.copy()
        update_z(state)
        assert np.array_equal(state.z, z1)

    def test_surrogate_nonincreasing_across_z_update(self):
        rng = np.random.default_rng(11)
        f, _, y, _ = random_cs_instance(rng, m=24, q=12)
        priors = HierarchicalPriorParams.with_default_support(12, 3)
        state = init_state(f, y, priors)
        for _ in range(3):
            update_qx(state, f, y)
            update_qrho_qs(state, priors)
            update_qgamma(state, priors)
            before = relaxed_objective(state, f, y, priors)
            update_z(state)
            after = relaxed_objective(state, f, y, priors)
            assert after <= before + 1e-9


class TestRunIfvbi:
    def test_zero_observation_gives_zero_estimate(self):
        rng = np.random.default_rng(12)
        f, _, _, _ = random_cs_instance(rng, m=16, q=8)
        priors = HierarchicalPriorParams.with_default_support(8, 2)
        x_hat, gamma_hat, _ = run_ifvbi(f, np.zeros(16, dtype=complex), priors)
        assert np.allclose(x_hat, 0.0)
        assert gamma_hat > 0

    def test_single_atom_recovery(self):
        rng = np.random.default_rng(13)
        q = 12
        f = np.linalg.qr(rng.standard_normal((32, q))
                         + 1j * rng.standard_normal((32, q)))[0]
        x = np.zeros(q, dtype=complex)
        x[5] = 2.0 - 1.0j
        y = f @ x
        priors = HierarchicalPriorParams.with_default_support(q, 1)
        x_hat, _, state = run_ifvbi(f, y, priors, n_iter=200)
        assert np.argmax(np.abs(x_hat)) == 5
        assert abs(x_hat[5]) > 0.9 * abs(x[5])
        assert state.s_prob[5] > 0.9

    def test_matches_exact_vbi_at_high_snr(self):
        rng = np.random.default_rng(14)
        f, x, y, _ = random_cs_instance(rng, m=32, q=16, snr_db=20.0)
        priors = HierarchicalPriorParams.with_default_support(16, 3)
        mu_fast, gamma_fast, _ = run_ifvbi(f, y, priors, n_iter=3000, tol=1e-12)
        mu_exact, gamma_exact = oracles.exact_vbi(f, y, priors, n_iter=600,
                                                  tol=1e-12)
        rel = np.linalg.norm(mu_fast - mu_exact) / np.linalg.norm(mu_exact)
        assert rel < 1e-3

    def test_variances_stay_positive_long_run(self):
        rng = np.random.default_rng(15)
        f, _, y, _ = random_cs_instance(rng, m=24, q=16, snr_db=5.0)
        priors = HierarchicalPriorParams.with_default_support(16, 3)
        state = init_state(f, y, priors)
        for _ in range(1000):
            update_qx(state, f, y)
            update_qrho_qs(state, priors)
            update_qgamma(state, priors)
            update_z(state)
            assert (state.sigma_diag > 0).all()
            assert state.gamma_mean > 0

    def test_surrogate_monotone_every_step(self):
        rng = np.random.default_rng(16)
        for _ in range(20):
            f, _, y, _ = random_cs_instance(rng, m=16, q=10,
                                            snr_db=rng.uniform(0, 25))
            priors = HierarchicalPriorParams.with_default_support(10, 2)
            state = init_state(f, y, priors)
            j = relaxed_objective(state, f, y, priors)
            for _ in range(10):
                for step in (update_qx, update_qrho_qs, update_qgamma, update_z):
                    if step is update_qx:
                        step(state, f, y)
                    elif step is update_z:
                        step(state)
                    else:
                        step(state, priors)
                    j_new = relaxed_objective(state, f, y, priors)
                    assert j_new <= j + 1e-9
                    j = j_new
