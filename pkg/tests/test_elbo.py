from math import lgamma

import numpy as np
import pytest
from scipy import stats
from scipy.special import digamma

from rffblr import (AdamState, Hyperparams, InvalidArgument, RffMap, adam_ascend_gamma,
                    apply_map, compute_elbo, gamma_gradient, gamma_objective, init_posterior,
                    sample_map, sweep)
from rffblr.elbo import GAMMA_BOUNDS, collapsed_elbo, feature_elbo_terms
from rffblr.oracles import finite_diff
from rffblr.synthetic import make_sparse_rff
from rffblr.verification import random_instance


def reference_elbo(post, Phi, Y, h):
    """Term-by-term bound using scipy's distribution entropies."""
    N, C = Y.shape
    M = post.n_features
    e_ln_tau = digamma(post.tau_a) - np.log(post.tau_b)
    e_tau = post.tau_a / post.tau_b
    e_ln_alpha = digamma(post.alpha_a) - np.log(post.alpha_b)
    e_alpha = post.alpha_a / post.alpha_b
    total = 0.0
    for c in range(C):
        r = Y[:, c] - Phi @ post.w_mean[:, c] - post.b_mean[c]
        sq = r @ r + np.trace(Phi @ post.w_cov @ Phi.T) + N * post.b_cov_diag
        total += 0.5 * N * (e_ln_tau - np.log(2 * np.pi)) - 0.5 * e_tau * sq
    for m in range(M):
        second = post.w_mean[m] @ post.w_mean[m] + C * post.w_cov[m, m]
        total += 0.5 * C * (e_ln_alpha[m] - np.log(2 * np.pi)) - 0.5 * e_alpha[m] * second
        total += (h.alpha0 * np.log(h.beta0) - lgamma(h.alpha0)
                  + (h.alpha0 - 1) * e_ln_alpha[m] - h.beta0 * e_alpha[m])
        total += stats.gamma(post.alpha_a[m], scale=1 / post.alpha_b[m]).entropy()
    e_bb = post.b_mean @ post.b_mean + C * post.b_cov_diag
    total += -0.5 * C * np.log(2 * np.pi) - 0.5 * e_bb
    total += (h.alpha0_tau * np.log(h.beta0_tau) - lgamma(h.alpha0_tau)
              + (h.alpha0_tau - 1) * e_ln_tau - h.beta0_tau * e_tau)
    total += C * stats.multivariate_normal(np.zeros(M), post.w_cov).entropy()
    total += stats.multivariate_normal(np.zeros(C), post.b_cov_diag * np.eye(C)).entropy()
    total += stats.gamma(post.tau_a, scale=1 / post.tau_b).entropy()
    return total


class TestComputeElbo:
    def test_finite(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        assert np.isfinite(compute_elbo(post, Phi, Y, hyper))

    @pytest.mark.parametrize("beta0_tau", [1e-6, 2e-6, 1e-3, 2e-3])
    def test_matches_reference(self, small_problem, beta0_tau):
        X, Y, rff, post, _, Phi = small_problem
        h = Hyperparams(beta0_tau=beta0_tau, alpha0=2e-3, beta0=5e-4)
        np.testing.assert_allclose(compute_elbo(post, Phi, Y, h), reference_elbo(post, Phi, Y, h),
                                   rtol=1e-10)

    def test_gram_shortcut(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        assert compute_elbo(post, Phi, Y, hyper, Phi.T @ Phi) == pytest.approx(
            compute_elbo(post, Phi, Y, hyper), rel=1e-12)

    def test_monotone_over_sweeps(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            X, Y, rff, post, hyper = random_instance(rng, sweeps=0)
            Phi = apply_map(rff, X)
            trace = []
            for _ in range(50):
                sweep(post, Phi, Y, hyper)
                trace.append(compute_elbo(post, Phi, Y, hyper))
            trace = np.array(trace)
            assert np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1]))

    def test_collapsed_form_after_sweep(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            X, Y, rff, post, hyper = random_instance(rng, sweeps=1)
            Phi = apply_map(rff, X)
            np.testing.assert_allclose(collapsed_elbo(post, Y.shape[0], hyper),
                                       compute_elbo(post, Phi, Y, hyper), rtol=1e-9)

    def test_feature_terms_account_for_dead_feature(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        post.w_mean[4] = 0.0
        post.w_cov = post.w_cov.copy()
        post.w_cov[4, :] = 0.0
        post.w_cov[:, 4] = 0.0
        post.w_cov[4, 4] = 1e-3
        keep = np.delete(np.arange(25), 4)
        full = compute_elbo(post, Phi, Y, hyper)
        reduced = compute_elbo(post.subset(keep), Phi[:, keep], Y, hyper)
        # own factors plus the variance it adds to the expected data misfit
        misfit = -0.5 * post.tau_mean * Y.shape[1] * 1e-3 * Phi[:, 4] @ Phi[:, 4]
        np.testing.assert_allclose(full - reduced, feature_elbo_terms(post, hyper, 4) + misfit,
                                   rtol=1e-9)


class TestGammaObjective:
    def test_vanishes_without_weights(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        post.w_mean[:] = 0.0
        post.w_cov = np.zeros_like(post.w_cov)
        for g in (0.01, 1.0, 30.0):
            rff.gamma = g
            assert gamma_objective(post, rff, X, Y) == 0.0

    def test_scalar_transcript(self):
        rff = RffMap([[0.7]], [0.3], 0.4, scale_features=False)
        post = init_posterior(1, 1, Hyperparams())
        post.w_mean = np.array([[1.5]])
        post.w_cov = np.array([[0.2]])
        post.b_mean = np.array([0.1])
        post.tau_a, post.tau_b = 3.0, 1.0
        x, y = 2.0, 0.8
        phi = np.cos(np.sqrt(0.8) * 0.7 * x + 0.3)
        expected = 3.0 * ((y - 0.1) * phi * 1.5 - 0.5 * phi ** 2 * 1.5 ** 2 - 0.5 * phi ** 2 * 0.2)
        assert gamma_objective(post, rff, [[x]], [[y]]) == pytest.approx(expected, rel=1e-14)

    def test_differences_match_elbo(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            X, Y, rff, post, hyper = random_instance(rng)
            g0 = rff.gamma
            lb0, e0 = gamma_objective(post, rff, X, Y), compute_elbo(post, apply_map(rff, X), Y, hyper)
            rff.gamma = g0 * float(np.exp(rng.uniform(-1, 1)))
            lb1, e1 = gamma_objective(post, rff, X, Y), compute_elbo(post, apply_map(rff, X), Y, hyper)
            np.testing.assert_allclose(lb1 - lb0, e1 - e0, rtol=1e-8, atol=1e-10 * abs(e0))


class TestGammaGradient:
    def test_finite_differences(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            X, Y, rff, post, _ = random_instance(rng)
            g0 = rff.gamma

            def f(g):
                rff.gamma = g
                return gamma_objective(post, rff, X, Y)

            numeric = finite_diff(f, g0, 1e-6 * g0)
            rff.gamma = g0
            analytic = gamma_gradient(post, rff, X, Y)
            assert abs(analytic - numeric) <= 1e-4 * max(abs(numeric), 1e-8)

    def test_zero_weights(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        post.w_mean[:] = 0.0
        post.w_cov = np.zeros_like(post.w_cov)
        assert gamma_gradient(post, rff, X, Y) == 0.0

    def test_points_down_when_gamma_too_large(self):
        prob = make_sparse_rff(300, 3, 2, m=100, n_active=10, gamma=0.1, seed=2)
        hyper = Hyperparams()
        rff = sample_map(3, 100, 2, 0.1)
        post = init_posterior(100, 2, hyper)
        Phi = apply_map(rff, prob.X)
        for _ in range(30):
            sweep(post, Phi, prob.Y, hyper)
        rff.gamma = 10 * 0.1
        assert gamma_gradient(post, rff, prob.X, prob.Y) < 0

    def test_shape_checks(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        with pytest.raises(InvalidArgument):
            gamma_gradient(post, rff, X[:5], Y)


class TestAdam:
    def test_first_step_is_learning_rate(self):
        s = AdamState()
        assert s.step(123.0) == pytest.approx(0.01, rel=1e-6)
        assert s.step_count == 1

    def test_zero_gradient_fixed_point(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        post.w_mean[:] = 0.0
        post.w_cov = np.zeros_like(post.w_cov)
        g0 = rff.gamma
        state = AdamState()
        adam_ascend_gamma(state, post, rff, X, Y, 10)
        assert rff.gamma == g0
        assert state.step_count == 10
        assert state.second_moment >= 0

    def test_positive_and_draws_untouched(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        checksum = rff.frozen_checksum()
        adam_ascend_gamma(AdamState(learning_rate=5.0), post, rff, X, Y, 200)
        assert GAMMA_BOUNDS[0] <= rff.gamma <= GAMMA_BOUNDS[1]
        assert rff.frozen_checksum() == checksum

    def test_ascent_raises_objective(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        before = gamma_objective(post, rff, X, Y)
        adam_ascend_gamma(AdamState(), post, rff, X, Y, 20)
        assert gamma_objective(post, rff, X, Y) > before

    def test_rejects_zero_steps(self, small_problem):
        X, Y, rff, post, hyper, Phi = small_problem
        with pytest.raises(InvalidArgument):
            adam_ascend_gamma(AdamState(), post, rff, X, Y, 0)
