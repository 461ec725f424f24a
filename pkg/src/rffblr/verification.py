"""Self-checks pitting the main code paths against the reference oracles.

Each check returns a :class:`CheckResult`; ``run_all`` is what ``rffblr verify``
prints. Instance counts are arguments so tests can run the larger versions.
"""

from dataclasses import dataclass

import numpy as np

from ._rng import derive_rng
from .elbo import compute_elbo, gamma_gradient, gamma_objective
from .features import (apply_map, exact_rbf_kernel, kernel_approximation_error,
                       median_heuristic_gamma, sample_map)
from .oracles import feature_ridge, finite_diff, mc_moment_check
from .vi import Hyperparams, init_posterior, sweep, update_alpha, update_w


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def random_instance(rng, max_n=100, max_m=64, max_c=4, max_d=5, sweeps=3):
    """Small random regression problem with a partially converged posterior."""
    n = int(rng.integers(5, max_n + 1))
    m = int(rng.integers(1, max_m + 1))
    c = int(rng.integers(1, max_c + 1))
    d = int(rng.integers(1, max_d + 1))
    X = rng.standard_normal((n, d))
    Y = rng.standard_normal((n, c))
    gamma = float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
    rff = sample_map(d, m, int(rng.integers(2**31)), gamma,
                     scale_features=bool(rng.integers(2)))
    hyper = Hyperparams()
    post = init_posterior(m, c, hyper)
    Phi = apply_map(rff, X)
    for _ in range(sweeps):
        sweep(post, Phi, Y, hyper)
    return X, Y, rff, post, hyper


def check_gradient(n_instances=10, seed=0, tol=1e-4):
    """Analytic d(objective)/d(gamma) against central differences."""
    rng = derive_rng(seed, 101)
    worst = 0.0
    for _ in range(n_instances):
        X, Y, rff, post, _ = random_instance(rng)
        g0 = rff.gamma

        def f(g):
            rff.gamma = g
            return gamma_objective(post, rff, X, Y)

        numeric = finite_diff(f, g0, 1e-5 * g0)
        rff.gamma = g0
        analytic = gamma_gradient(post, rff, X, Y)
        scale = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(analytic - numeric) / scale)
    return CheckResult("gamma gradient vs finite differences", bool(worst < tol), worst, tol,
                       f"{n_instances} instances, max relative error")


def check_ridge(n_instances=10, seed=0, tol=1e-8):
    """One q(W) update with pinned alpha and tau, and b = 0, is ridge regression."""
    rng = derive_rng(seed, 102)
    worst = 0.0
    for _ in range(n_instances):
        n, m, c = int(rng.integers(2, 51)), int(rng.integers(1, 31)), int(rng.integers(1, 4))
        Phi = rng.standard_normal((n, m))
        Y = rng.standard_normal((n, c))
        alpha = np.exp(rng.uniform(-2, 2, size=m))
        tau = float(np.exp(rng.uniform(-1, 2)))
        post = init_posterior(m, c, Hyperparams())
        post.alpha_a, post.alpha_b = alpha.copy(), np.ones(m)
        post.tau_a, post.tau_b = tau, 1.0
        update_w(post, Phi, Y)
        worst = max(worst, float(np.max(np.abs(post.w_mean - feature_ridge(Phi, Y, alpha, tau)))))
    return CheckResult("q(W) update vs dual ridge solve", bool(worst < tol), worst, tol,
                       f"{n_instances} instances, max abs difference")


def check_kernel(seed=0, M=4000, D=5, pairs=100, tol=0.05):
    """Feature inner products against the exact RBF kernel."""
    rng = derive_rng(seed, 103)
    X = rng.standard_normal((2 * pairs, D))
    gamma = median_heuristic_gamma(X, seed=seed)
    rff = sample_map(D, M, seed, gamma)
    err = kernel_approximation_error(rff, X[:pairs], X[pairs:])["mean_abs"]
    return CheckResult(f"kernel approximation at M={M}", bool(err < tol), err, tol,
                       f"{pairs} random pairs, mean abs error")


def check_elbo_monotone(n_instances=5, sweeps=50, seed=0, slack=1e-8):
    """Pure sweeps with gamma frozen never decrease the bound."""
    rng = derive_rng(seed, 104)
    worst = 0.0
    for _ in range(n_instances):
        X, Y, rff, post, hyper = random_instance(rng, sweeps=0)
        Phi = apply_map(rff, X)
        prev = None
        for _ in range(sweeps):
            sweep(post, Phi, Y, hyper)
            cur = compute_elbo(post, Phi, Y, hyper)
            if prev is not None:
                worst = max(worst, (prev - cur) / max(abs(prev), 1e-300))
            prev = cur
    return CheckResult("ELBO monotone under sweeps", bool(worst <= slack), worst, slack,
                       f"{n_instances}x{sweeps} sweeps, worst relative decrease")


def check_moments(seed=0, samples=100_000, tol=0.02):
    """Closed-form alpha rate against Monte-Carlo second moments of q(W)."""
    rng = derive_rng(seed, 105)
    X, Y, rff, post, hyper = random_instance(rng, max_n=40, max_m=12, max_c=3)
    update_alpha(post, hyper)
    closed = 2.0 * (post.alpha_b - hyper.beta0)
    mc = mc_moment_check(post.w_mean, post.w_cov, samples, seed=seed)
    worst = float(np.max(np.abs(mc - closed) / closed))
    return CheckResult("row second moments vs Monte Carlo", bool(worst < tol), worst, tol,
                       f"{samples} samples, max relative error")


def check_kernel_function():
    """Exact kernel at a hand-computed point: exp(-0.5 * 2) = e^-1."""
    value = exact_rbf_kernel(0.5, [0.0, 1.0], [1.0, 0.0])
    err = abs(value - np.exp(-1.0))
    return CheckResult("exact RBF kernel hand value", bool(err < 1e-15), float(err), 1e-15)


def run_all(seed=0):
    return [check_kernel_function(), check_gradient(seed=seed), check_ridge(seed=seed),
            check_kernel(seed=seed), check_elbo_monotone(seed=seed), check_moments(seed=seed)]
