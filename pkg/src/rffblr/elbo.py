"""Evidence lower bound and gradient ascent on the kernel parameter gamma."""

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln

from .exceptions import InvalidArgument
from .features import apply_map, map_and_jacobian, projection
from .vi import expected_sq_residual

LOG_2PI = np.log(2.0 * np.pi)
GAMMA_BOUNDS = (1e-12, 1e12)


def _gamma_entropy(a, b):
    return a - np.log(b) + gammaln(a) + (1.0 - a) * digamma(a)


def compute_elbo(post, Phi, Y, hyper, gram=None):
    """Full mean-field lower bound, constants included.

    Valid for any posterior state, so it increases monotonically under each
    coordinate update. Raises :class:`NumericalFailure` if Sigma_W is not SPD.
    """
    N, C = Y.shape
    M = post.n_features
    a_al, b_al = post.alpha_a, post.alpha_b
    e_alpha = a_al / b_al
    e_log_alpha = digamma(a_al) - np.log(b_al)
    e_tau = post.tau_mean
    e_log_tau = digamma(post.tau_a) - np.log(post.tau_b)
    e_bb = float(post.b_mean @ post.b_mean + C * post.b_cov_diag)

    lik = 0.5 * N * C * (e_log_tau - LOG_2PI) \
        - 0.5 * e_tau * expected_sq_residual(post, Phi, Y, gram)
    p_w = 0.5 * C * np.sum(e_log_alpha) - 0.5 * np.sum(e_alpha * post.row_second_moments()) \
        - 0.5 * M * C * LOG_2PI
    p_alpha = np.sum(hyper.alpha0 * np.log(hyper.beta0) - gammaln(hyper.alpha0)
                     + (hyper.alpha0 - 1.0) * e_log_alpha - hyper.beta0 * e_alpha)
    p_b = -0.5 * C * LOG_2PI - 0.5 * e_bb
    p_tau = hyper.alpha0_tau * np.log(hyper.beta0_tau) - gammaln(hyper.alpha0_tau) \
        + (hyper.alpha0_tau - 1.0) * e_log_tau - hyper.beta0_tau * e_tau

    h_w = 0.5 * M * C * (1.0 + LOG_2PI) + 0.5 * C * post.logdet_cov()
    h_alpha = np.sum(_gamma_entropy(a_al, b_al))
    h_b = 0.5 * C * (1.0 + LOG_2PI + np.log(post.b_cov_diag))
    h_tau = _gamma_entropy(post.tau_a, post.tau_b)

    return float(lik + p_w + p_alpha + p_b + p_tau + h_w + h_alpha + h_b + h_tau)


def collapsed_elbo(post, N, hyper):
    """Lower bound in the form that holds right after the alpha and tau updates.

    Once q(alpha) and q(tau) sit at their coordinate optima, the data-fit and
    prior-precision terms fold into the Gamma rates::

        -sum_m a_alpha ln b_alpha_m - a_tau ln b_tau - <b b^T>/2
        + C/2 ln|Sigma_W| + C/2 ln s_b + const

    Agrees with :func:`compute_elbo` at the end of every sweep.
    """
    C = post.n_tasks
    M = post.n_features
    a_al = hyper.alpha0 + C / 2.0
    a_tau = hyper.alpha0_tau + N * C / 2.0
    e_bb = float(post.b_mean @ post.b_mean + C * post.b_cov_diag)
    const = M * (gammaln(a_al) + hyper.alpha0 * np.log(hyper.beta0) - gammaln(hyper.alpha0)) \
        + 0.5 * M * C \
        + gammaln(a_tau) + hyper.alpha0_tau * np.log(hyper.beta0_tau) - gammaln(hyper.alpha0_tau) \
        - 0.5 * N * C * LOG_2PI + 0.5 * C
    return float(-a_al * np.sum(np.log(post.alpha_b)) - a_tau * np.log(post.tau_b)
                 - 0.5 * e_bb + 0.5 * C * post.logdet_cov()
                 + 0.5 * C * np.log(post.b_cov_diag) + const)


def feature_elbo_terms(post, hyper, m):
    """Terms of :func:`compute_elbo` that involve only feature ``m``'s own factors.

    Dropping a feature whose weights are negligible changes the bound by
    these terms alone (up to couplings through Sigma_W and the data fit).
    """
    C = post.n_tasks
    a, b = post.alpha_a[m], post.alpha_b[m]
    e_alpha = a / b
    e_log_alpha = digamma(a) - np.log(b)
    second = post.w_mean[m] @ post.w_mean[m] + C * post.w_cov[m, m]
    return float(0.5 * C * (e_log_alpha - LOG_2PI) - 0.5 * e_alpha * second
                 + hyper.alpha0 * np.log(hyper.beta0) - gammaln(hyper.alpha0)
                 + (hyper.alpha0 - 1.0) * e_log_alpha - hyper.beta0 * e_alpha
                 + _gamma_entropy(a, b)
                 + 0.5 * C * (1.0 + LOG_2PI + np.log(post.w_cov[m, m])))


def _check_gamma_inputs(post, rff, X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] != Y.shape[0]:
        raise InvalidArgument(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
    if rff.n_features != post.n_features or Y.shape[1] != post.n_tasks:
        raise InvalidArgument("map/posterior/targets shapes disagree")
    return X, Y


def _objective_from_phi(post, Phi, Y):
    C = post.n_tasks
    F = Phi @ post.w_mean
    fit = np.sum((Y - post.b_mean[None, :]) * F) - 0.5 * np.sum(F * F) \
        - 0.5 * C * np.sum((Phi @ post.w_cov) * Phi)
    return post.tau_mean * float(fit)


def gamma_objective(post, rff, X, Y):
    """Part of the lower bound that depends on the feature matrix::

        <tau> [ Tr(Y^T Phi <W>) - Tr(<W W^T> Phi^T Phi)/2 - 1^T Phi <W> <b>^T ]

    with ``<W W^T> = <W><W>^T + C Sigma_W``.
    """
    X, Y = _check_gamma_inputs(post, rff, X, Y)
    return _objective_from_phi(post, apply_map(rff, X), Y)


def gamma_gradient(post, rff, X, Y):
    """Exact derivative of :func:`gamma_objective` with respect to gamma."""
    X, Y = _check_gamma_inputs(post, rff, X, Y)
    Phi, J = map_and_jacobian(rff, X)
    return _gradient_from(post, Phi, J, Y)


def _gradient_from(post, Phi, J, Y):
    C = post.n_tasks
    R = Y - post.b_mean[None, :] - Phi @ post.w_mean
    G = R @ post.w_mean.T - C * (Phi @ post.w_cov)
    return post.tau_mean * float(np.sum(J * G))


@dataclass
class AdamState:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    step_count: int = 0
    first_moment: float = 0.0
    second_moment: float = 0.0

    def step(self, grad):
        """Ascent increment for one gradient value."""
        self.step_count += 1
        self.first_moment = self.beta1 * self.first_moment + (1 - self.beta1) * grad
        self.second_moment = self.beta2 * self.second_moment + (1 - self.beta2) * grad * grad
        m_hat = self.first_moment / (1 - self.beta1 ** self.step_count)
        v_hat = self.second_moment / (1 - self.beta2 ** self.step_count)
        return self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps_hat)


def adam_ascend_gamma(state, post, rff, X, Y, steps):
    """Run ``steps`` Adam ascent steps on ``log(gamma)``; updates ``rff.gamma``."""
    if int(steps) < 1:
        raise InvalidArgument("steps must be >= 1")
    X, Y = _check_gamma_inputs(post, rff, X, Y)
    lo, hi = np.log(GAMMA_BOUNDS[0]), np.log(GAMMA_BOUNDS[1])
    Z = projection(rff, X)
    for _ in range(int(steps)):
        Phi, J = map_and_jacobian(rff, X, Z)
        # chain rule through gamma = exp(log_gamma)
        grad = rff.gamma * _gradient_from(post, Phi, J, Y)
        log_gamma = np.clip(np.log(rff.gamma) + state.step(grad), lo, hi)
        rff.gamma = float(np.exp(log_gamma))
    return rff.gamma
