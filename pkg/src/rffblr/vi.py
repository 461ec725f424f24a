"""Mean-field variational posterior and its closed-form coordinate updates.

Model (rows are observations, ``Phi`` is N x M, ``Y`` is N x C)::

    Y = Phi W + 1 b + noise,   noise ~ N(0, 1/tau)
    W[m, :] ~ N(0, 1/alpha_m I_C),  alpha_m ~ Gamma(alpha0, beta0)
    b ~ N(0, I_C),                  tau ~ Gamma(alpha0_tau, beta0_tau)

The factor q(W) has one M x M covariance shared by every task column.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .exceptions import InvalidArgument, NumericalFailure

JITTER_LEVELS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class Hyperparams:
    alpha0: float = 1e-6
    beta0: float = 1e-6
    alpha0_tau: float = 1e-6
    beta0_tau: float = 1e-6

    def __post_init__(self):
        for name in ("alpha0", "beta0", "alpha0_tau", "beta0_tau"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be strictly positive")


@dataclass
class Posterior:
    """Variational parameters.

    ``w_mean`` (M, C), ``w_cov`` (M, M) shared across tasks, Gamma shape/rate
    pairs ``alpha_a, alpha_b`` (M,) and ``tau_a, tau_b``; ``b_mean`` (C,) with
    isotropic covariance ``b_cov_diag * I_C``.

    :func:`update_w` leaves ``w_cov`` read-only; assign a new array to change it.
    """

    w_mean: np.ndarray
    w_cov: np.ndarray
    alpha_a: np.ndarray
    alpha_b: np.ndarray
    b_mean: np.ndarray
    b_cov_diag: float
    tau_a: float
    tau_b: float
    # (w_cov array, log|w_cov|) from the factorization that produced it
    _logdet_cache: tuple = field(default=None, init=False, repr=False, compare=False)

    @property
    def alpha_mean(self):
        return self.alpha_a / self.alpha_b

    @property
    def tau_mean(self):
        return self.tau_a / self.tau_b

    @property
    def n_features(self):
        return self.w_mean.shape[0]

    @property
    def n_tasks(self):
        return self.w_mean.shape[1]

    def copy(self):
        return replace(self, w_mean=self.w_mean.copy(), w_cov=self.w_cov.copy(),
                       alpha_a=self.alpha_a.copy(), alpha_b=self.alpha_b.copy(),
                       b_mean=self.b_mean.copy())

    def subset(self, keep):
        """Posterior restricted to feature indices ``keep`` (marginal of q(W))."""
        keep = np.asarray(keep)
        return replace(self, w_mean=self.w_mean[keep].copy(),
                       w_cov=self.w_cov[np.ix_(keep, keep)].copy(),
                       alpha_a=self.alpha_a[keep].copy(),
                       alpha_b=self.alpha_b[keep].copy(),
                       b_mean=self.b_mean.copy())

    def logdet_cov(self):
        """``log|Sigma_W|``, reused from :func:`update_w` when ``w_cov`` is unchanged."""
        cache = self._logdet_cache
        if cache is not None and cache[0] is self.w_cov:
            return cache[1]
        L = spd_cholesky(self.w_cov, what="Sigma_W", allow_jitter=False)
        value = 2.0 * float(np.sum(np.log(np.diag(L))))
        self._logdet_cache = (self.w_cov, value)
        return value

    def row_second_moments(self):
        """``<w_m^T w_m> = sum_c <W[m,c]>^2 + C * Sigma_W[m,m]`` for each m."""
        return np.sum(self.w_mean ** 2, axis=1) + self.n_tasks * np.diag(self.w_cov)

    def check(self):
        """Raise :class:`NumericalFailure` if any invariant is violated."""
        positives = np.concatenate([self.alpha_a, self.alpha_b,
                                    [self.tau_a, self.tau_b, self.b_cov_diag]])
        if not np.all(np.isfinite(positives)) or np.any(positives <= 0):
            raise NumericalFailure("non-positive Gamma parameter or bias variance")
        if not np.allclose(self.w_cov, self.w_cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(self.w_cov).max())):
            raise NumericalFailure("Sigma_W is not symmetric")
        spd_cholesky(self.w_cov, what="Sigma_W", allow_jitter=False)


def init_posterior(M, C, hyper):
    """Starting point: zero means, identity covariances, <alpha> = <tau> = 1."""
    if int(M) < 1 or int(C) < 1:
        raise InvalidArgument(f"M and C must be >= 1, got M={M}, C={C}")
    M, C = int(M), int(C)
    return Posterior(
        w_mean=np.zeros((M, C)),
        w_cov=np.eye(M),
        alpha_a=np.full(M, hyper.alpha0 + C / 2.0),
        alpha_b=np.full(M, hyper.beta0 + C / 2.0),
        b_mean=np.zeros(C),
        b_cov_diag=1.0,
        tau_a=1.0,
        tau_b=1.0,
    )


def spd_cholesky(A, what="matrix", allow_jitter=True):
    """Lower Cholesky factor of ``A``, escalating diagonal jitter on failure.

    Jitter is ``level * mean(diag(A))`` for the levels in ``JITTER_LEVELS``.
    """
    levels = JITTER_LEVELS if allow_jitter else (0.0,)
    scale = float(np.mean(np.diag(A))) if A.size else 1.0
    for level in levels:
        try:
            if level:
                return linalg.cholesky(A + level * scale * np.eye(A.shape[0]), lower=True)
            return linalg.cholesky(A, lower=True)
        except linalg.LinAlgError:
            continue
    eig = np.linalg.eigvalsh((A + A.T) / 2)
    raise NumericalFailure(
        f"{what} ({A.shape[0]}x{A.shape[0]}) not positive definite after jitter "
        f"up to {levels[-1]:g}*mean(diag); min eigenvalue {eig[0]:.3e}, "
        f"max {eig[-1]:.3e}, mean diag {scale:.3e}")


def _check_shapes(post, Phi, Y):
    if Phi.ndim != 2 or Y.ndim != 2 or Phi.shape[0] != Y.shape[0]:
        raise InvalidArgument(f"Phi {Phi.shape} and Y {Y.shape} are inconsistent")
    if Phi.shape[1] != post.n_features or Y.shape[1] != post.n_tasks:
        raise InvalidArgument(
            f"posterior is {post.n_features}x{post.n_tasks}, data gives "
            f"{Phi.shape[1]} features and {Y.shape[1]} tasks")


def update_w(post, Phi, Y, gram=None):
    """q(W): ``Sigma_W = (diag<alpha> + <tau> Phi^T Phi)^-1`` and
    ``<W> = <tau> Sigma_W Phi^T (Y - 1 <b>)``.

    ``gram`` may carry a precomputed ``Phi.T @ Phi``.
    """
    _check_shapes(post, Phi, Y)
    tau = post.tau_mean
    if gram is None:
        gram = Phi.T @ Phi
    precision = tau * gram
    precision[np.diag_indices_from(precision)] += post.alpha_mean
    L = spd_cholesky(precision, what="q(W) precision")
    rhs = Phi.T @ (Y - post.b_mean[None, :])
    post.w_mean = tau * linalg.cho_solve((L, True), rhs)
    cov, info = lapack.dpotri(L, lower=1)
    if info != 0:
        raise NumericalFailure(f"inverting the q(W) precision failed (LAPACK info {info})")
    w_cov = np.tril(cov) + np.tril(cov, -1).T
    # read-only so an in-place edit cannot leave the cached log-determinant stale
    w_cov.setflags(write=False)
    post.w_cov = w_cov
    post._logdet_cache = (w_cov, -2.0 * float(np.sum(np.log(np.diag(L)))))


def update_alpha(post, hyper):
    """q(alpha_m) = Gamma(alpha0 + C/2, beta0 + <w_m^T w_m>/2)."""
    C = post.n_tasks
    post.alpha_a = np.full(post.n_features, hyper.alpha0 + C / 2.0)
    post.alpha_b = hyper.beta0 + 0.5 * post.row_second_moments()


def update_b(post, Phi, Y):
    """q(b) = N(<tau> sum_n (y_n - phi_n <W>) s, s I_C) with s = 1/(N<tau> + 1)."""
    _check_shapes(post, Phi, Y)
    N = Phi.shape[0]
    tau = post.tau_mean
    s = 1.0 / (N * tau + 1.0)
    post.b_cov_diag = s
    post.b_mean = tau * np.sum(Y - Phi @ post.w_mean, axis=0) * s


def expected_sq_residual(post, Phi, Y, gram=None):
    """``E_q ||Y - Phi W - 1 b||_F^2`` computed from the explicit residual."""
    N = Phi.shape[0]
    C = post.n_tasks
    R = Y - Phi @ post.w_mean - post.b_mean[None, :]
    if gram is None:
        var_w = np.sum((Phi @ post.w_cov) * Phi)
    else:
        var_w = np.sum(post.w_cov * gram)
    return float(np.sum(R * R) + C * var_w + N * C * post.b_cov_diag)


def update_tau(post, Phi, Y, hyper, gram=None):
    """q(tau) = Gamma(alpha0_tau + NC/2, beta0_tau + E||Y - Phi W - 1 b||^2 / 2)."""
    _check_shapes(post, Phi, Y)
    N, C = Y.shape
    tau_b = hyper.beta0_tau + 0.5 * expected_sq_residual(post, Phi, Y, gram)
    if not (np.isfinite(tau_b) and tau_b > 0):
        raise NumericalFailure(f"q(tau) rate is {tau_b!r}; posterior moments are inconsistent")
    post.tau_a = hyper.alpha0_tau + N * C / 2.0
    post.tau_b = float(tau_b)


def sweep(post, Phi, Y, hyper, gram=None):
    """One pass of the updates in the order W, alpha, b, tau."""
    if gram is None:
        gram = Phi.T @ Phi
    update_w(post, Phi, Y, gram)
    update_alpha(post, hyper)
    update_b(post, Phi, Y)
    update_tau(post, Phi, Y, hyper, gram)
