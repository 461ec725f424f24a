"""Brute-force reference computations used to check the main code paths.

Nothing here calls into the feature map or the variational updates: kernels
are evaluated from pairwise distances and linear systems are solved by LU.
"""

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import NumericalFailure


class KernelRidge:
    """Exact RBF kernel ridge predictor ``f(x) = k(x)^T beta + ybar``."""

    def __init__(self, X, Y, gamma, ridge_lambda):
        self.X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.asarray(Y, dtype=float)
        self.Y = Y[:, None] if Y.ndim == 1 else Y
        self.gamma = float(gamma)
        self.ybar = self.Y.mean(axis=0)
        K = self.kernel(self.X)
        n = K.shape[0]
        for jitter in (0.0, 1e-12, 1e-10, 1e-8):
            try:
                A = K + (ridge_lambda + jitter) * np.eye(n)
                self.beta = np.linalg.solve(A, self.Y - self.ybar)
                break
            except np.linalg.LinAlgError:
                continue
        else:
            raise NumericalFailure("kernel ridge system is singular")

    def kernel(self, Xa, Xb=None):
        Xb = Xa if Xb is None else Xb
        return np.exp(-self.gamma * cdist(Xa, Xb, "sqeuclidean"))

    def predict(self, Xnew):
        return self.kernel(np.atleast_2d(Xnew), self.X) @ self.beta + self.ybar


def kernel_ridge(X, Y, gamma, ridge_lambda):
    return KernelRidge(X, Y, gamma, ridge_lambda)


def finite_diff(f, x, h):
    """Central difference ``(f(x+h) - f(x-h)) / 2h``."""
    return (f(x + h) - f(x - h)) / (2.0 * h)


def mc_moment_check(w_mean, w_cov, samples, seed=0):
    """Monte-Carlo estimate of ``E[w_m^T w_m]`` for each row under q(W).

    Each column of W is drawn from ``N(w_mean[:, c], w_cov)``.
    """
    w_mean = np.atleast_2d(np.asarray(w_mean, dtype=float))
    M, C = w_mean.shape
    rng = np.random.default_rng(seed)
    # eigh tolerates the zero covariance, which Cholesky would not
    vals, vecs = np.linalg.eigh(np.asarray(w_cov, dtype=float))
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    total = np.zeros(M)
    chunk = 10000
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        z = rng.standard_normal((n, M, C))
        draws = w_mean[None] + np.einsum("ij,njc->nic", root, z)
        total += np.sum(draws ** 2, axis=(0, 2))
        done += n
    return total / samples


def feature_ridge(Phi, Y, alpha, tau):
    """Posterior mean of ``W`` in ``Y = Phi W + noise`` with prior precisions
    ``alpha`` (per row) and noise precision ``tau``, via the N x N dual system::

        W = A^-1 Phi^T (Phi A^-1 Phi^T + I / tau)^-1 Y,   A = diag(alpha)
    """
    Phi = np.atleast_2d(np.asarray(Phi, dtype=float))
    Y = np.asarray(Y, dtype=float)
    a_inv = 1.0 / np.broadcast_to(np.asarray(alpha, dtype=float), (Phi.shape[1],))
    K = (Phi * a_inv) @ Phi.T + np.eye(Phi.shape[0]) / tau
    return a_inv[:, None] * (Phi.T @ np.linalg.solve(K, Y))
