"""Random Fourier Feature map approximating the RBF kernel exp(-gamma*||x-x'||^2).

Frequencies are reparameterized as ``omega_m = sqrt(2*gamma) * eps_m`` with
``eps_m ~ N(0, I_D)`` frozen at sampling time, so the map is a smooth function
of ``gamma`` and can be differentiated with respect to it.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from ._rng import STREAM_EPSILON, STREAM_MEDIAN, STREAM_PHASES, derive_rng
from .exceptions import InvalidArgument, InvalidState

MEDIAN_HEURISTIC_PAIRS = 500


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass
class RffMap:
    """Sampled feature map.

    Attributes
    ----------
    epsilon : ndarray, shape (M, D)
        Standard-normal frequency draws. Read-only.
    phases : ndarray, shape (M,)
        Offsets in ``[0, 2*pi)``. Read-only.
    gamma : float
        RBF inverse squared lengthscale. The only mutable field.
    scale_features : bool
        Multiply features by ``sqrt(2 / n_sampled)``.
    n_sampled : int
        Number of features originally drawn. The normalization constant is
        tied to it so that pruning rows leaves surviving features unchanged.
    """

    epsilon: np.ndarray
    phases: np.ndarray
    gamma: float
    scale_features: bool = True
    n_sampled: int = field(default=-1)

    def __post_init__(self):
        self.epsilon = _frozen(np.atleast_2d(self.epsilon))
        self.phases = _frozen(np.ravel(self.phases))
        if self.epsilon.shape[0] != self.phases.shape[0]:
            raise InvalidArgument("epsilon rows and phases length differ")
        if self.n_sampled < 0:
            self.n_sampled = self.epsilon.shape[0]
        self.gamma = float(self.gamma)
        if not self.gamma > 0:
            raise InvalidArgument(f"gamma must be positive, got {self.gamma}")

    @property
    def n_features(self):
        return self.epsilon.shape[0]

    @property
    def input_dim(self):
        return self.epsilon.shape[1]

    @property
    def scale(self):
        return np.sqrt(2.0 / self.n_sampled) if self.scale_features else 1.0

    def subset(self, keep):
        """New map restricted to the feature indices ``keep``."""
        keep = np.asarray(keep)
        return RffMap(self.epsilon[keep], self.phases[keep], self.gamma,
                      self.scale_features, self.n_sampled)

    def frozen_checksum(self):
        """Hash of the frozen draws, used to assert they never change."""
        h = hashlib.sha256()
        h.update(self.epsilon.tobytes())
        h.update(self.phases.tobytes())
        return h.hexdigest()


def sample_map(D, M, seed, gamma0, scale_features=True):
    """Draw a feature map with ``M`` features for ``D``-dimensional inputs."""
    if int(D) < 1 or int(M) < 1:
        raise InvalidArgument(f"dimensions must be >= 1, got D={D}, M={M}")
    if not gamma0 > 0:
        raise InvalidArgument(f"gamma0 must be positive, got {gamma0}")
    eps = derive_rng(seed, STREAM_EPSILON).standard_normal((int(M), int(D)))
    phases = derive_rng(seed, STREAM_PHASES).uniform(0.0, 2.0 * np.pi, size=int(M))
    return RffMap(eps, phases, gamma0, scale_features)


def projection(rff, X):
    """Unscaled projections ``X @ eps.T``; independent of gamma."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != rff.input_dim:
        raise InvalidArgument(
            f"X has {X.shape[1]} columns, map expects {rff.input_dim}")
    return X @ rff.epsilon.T


def apply_map(rff, X):
    """Feature matrix ``c * cos(sqrt(2*gamma) * X @ eps.T + phases)``, shape (N, M)."""
    Z = projection(rff, X)
    return rff.scale * np.cos(np.sqrt(2.0 * rff.gamma) * Z + rff.phases)


def map_gamma_jacobian(rff, X):
    """Elementwise derivative of :func:`apply_map` with respect to ``gamma``."""
    Z = projection(rff, X)
    root = np.sqrt(2.0 * rff.gamma)
    return -rff.scale * np.sin(root * Z + rff.phases) * (Z / root)


def map_and_jacobian(rff, X, Z=None):
    """``(apply_map(rff, X), map_gamma_jacobian(rff, X))`` sharing one projection.

    ``Z`` may carry a precomputed :func:`projection` of ``X``.
    """
    if Z is None:
        Z = projection(rff, X)
    root = np.sqrt(2.0 * rff.gamma)
    arg = root * Z + rff.phases
    return rff.scale * np.cos(arg), -rff.scale * np.sin(arg) * (Z / root)


def exact_rbf_kernel(gamma, x, x2):
    x = np.ravel(np.asarray(x, dtype=float))
    x2 = np.ravel(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise InvalidArgument(f"dimension mismatch: {x.shape} vs {x2.shape}")
    if not gamma > 0:
        raise InvalidArgument(f"gamma must be positive, got {gamma}")
    d = x - x2
    return float(np.exp(-gamma * d @ d))


def kernel_approximation_error(rff, X, X2=None):
    """Absolute error of feature inner products against the exact kernel.

    With ``X2`` omitted, every pair ``i <= j`` of rows of ``X`` is scored
    (diagonal included). With ``X2`` given, rows are paired index-wise.

    Returns
    -------
    dict with keys ``mean_abs`` and ``max_abs``.
    """
    if not rff.scale_features:
        raise InvalidState("kernel approximation needs a scaled feature map")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = apply_map(rff, X)
    if X2 is None:
        i, j = np.triu_indices(X.shape[0])
        approx = np.einsum("nm,nm->n", P[i], P[j])
        diff = X[i] - X[j]
    else:
        X2 = np.atleast_2d(np.asarray(X2, dtype=float))
        if X2.shape != X.shape:
            raise InvalidArgument("paired inputs must have equal shapes")
        approx = np.einsum("nm,nm->n", P, apply_map(rff, X2))
        diff = X - X2
    exact = np.exp(-rff.gamma * np.einsum("nd,nd->n", diff, diff))
    err = np.abs(approx - exact)
    return {"mean_abs": float(err.mean()), "max_abs": float(err.max())}


def median_heuristic_gamma(X, seed=0, max_pairs=MEDIAN_HEURISTIC_PAIRS):
    """``1 / median ||x_i - x_j||^2`` over at most ``max_pairs`` distinct pairs."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if n < 2:
        raise InvalidArgument("median heuristic needs at least two points")
    if n * (n - 1) // 2 <= max_pairs:
        sq = pdist(X, "sqeuclidean")
    else:
        rng = derive_rng(seed, STREAM_MEDIAN)
        i = rng.integers(0, n, size=max_pairs)
        j = (i + rng.integers(1, n, size=max_pairs)) % n
        d = X[i] - X[j]
        sq = np.einsum("nd,nd->n", d, d)
    med = float(np.median(sq))
    if med <= 0:
        # duplicated inputs dominate; fall back to the mean
        med = float(np.mean(sq))
    if med <= 0:
        return 1.0
    return 1.0 / med
