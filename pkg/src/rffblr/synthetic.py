"""Synthetic multitask regression problems with known ground truth."""

from dataclasses import dataclass

import numpy as np

from ._rng import STREAM_SYNTHETIC, derive_rng
from .features import RffMap, apply_map, sample_map


@dataclass
class SyntheticProblem:
    X: np.ndarray
    Y: np.ndarray
    Y_clean: np.ndarray
    rff: RffMap
    W: np.ndarray
    active: np.ndarray
    noise_sd: np.ndarray


def make_sparse_rff(n, d, c, m=200, n_active=10, gamma=0.1, snr=10.0,
                    seed=0, map_seed=None):
    """Targets from ``n_active`` of ``m`` random Fourier features plus noise.

    ``snr`` is the signal-to-noise variance ratio per task. The generating map
    is drawn with ``map_seed`` (default ``seed``), so a fit with the same seed
    and ``m`` features starts from the same frequency draws.
    """
    rng = derive_rng(seed, STREAM_SYNTHETIC, 0)
    X = rng.standard_normal((n, d))
    rff = sample_map(d, m, seed if map_seed is None else map_seed, gamma)
    active = np.sort(rng.choice(m, size=n_active, replace=False))
    W = np.zeros((m, c))
    W[active] = rng.standard_normal((n_active, c)) * np.sqrt(m / 2.0)
    Y_clean = apply_map(rff, X) @ W
    noise_sd = Y_clean.std(axis=0) / np.sqrt(snr)
    Y = Y_clean + rng.standard_normal((n, c)) * noise_sd
    return SyntheticProblem(X, Y, Y_clean, rff, W, active, noise_sd)


def make_smooth(n, d, c, gamma=0.1, noise_sd=0.1, n_basis=2000, seed=0):
    """Approximate draws from an RBF-kernel Gaussian process (one per task).

    Each task is a dense random combination of ``n_basis`` cosine features at
    lengthscale ``gamma``, which converges to a GP sample as ``n_basis`` grows.
    """
    rng = derive_rng(seed, STREAM_SYNTHETIC, 1)
    X = rng.standard_normal((n, d))
    rff = sample_map(d, n_basis, int(rng.integers(2**31)), gamma)
    W = rng.standard_normal((n_basis, c))
    Y_clean = apply_map(rff, X) @ W
    sd = np.full(c, float(noise_sd))
    Y = Y_clean + rng.standard_normal((n, c)) * sd
    return SyntheticProblem(X, Y, Y_clean, rff, W, np.arange(n_basis), sd)
