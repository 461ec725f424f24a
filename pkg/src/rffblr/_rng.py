import numpy as np

# Stream identifiers; every random draw in the package comes from one of these.
STREAM_EPSILON = 0
STREAM_PHASES = 1
STREAM_MEDIAN = 2
STREAM_FOLDS = 3
STREAM_FOLD_FIT = 4
STREAM_SYNTHETIC = 5


def derive_rng(seed, *keys):
    """Return an independent generator for ``(seed, *keys)``.

    Streams with different keys are statistically independent and each one
    is stable across numpy versions that keep PCG64 + SeedSequence.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *keys):
    """Integer seed derived from ``(seed, *keys)``, for handing to a sub-run."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
