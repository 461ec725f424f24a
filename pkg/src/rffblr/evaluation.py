"""Cross-validation, feature-count sweeps and timing benchmarks."""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from ._rng import STREAM_FOLD_FIT, derive_seed
from .data import kfold
from .exceptions import InvalidArgument, UndefinedMetric
from .metrics import aggregate, r2
from .synthetic import make_sparse_rff
from .trainer import TrainConfig, fit, predict

logger = logging.getLogger(__name__)

THREADS_ENV = "RFFBLR_THREADS"
SCHEMA_VERSION = 1


def fold_workers(env=None):
    """Worker count from ``RFFBLR_THREADS``: unset means serial, 0 means all cores."""
    env = os.environ if env is None else env
    raw = env.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgument(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise InvalidArgument(f"{THREADS_ENV} must be >= 0")
    return n or (os.cpu_count() or 1)


def _run_fold(data, cfg, fold, train, test):
    fold_cfg = replace(cfg, seed=derive_seed(cfg.seed, STREAM_FOLD_FIT, fold))
    model = fit(data.X[train], data.Y[train], fold_cfg,
                data.feature_names, data.task_names)
    pred = predict(model, data.X[test])
    rows = []
    for c, task in enumerate(data.task_names):
        try:
            score = r2(data.Y[test, c], pred[:, c])
        except UndefinedMetric:
            logger.warning("fold %d task %s: constant test targets, R2 undefined", fold, task)
            score = float("nan")
        rows.append(dict(fold=fold, task=task, r2=score, n_train=int(train.size),
                         n_test=int(test.size), active_features=model.active_features,
                         gamma=model.gamma, iterations=model.history["iterations"]))
    return rows


def cross_validate(data, cfg=None, k=10, seed=None, workers=1):
    """k-fold CV; each fold fits its own standardizer and uses a derived seed.

    Returns ``(fold_rows, summary)``. Rows come back in fold order whatever
    the completion order of parallel workers.
    """
    cfg = cfg or TrainConfig()
    seed = cfg.seed if seed is None else seed
    plan = kfold(data.n_samples, k, seed)
    jobs = list(plan.folds())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_fold, data, cfg, f, tr, te) for f, tr, te in jobs]
            per_fold = [fut.result() for fut in futures]
    else:
        per_fold = [_run_fold(data, cfg, f, tr, te) for f, tr, te in jobs]
    rows = [r for fold_rows in per_fold for r in fold_rows]
    return rows, summarize(rows, data.task_names, k, seed)


def _stats(scores):
    finite = [s for s in scores if np.isfinite(s)]
    if not finite:
        return dict(mean_r2=float("nan"), sd_r2=float("nan"), n_scores=0)
    mean, sd = aggregate(finite)
    return dict(mean_r2=mean, sd_r2=sd, n_scores=len(finite))


def summarize(rows, task_names, k, seed):
    """Mean and population sd of R^2 per task and over all (fold, task) pairs."""
    per_task = [dict(task=t, **_stats([r["r2"] for r in rows if r["task"] == t]))
                for t in task_names]
    overall = _stats([r["r2"] for r in rows])
    folds = sorted({r["fold"]: r["active_features"] for r in rows}.items())
    return dict(schema_version=SCHEMA_VERSION, folds=k, seed=seed, sd="population",
                overall=overall, per_task=per_task,
                active_features=[a for _, a in folds])


def sweep_m(data, m_values, cfg=None, k=10, workers=1):
    """One cross-validation per initial feature count."""
    if not m_values:
        raise InvalidArgument("need at least one M value")
    cfg = cfg or TrainConfig()
    out = []
    for m in m_values:
        rows, summary = cross_validate(data, replace(cfg, m_initial=int(m)), k, workers=workers)
        out.append(dict(M_initial=int(m),
                        M_final=float(np.mean(summary["active_features"])),
                        mean_r2=summary["overall"]["mean_r2"],
                        sd_r2=summary["overall"]["sd_r2"]))
    return out


def bench(n_values, c_values, repeats=3, m=200, max_iterations=50, d=10, seed=0):
    """Seconds per fit on synthetic data for every ``(N, C)`` pair.

    Pruning is switched off and every fit runs exactly ``max_iterations``
    sweeps, so the feature count stays at ``m`` and times are comparable.
    """
    if repeats < 1:
        raise InvalidArgument("repeats must be >= 1")
    cfg = TrainConfig(m_initial=m, max_iterations=max_iterations, seed=seed,
                      prune_threshold=np.inf, elbo_rel_tol=1e-300)
    rows = []
    for n in n_values:
        for c in c_values:
            prob = make_sparse_rff(int(n), d, int(c), m=m, seed=seed)
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                fit(prob.X, prob.Y, cfg)
                times.append(time.perf_counter() - t0)
            rows.append(dict(N=int(n), C=int(c), M=m, iterations=max_iterations,
                             repeats=repeats, mean_seconds=float(np.mean(times)),
                             min_seconds=float(np.min(times))))
    return rows
