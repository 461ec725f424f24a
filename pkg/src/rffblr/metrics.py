"""Coefficient of determination and its aggregation over tasks and folds."""

import numpy as np

from .exceptions import InvalidArgument, UndefinedMetric


def r2(y_true, y_pred):
    """``1 - SS_res / SS_tot`` with SS_tot taken about the mean of ``y_true``."""
    y_true = np.ravel(np.asarray(y_true, dtype=float))
    y_pred = np.ravel(np.asarray(y_pred, dtype=float))
    if y_true.shape != y_pred.shape:
        raise InvalidArgument(f"length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size < 2:
        raise InvalidArgument("r2 needs at least two values")
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedMetric("r2 is undefined for constant y_true")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot)


def r2_per_task(Y_true, Y_pred):
    Y_true = np.atleast_2d(Y_true)
    Y_pred = np.atleast_2d(Y_pred)
    return [r2(Y_true[:, c], Y_pred[:, c]) for c in range(Y_true.shape[1])]


def aggregate(scores):
    """Flat mean and population standard deviation of all scores."""
    s = np.asarray(list(scores), dtype=float).ravel()
    if s.size == 0:
        raise InvalidArgument("cannot aggregate an empty list of scores")
    # sort so the result does not depend on summation order
    s = np.sort(s)
    return float(s.mean()), float(s.std())
