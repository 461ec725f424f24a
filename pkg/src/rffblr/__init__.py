"""Multitask Bayesian regression on random Fourier features with shared ARD sparsity."""

from .data import (Dataset, FoldPlan, Standardizer, fit_standardizer, kfold, load_arff, load_csv,
                   load_dataset)
from .elbo import AdamState, adam_ascend_gamma, compute_elbo, gamma_gradient, gamma_objective
from .evaluation import bench, cross_validate, summarize, sweep_m
from .exceptions import (DataError, FormatError, InvalidArgument, InvalidState,
                         NumericalFailure, RffBlrError, UndefinedMetric)
from .features import (RffMap, apply_map, exact_rbf_kernel, kernel_approximation_error,
                       map_gamma_jacobian, median_heuristic_gamma, sample_map)
from .metrics import aggregate, r2
from .trainer import (TrainConfig, TrainedModel, fit, load_model, predict,
                      predict_with_noise_scale, prune, save_model)
from .vi import Hyperparams, Posterior, init_posterior, sweep

__version__ = "0.1.0"
