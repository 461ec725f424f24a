"""End-to-end fitting: feature sampling, VI sweeps, gamma ascent and ARD pruning."""

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import Standardizer, fit_standardizer, Dataset
from .elbo import AdamState, adam_ascend_gamma, compute_elbo
from .exceptions import FormatError, InvalidArgument, NumericalFailure
from .features import RffMap, apply_map, median_heuristic_gamma, sample_map
from .vi import Hyperparams, Posterior, init_posterior, sweep

logger = logging.getLogger(__name__)

MAX_DEFAULT_FEATURES = 4000
MODEL_MAGIC = "RFFBLR-MODEL"
MODEL_FORMAT_VERSION = 1


@dataclass
class TrainConfig:
    m_initial: Optional[int] = None  # None: min(2N, 4000)
    seed: int = 0
    hyper: Hyperparams = field(default_factory=Hyperparams)
    prune_threshold: float = 1e4
    prune_every: int = 10
    max_iterations: int = 500
    elbo_rel_tol: float = 1e-6
    elbo_window: int = 5
    gamma_steps_per_sweep: int = 5  # 0 freezes gamma
    warmup_sweeps: int = 10
    standardize_targets: bool = True
    standardize_inputs: bool = True
    gamma0: Optional[float] = None  # None: median heuristic
    scale_features: bool = False  # unit-amplitude features keep the prune threshold scale-free
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    def __post_init__(self):
        if self.m_initial is not None and self.m_initial < 1:
            raise InvalidArgument("m_initial must be >= 1")
        for name in ("prune_every", "max_iterations", "elbo_window"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        for name in ("gamma_steps_per_sweep", "warmup_sweeps"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be >= 0")
        for name in ("prune_threshold", "elbo_rel_tol", "learning_rate"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        if self.gamma0 is not None and not self.gamma0 > 0:
            raise InvalidArgument("gamma0 must be positive")


@dataclass
class TrainedModel:
    rff: RffMap
    posterior: Posterior
    standardizer: Standardizer
    history: dict = field(default_factory=lambda: {"elbo": [], "gamma": [], "active": []})
    feature_names: list = field(default_factory=list)
    task_names: list = field(default_factory=list)

    @property
    def active_features(self):
        return self.rff.n_features

    @property
    def gamma(self):
        return self.rff.gamma


def prune(model, threshold):
    """Drop every feature with ``<alpha_m> > threshold`` from map and posterior.

    ``model`` is anything with ``rff`` and ``posterior`` attributes. At least one
    feature (the one with smallest ``<alpha_m>``) is always kept. Returns the
    number of features removed.
    """
    alpha = model.posterior.alpha_mean
    keep = np.flatnonzero(alpha <= threshold)
    if keep.size == 0:
        keep = np.array([int(np.argmin(alpha))])
        warnings.warn(f"every feature exceeded the prune threshold {threshold:g}; "
                      "keeping the single most relevant one", RuntimeWarning, stacklevel=2)
    removed = alpha.size - keep.size
    if removed:
        model.rff = model.rff.subset(keep)
        model.posterior = model.posterior.subset(keep)
    return removed


@dataclass
class _State:
    rff: RffMap
    posterior: Posterior


def _converged(elbo, window, tol):
    if len(elbo) <= window:
        return False
    return abs(elbo[-1] - elbo[-1 - window]) < tol * max(abs(elbo[-1]), 1e-300)


def fit(X, Y, cfg=None, feature_names=None, task_names=None):
    """Fit the multitask model; returns a :class:`TrainedModel`.

    Each outer iteration runs one mean-field sweep, records the bound, then
    (after warm-up) takes ``gamma_steps_per_sweep`` Adam steps on log(gamma)
    and prunes every ``prune_every`` iterations.
    """
    cfg = cfg or TrainConfig()
    data = Dataset(X, Y, list(feature_names or []), list(task_names or []))
    st = fit_standardizer(data, inputs=cfg.standardize_inputs, targets=cfg.standardize_targets)
    Xs = st.transform_inputs(data.X)
    Ys = st.transform_targets(data.Y)
    N, D = Xs.shape
    C = Ys.shape[1]
    M = cfg.m_initial or min(2 * N, MAX_DEFAULT_FEATURES)
    gamma0 = cfg.gamma0 or median_heuristic_gamma(Xs, seed=cfg.seed)

    state = _State(sample_map(D, M, cfg.seed, gamma0, cfg.scale_features),
                   init_posterior(M, C, cfg.hyper))
    adam = AdamState(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_hat)
    history = {"elbo": [], "gamma": [], "active": []}
    it = 0
    try:
        for it in range(1, cfg.max_iterations + 1):
            Phi = apply_map(state.rff, Xs)
            gram = Phi.T @ Phi
            sweep(state.posterior, Phi, Ys, cfg.hyper, gram)
            history["elbo"].append(compute_elbo(state.posterior, Phi, Ys, cfg.hyper, gram))
            history["gamma"].append(state.rff.gamma)
            history["active"].append(state.rff.n_features)
            past_warmup = it > cfg.warmup_sweeps
            if _converged(history["elbo"], cfg.elbo_window, cfg.elbo_rel_tol) and (
                    past_warmup or cfg.gamma_steps_per_sweep == 0):
                break
            if past_warmup and cfg.gamma_steps_per_sweep:
                adam_ascend_gamma(adam, state.posterior, state.rff, Xs, Ys,
                                  cfg.gamma_steps_per_sweep)
            if past_warmup and it % cfg.prune_every == 0:
                removed = prune(state, cfg.prune_threshold)
                if removed:
                    logger.debug("iteration %d: pruned %d features, %d left",
                                 it, removed, state.rff.n_features)
        # leave the posterior consistent with the final gamma and feature set
        prune(state, cfg.prune_threshold)
        Phi = apply_map(state.rff, Xs)
        gram = Phi.T @ Phi
        sweep(state.posterior, Phi, Ys, cfg.hyper, gram)
        history["elbo"].append(compute_elbo(state.posterior, Phi, Ys, cfg.hyper, gram))
        history["gamma"].append(state.rff.gamma)
        history["active"].append(state.rff.n_features)
    except NumericalFailure as exc:
        raise NumericalFailure(f"iteration {it}: {exc}") from exc
    history["iterations"] = it
    return TrainedModel(state.rff, state.posterior, st, history,
                        list(data.feature_names), list(data.task_names))


def _check_input(model, Xnew):
    Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
    if Xnew.shape[1] != model.rff.input_dim:
        raise InvalidArgument(f"Xnew has {Xnew.shape[1]} columns, model expects {model.rff.input_dim}")
    return Xnew


def predict(model, Xnew):
    """Posterior-mean prediction ``phi(x) <W> + <b>`` in original target units."""
    Xnew = _check_input(model, Xnew)
    Phi = apply_map(model.rff, model.standardizer.transform_inputs(Xnew))
    return model.standardizer.invert_targets(Phi @ model.posterior.w_mean + model.posterior.b_mean)


def predict_with_noise_scale(model, Xnew):
    """Prediction plus learned noise sd ``<tau>^(-1/2)``, one value per task."""
    mean = predict(model, Xnew)
    noise_sd = model.standardizer.target_scale / np.sqrt(model.posterior.tau_mean)
    return mean, noise_sd


def save_model(model, path):
    """Write ``model`` to a versioned ``.npz`` container."""
    p, s, r = model.posterior, model.standardizer, model.rff
    arrays = dict(
        magic=np.array(MODEL_MAGIC), format_version=np.array(MODEL_FORMAT_VERSION),
        D=np.array(r.input_dim), M_active=np.array(r.n_features),
        gamma=np.array(r.gamma), scale_features=np.array(r.scale_features),
        n_sampled=np.array(r.n_sampled),
        epsilon=r.epsilon, phases=r.phases,
        w_mean=p.w_mean, w_cov=p.w_cov, alpha_a=p.alpha_a, alpha_b=p.alpha_b,
        b_mean=p.b_mean, b_cov_diag=np.array(p.b_cov_diag),
        tau_a=np.array(p.tau_a), tau_b=np.array(p.tau_b),
        input_mean=s.input_mean, input_scale=s.input_scale,
        target_mean=s.target_mean, target_scale=s.target_scale,
        input_degenerate=s.input_degenerate, target_degenerate=s.target_degenerate,
        history_elbo=np.asarray(model.history.get("elbo", []), dtype=float),
        history_gamma=np.asarray(model.history.get("gamma", []), dtype=float),
        history_active=np.asarray(model.history.get("active", []), dtype=np.int64),
        feature_names=np.array(model.feature_names, dtype=str),
        task_names=np.array(model.task_names, dtype=str),
    )
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path):
    """Read a model written by :func:`save_model`."""
    try:
        with np.load(Path(path), allow_pickle=False) as z:
            f = {k: z[k] for k in z.files}
    except (ValueError, OSError, EOFError) as exc:
        raise FormatError(f"{path}: not a model file ({exc})") from exc
    if "magic" not in f or str(f["magic"]) != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic string")
    version = int(f["format_version"])
    if version != MODEL_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    rff = RffMap(f["epsilon"], f["phases"], float(f["gamma"]),
                 bool(f["scale_features"]), int(f["n_sampled"]))
    post = Posterior(f["w_mean"], f["w_cov"], f["alpha_a"], f["alpha_b"], f["b_mean"],
                     float(f["b_cov_diag"]), float(f["tau_a"]), float(f["tau_b"]))
    st = Standardizer(f["input_mean"], f["input_scale"], f["target_mean"], f["target_scale"],
                      f["input_degenerate"], f["target_degenerate"])
    history = {"elbo": f["history_elbo"].tolist(), "gamma": f["history_gamma"].tolist(),
               "active": f["history_active"].tolist()}
    return TrainedModel(rff, post, st, history,
                        f["feature_names"].tolist(), f["task_names"].tolist())
