"""EM-style estimation loop for the mixture cure model.

One iteration: (E) update the fractional cure weights from the current
uncured probabilities and latency parameters; (M) refit the incidence part
(multiple-imputation SVM or weighted logistic) and maximize the weighted
latency objective.  Convergence is declared on the L2 distance between
successive summary vectors theta = (mean pi, alpha, gamma).  The SVM
branch carries Monte Carlo imputation noise, so it additionally requires
the criterion to hold on two consecutive iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed

from . import svm as svm_mod
from ._validation import check_weights
from .data import Dataset, midpoint_times
from .errors import BootstrapUnstableError, NoEventsError, ValidationError
from .latency import LatencyParams, maximize_q2, survival_u, _q2_terms
from .logistic import LogisticParams, fit_weighted_logistic, logistic_pi

SVM_PATIENCE = 2
DEFAULT_INIT_ALPHA = 0.1


@dataclass(frozen=True)
class EMConfig:
    """Configuration of one EM fit."""

    incidence: str = "svm"             # "svm" or "logistic"
    epsilon: float = 1e-3
    max_iter: int = 200
    n_impute: int = 5
    hyper_grid: tuple = ()             # empty -> default grid
    folds: int = 5
    bootstrap_b: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.incidence not in ("svm", "logistic"):
            raise ValidationError(f"unknown incidence model {self.incidence!r}")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1")
        if self.n_impute < 1:
            raise ValidationError("n_impute must be at least 1")

    def grid(self):
        return list(self.hyper_grid) if self.hyper_grid else svm_mod.default_grid()


@dataclass(frozen=True)
class TraceEntry:
    """Per-iteration summary theta = (mean pi, alpha, gamma)."""

    iteration: int
    mean_pi: float
    alpha: float
    gamma: np.ndarray
    criterion: float
    loglik: float


@dataclass(frozen=True)
class FitResult:
    """Final state of an EM fit."""

    pi_hat: np.ndarray
    latency: LatencyParams
    weights: np.ndarray
    iterations: int
    converged: bool
    trace: tuple
    diagnostics: dict
    logistic_params: LogisticParams | None = None
    hyperparams: svm_mod.HyperParams | None = None


def _km_survival(times, events):
    """Product-limit survival estimate; returns step times and values."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events)
    event_times = np.unique(times[events == 1])
    values = np.empty(event_times.shape[0])
    s = 1.0
    for k, t in enumerate(event_times):
        at_risk = int(np.sum(times >= t))
        deaths = int(np.sum((times == t) & (events == 1)))
        s *= 1.0 - deaths / at_risk
        values[k] = s
    return event_times, values


def _km_at(step_times, step_values, t):
    """Right-continuous evaluation of the product-limit curve."""
    idx = np.searchsorted(step_times, t, side="right") - 1
    out = np.ones(np.asarray(t).shape)
    has = idx >= 0
    out[has] = step_values[idx[has]]
    return out


def initial_values(dataset, hp=None, folds=svm_mod.CALIBRATION_FOLDS, rng=None):
    """Starting point for the EM loop.

    The uncured probabilities start from an SVM trained with the censoring
    indicator standing in for the cure status, calibrated on out-of-fold
    decision values.  The latency parameters come from ordinary least
    squares of log(-log S(t)) on (log t, x), with S the product-limit
    estimate at interval midpoints; a non-positive fitted shape falls back
    to 0.1.
    """
    if not np.any(dataset.delta == 1):
        raise NoEventsError("dataset has no observed events")
    rng = np.random.default_rng(0) if rng is None else rng
    hp = hp if hp is not None else svm_mod.HyperParams(C=1.0, sigma2=1.0)

    labels = dataset.delta.astype(np.int64)
    if np.unique(labels).size < 2:
        # every subject has an event: degenerate labels, flat probabilities
        pi0 = np.clip(
            np.full(dataset.n, labels.mean()), svm_mod.PROB_CLIP, 1.0 - svm_mod.PROB_CLIP
        )
    else:
        gram = svm_mod.rbf_gram(dataset.z, hp.sigma2)
        model = svm_mod.smo_train(2.0 * labels - 1.0, dataset.z, hp, gram=gram)
        psi_full = (model.d * model.labels) @ gram - model.b
        psi_cv = svm_mod.cross_val_decision_values(
            labels, dataset.z, hp, folds=folds, rng=rng, gram=gram
        )
        calibration = svm_mod.platt_fit(psi_cv, labels)
        pi0 = svm_mod.platt_probability(calibration, psi_full)

    t = midpoint_times(dataset)
    step_t, step_s = _km_survival(t, dataset.delta)
    s_hat = _km_at(step_t, step_s, t)
    keep = (s_hat > 0.0) & (s_hat < 1.0) & (t > 0.0)
    p = dataset.p
    latency = None
    if int(keep.sum()) >= p + 1:
        response = np.log(-np.log(s_hat[keep]))
        design = np.hstack([np.log(t[keep])[:, None], dataset.x[keep]])
        coef, *_ = np.linalg.lstsq(design, response, rcond=None)
        if np.all(np.isfinite(coef)):
            alpha0 = float(coef[0]) if coef[0] > 0 else DEFAULT_INIT_ALPHA
            latency = LatencyParams(alpha=alpha0, gamma=coef[1:])
    if latency is None:
        latency = LatencyParams(alpha=DEFAULT_INIT_ALPHA, gamma=np.zeros(p))
    return pi0, latency


def e_step(dataset, pi, latency):
    """Conditional cure-status expectations.

    w_i = 1 for observed events; otherwise
    w_i = pi_i S_u(L_i) / (1 - pi_i + pi_i S_u(L_i)).
    """
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (dataset.n,):
        raise ValidationError(f"pi has shape {pi.shape}, expected ({dataset.n},)")
    if np.any(pi < 0) or np.any(pi > 1):
        raise ValidationError("pi must lie in [0, 1]")
    s_left = survival_u(dataset.left, dataset.x, latency)
    numer = pi * s_left
    w = np.where(dataset.delta == 1, 1.0, numer / (1.0 - pi + numer))
    return np.clip(w, 0.0, 1.0)


def observed_loglik(dataset, pi, latency):
    """Observed-data log-likelihood of the mixture cure model.

    sum_i [ delta_i log{pi_i (S_u(L_i) - S_u(R_i))}
            + (1 - delta_i) log{1 - pi_i + pi_i S_u(L_i)} ].
    """
    pi = np.asarray(pi, dtype=float)
    # log{S(L) - S(R)} for events via the floored latency machinery
    # (weights irrelevant for the event terms): Q2 at w=0 keeps only them.
    event_terms, _, _ = _q2_terms(latency.to_vector(), dataset, np.zeros(dataset.n))
    s_left = survival_u(dataset.left, dataset.x, latency)
    ev = dataset.delta == 1
    value = float(np.log(pi[ev]).sum()) + event_terms
    cens = ~ev
    value += float(np.log(1.0 - pi[cens] + pi[cens] * s_left[cens]).sum())
    return value


def _theta(pi, latency):
    return np.concatenate([[float(np.mean(pi))], [latency.alpha], latency.gamma])


def fit_em(dataset, config):
    """Run the EM loop and return a :class:`FitResult`.

    Deterministic given (dataset, config): all randomness flows from a
    generator seeded with ``config.seed``.
    """
    rng = np.random.default_rng(config.seed)
    diagnostics = {
        "single_class_fallbacks": 0,
        "latency_nonconverged": 0,
        "latency_fallbacks": 0,
        "logistic_capped": 0,
    }
    hp = None
    gram = None
    if config.incidence == "svm":
        hp = svm_mod.tune_hyperparams(
            dataset.delta.astype(np.int64), dataset.z,
            grid=config.grid(), folds=config.folds, rng=rng,
        )
        gram = svm_mod.rbf_gram(dataset.z, hp.sigma2)
    pi, latency = initial_values(dataset, hp=hp, rng=rng)
    pi = np.clip(pi, svm_mod.PROB_CLIP, 1.0 - svm_mod.PROB_CLIP)

    theta_prev = _theta(pi, latency)
    trace = []
    weights = np.ones(dataset.n)
    logistic_params = None
    converged = False
    hits = 0
    iterations = 0
    for iteration in range(1, config.max_iter + 1):
        iterations = iteration
        weights = e_step(dataset, pi, latency)
        if config.incidence == "svm":
            pi = svm_mod.impute_and_estimate_pi(
                weights, dataset.z, config.n_impute, hp, rng,
                gram=gram, diagnostics=diagnostics,
            )
        else:
            logistic_params = fit_weighted_logistic(dataset.z, weights)
            if logistic_params.capped:
                diagnostics["logistic_capped"] += 1
            pi = logistic_pi(logistic_params, dataset.z)
        result = maximize_q2(dataset, weights, latency)
        latency = result.params
        if not result.converged:
            diagnostics["latency_nonconverged"] += 1
        if result.used_fallback:
            diagnostics["latency_fallbacks"] += 1

        theta = _theta(pi, latency)
        criterion = float(np.linalg.norm(theta - theta_prev))
        theta_prev = theta
        trace.append(TraceEntry(
            iteration=iteration, mean_pi=float(np.mean(pi)),
            alpha=latency.alpha, gamma=latency.gamma.copy(), criterion=criterion,
            loglik=observed_loglik(dataset, pi, latency),
        ))
        if criterion < config.epsilon:
            hits += 1
            needed = SVM_PATIENCE if config.incidence == "svm" else 1
            if hits >= needed:
                converged = True
                break
        else:
            hits = 0
    return FitResult(
        pi_hat=pi,
        latency=latency,
        weights=weights,
        iterations=iterations,
        converged=converged,
        trace=tuple(trace),
        diagnostics=diagnostics,
        logistic_params=logistic_params,
        hyperparams=hp,
    )


@dataclass(frozen=True)
class BootstrapResult:
    """Standard errors from nonparametric bootstrap resampling."""

    alpha_se: float
    gamma_se: np.ndarray
    mean_pi_se: float
    replicates: np.ndarray        # (B, p + 2) columns: alpha, gamma..., mean pi
    n_failed: int
    n_nonconverged: int


def _bootstrap_indices(rng, n):
    return rng.integers(0, n, size=n)


def _bootstrap_one(dataset, config, seed_pair):
    """One bootstrap replicate: resample rows, refit, return the estimates."""
    idx_seed, fit_seed = seed_pair
    idx_rng = np.random.default_rng(idx_seed)
    last_error = None
    for _attempt in range(6):
        indices = _bootstrap_indices(idx_rng, dataset.n)
        resampled = dataset.subset(indices)
        try:
            fit = fit_em(resampled, replace(config, seed=int(fit_seed)))
        except Exception as exc:  # redraw on hard failures, up to 5 times
            last_error = exc
            continue
        row = np.concatenate([
            [fit.latency.alpha], fit.latency.gamma, [float(np.mean(fit.pi_hat))]
        ])
        return row, (0 if fit.converged else 1), None
    return None, 0, last_error


def bootstrap_se(dataset, config, jobs=1):
    """Nonparametric bootstrap standard errors for the latency parameters
    and the mean uncured probability.

    Replicates that fail outright are redrawn (up to five times each) and
    counted; more than 20% failures abort.  Non-converged replicates are
    kept in the standard deviation (dropping them would understate the
    spread) but counted in ``n_nonconverged``.
    """
    B = int(config.bootstrap_b)
    if B < 2:
        raise ValidationError("bootstrap_b must be at least 2")
    children = np.random.SeedSequence(config.seed).spawn(B)
    seed_pairs = [tuple(int(s) for s in c.generate_state(2)) for c in children]
    runner = Parallel(n_jobs=jobs) if jobs != 1 else None
    if runner is not None:
        outcomes = runner(
            delayed(_bootstrap_one)(dataset, config, pair) for pair in seed_pairs
        )
    else:
        outcomes = [_bootstrap_one(dataset, config, pair) for pair in seed_pairs]
    rows = [row for row, _, _ in outcomes if row is not None]
    n_failed = sum(1 for row, _, _ in outcomes if row is None)
    n_nonconverged = sum(flag for _, flag, _ in outcomes)
    if n_failed > 0.2 * B:
        raise BootstrapUnstableError(
            f"{n_failed} of {B} bootstrap replicates failed"
        )
    matrix = np.vstack(rows)
    sds = matrix.std(axis=0, ddof=1)
    return BootstrapResult(
        alpha_se=float(sds[0]),
        gamma_se=sds[1:-1].copy(),
        mean_pi_se=float(sds[-1]),
        replicates=matrix,
        n_failed=n_failed,
        n_nonconverged=n_nonconverged,
    )
