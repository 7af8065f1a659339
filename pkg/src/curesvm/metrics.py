"""Evaluation metrics and the Monte Carlo study harness.

Bias and MSE of the uncured probability and of the susceptible survival
probability are averaged within each run and then across runs.  ROC/AUC
against the (simulation-only) true cure status pools subjects across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from joblib import Parallel, delayed

from .data import midpoint_times, standardize_covariates
from .em import EMConfig, fit_em
from .errors import DegenerateLabelsError, ShapeError, StudyUnstableError
from .latency import survival_u
from .simulate import ScenarioSpec, generate_dataset


@dataclass(frozen=True)
class MetricsSummary:
    """Aggregated study metrics for one incidence model."""

    bias_pi: float
    mse_pi: float
    bias_su: float
    mse_su: float
    params: dict                 # name -> {"bias", "sd", "mse"}
    auc: float
    roc: np.ndarray              # (k, 2) columns fpr, tpr
    runs: int


def bias_mse_pi(true_pi, est_pi):
    """Run-averaged bias and MSE of the uncured probability.

    Both arguments are (runs, n) matrices or equal-length sequences of
    per-run vectors.
    """
    true_m = [np.asarray(row, dtype=float) for row in true_pi]
    est_m = [np.asarray(row, dtype=float) for row in est_pi]
    if len(true_m) != len(est_m) or any(
        t.shape != e.shape for t, e in zip(true_m, est_m)
    ):
        raise ShapeError("true and estimated matrices must have matching shapes")
    bias = float(np.mean([np.mean(e - t) for t, e in zip(true_m, est_m)]))
    mse = float(np.mean([np.mean((e - t) ** 2) for t, e in zip(true_m, est_m)]))
    return bias, mse


def bias_mse_survival(datasets, est_params, true_params):
    """Run-averaged bias and MSE of the susceptible survival probability.

    Survival is compared at the interval midpoint (left endpoint when
    right-censored), with estimated vs true latency parameters.
    """
    if len(datasets) != len(est_params):
        raise ShapeError("need one parameter estimate per dataset")
    diffs = []
    sq = []
    for dataset, est in zip(datasets, est_params):
        t = midpoint_times(dataset)
        s_est = survival_u(t, dataset.x, est)
        s_true = survival_u(t, dataset.x, true_params)
        diffs.append(np.mean(s_est - s_true))
        sq.append(np.mean((s_est - s_true) ** 2))
    return float(np.mean(diffs)), float(np.mean(sq))


def roc_auc(true_status, scores):
    """ROC curve by threshold sweep and AUC by the trapezoidal rule.

    Tied scores cross the threshold simultaneously, which makes the AUC
    equal the Mann-Whitney statistic with ties counted one half.  The
    trapezoid sum is accumulated in integer counts and divided once, so
    this equality is exact rather than merely close.
    """
    status = np.asarray(true_status)
    scores = np.asarray(scores, dtype=float)
    if status.shape != scores.shape:
        raise ShapeError("status and scores must have equal length")
    n_pos = int(np.sum(status == 1))
    n_neg = int(np.sum(status == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("both classes must be present for a ROC curve")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = status[order] == 1
    tp = np.cumsum(sorted_pos, dtype=np.int64)
    fp = np.cumsum(~sorted_pos, dtype=np.int64)
    distinct = np.flatnonzero(np.diff(sorted_scores))
    boundary = np.concatenate([distinct, [scores.shape[0] - 1]])
    tp_steps = np.concatenate([[0], tp[boundary]])
    fp_steps = np.concatenate([[0], fp[boundary]])
    numerator = int(np.sum((tp_steps[1:] + tp_steps[:-1]) * np.diff(fp_steps)))
    auc = numerator / (2 * n_pos * n_neg)
    roc = np.column_stack([fp_steps / n_neg, tp_steps / n_pos])
    return roc, float(auc)


def _study_run(spec, base_config, seed_triple):
    """One Monte Carlo run: generate, fit both incidence models, collect."""
    data_seed, svm_seed, logistic_seed = seed_triple
    dataset = generate_dataset(spec, np.random.default_rng(data_seed))
    dataset = standardize_covariates(dataset)
    fits = {}
    for incidence, seed in (("svm", svm_seed), ("logistic", logistic_seed)):
        cfg = replace(base_config, incidence=incidence, seed=int(seed))
        fits[incidence] = fit_em(dataset, cfg)
    return {
        "dataset": dataset,
        "true_pi": dataset.true_pi,
        "true_status": dataset.true_status,
        "pi": {k: f.pi_hat for k, f in fits.items()},
        "latency": {k: f.latency for k, f in fits.items()},
    }


def _aggregate(records, spec, model):
    true_pi = [r["true_pi"] for r in records]
    est_pi = [r["pi"][model] for r in records]
    bias_pi_v, mse_pi_v = bias_mse_pi(true_pi, est_pi)
    datasets = [r["dataset"] for r in records]
    latencies = [r["latency"][model] for r in records]
    bias_su_v, mse_su_v = bias_mse_survival(datasets, latencies, spec.latency_truth)

    names = ["alpha"] + [f"gamma{j+1}" for j in range(spec.latency_truth.gamma.shape[0])]
    truth = np.concatenate([[spec.latency_truth.alpha], spec.latency_truth.gamma])
    estimates = np.array([
        np.concatenate([[lat.alpha], lat.gamma]) for lat in latencies
    ])
    params = {}
    for j, name in enumerate(names):
        err = estimates[:, j] - truth[j]
        params[name] = {
            "bias": float(np.mean(err)),
            "sd": float(np.std(estimates[:, j], ddof=1)) if len(records) > 1 else 0.0,
            "mse": float(np.mean(err ** 2)),
        }
    status = np.concatenate([r["true_status"] for r in records])
    scores = np.concatenate([r["pi"][model] for r in records])
    roc, auc = roc_auc(status, scores)
    return MetricsSummary(
        bias_pi=bias_pi_v, mse_pi=mse_pi_v, bias_su=bias_su_v, mse_su=mse_su_v,
        params=params, auc=auc, roc=roc, runs=len(records),
    )


def monte_carlo_study(spec, config, runs, jobs=1):
    """Run the generate -> fit -> score pipeline ``runs`` times.

    Both incidence models are fitted to every generated dataset.  Returns
    ``{"svm": MetricsSummary, "logistic": MetricsSummary}``.  Individual
    run failures are tolerated up to a 5% budget and excluded from the
    aggregation.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    children = np.random.SeedSequence(config.seed).spawn(runs)
    triples = [tuple(int(s) for s in c.generate_state(3)) for c in children]

    def safe_run(triple):
        try:
            return _study_run(spec, config, triple)
        except Exception as exc:
            return exc

    if jobs != 1:
        outcomes = Parallel(n_jobs=jobs)(delayed(safe_run)(t) for t in triples)
    else:
        outcomes = [safe_run(t) for t in triples]
    records = [o for o in outcomes if not isinstance(o, Exception)]
    failures = [o for o in outcomes if isinstance(o, Exception)]
    if len(failures) > 0.05 * runs:
        raise StudyUnstableError(
            f"{len(failures)} of {runs} Monte Carlo runs failed "
            f"(first: {failures[0]!r})"
        )
    return {
        "svm": _aggregate(records, spec, "svm"),
        "logistic": _aggregate(records, spec, "logistic"),
    }
