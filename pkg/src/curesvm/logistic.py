"""Logistic incidence model: the classical mixture-cure comparator.

The uncured probability is pi(z) = expit(beta0 + z'beta), fitted in the
M-step by maximizing the weighted Bernoulli log-likelihood with the
fractional cure weights as responses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_matrix, check_weights
from .errors import NumericError, ShapeError, ValidationError

COEF_NORM_CAP = 30.0


@dataclass(frozen=True)
class LogisticParams:
    """Coefficients (intercept first); ``capped`` marks separation guards."""

    beta: np.ndarray
    capped: bool = False

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if not np.all(np.isfinite(beta)):
            raise NumericError("beta must be finite")
        object.__setattr__(self, "beta", beta)


def logistic_pi(params, z):
    """pi(z) = exp(eta) / (1 + exp(eta)) with eta = beta0 + z'beta.

    Accepts one covariate vector or a matrix of rows; overflow-guarded and
    strictly inside (0, 1).
    """
    z_arr = np.asarray(z, dtype=float)
    single = z_arr.ndim == 1
    z_arr = np.atleast_2d(z_arr)
    if z_arr.shape[1] != params.beta.shape[0] - 1:
        raise ShapeError(
            f"z has {z_arr.shape[1]} columns, expected {params.beta.shape[0] - 1}"
        )
    eta = np.clip(params.beta[0] + z_arr @ params.beta[1:], -500.0, 500.0)
    out = 1.0 / (1.0 + np.exp(-eta))
    tiny = np.finfo(float).tiny
    out = np.clip(out, tiny, 1.0 - 1e-16)
    return float(out[0]) if single else out


def weighted_loglik(beta, z_design, w):
    eta = np.clip(z_design @ beta, -500.0, 500.0)
    return float(w @ eta - np.logaddexp(0.0, eta).sum())


def fit_weighted_logistic(z, w):
    """Maximize sum_i [w_i log pi_i + (1 - w_i) log(1 - pi_i)] over beta.

    Newton iterations with a small ridge on the Hessian; a coefficient
    norm above 30 is treated as separation, the iterate is rescaled to the
    cap and flagged.  Equal weights have the closed-form intercept-only
    solution logit(mean weight).
    """
    w = check_weights(w)
    z = check_matrix(z, "z", n_rows=w.shape[0])
    n, q = z.shape
    if n < q + 1:
        raise ValidationError(f"need at least {q + 1} observations, got {n}")
    w_bar = float(w.mean())
    if np.all(w == w[0]):
        if w_bar <= 0.0 or w_bar >= 1.0:
            raise ValidationError(
                "weights are all 0 or all 1; incidence coefficients are not identifiable"
            )
        beta = np.zeros(q + 1)
        beta[0] = float(np.log(w_bar / (1.0 - w_bar)))
        return LogisticParams(beta=beta)

    design = np.hstack([np.ones((n, 1)), z])
    beta = np.zeros(q + 1)
    value = weighted_loglik(beta, design, w)
    capped = False
    for _ in range(200):
        eta = np.clip(design @ beta, -500.0, 500.0)
        p = 1.0 / (1.0 + np.exp(-eta))
        score = design.T @ (w - p)
        if np.linalg.norm(score) < 1e-8:
            break
        var = p * (1.0 - p)
        hess = (design * var[:, None]).T @ design
        hess[np.diag_indices_from(hess)] += 1e-8
        step = np.linalg.solve(hess, score)
        scale = 1.0
        for _bt in range(50):
            cand = beta + scale * step
            cand_value = weighted_loglik(cand, design, w)
            if cand_value > value - 1e-14:
                beta = cand
                value = cand_value
                break
            scale *= 0.5
        norm = float(np.linalg.norm(beta))
        if norm > COEF_NORM_CAP:
            beta = beta * (COEF_NORM_CAP / norm)
            capped = True
            break
    return LogisticParams(beta=beta, capped=capped)
