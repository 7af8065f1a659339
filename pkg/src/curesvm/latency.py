"""Weibull proportional-hazards latency model.

The susceptible survival function is S_u(t | x) = exp{-t^alpha e^{x'g}},
i.e. a Weibull with shape ``alpha`` and scale exp(-x'g / alpha).  The
weighted interval-censored objective

    Q2 = sum_i [ delta_i log{S_u(L_i) - S_u(R_i)}
                 + (1 - delta_i) w_i log S_u(L_i) ]

is maximized over (log alpha, gamma); the log reparameterization keeps the
shape positive without constraints.  All terms are evaluated in log space
so that extreme iterates visited during line searches yield very negative
but finite values instead of NaNs; interval masses below 1e-300 are
floored, which leaves the objective finite but makes the gradient there
unreliable (flagged, and handled by a derivative-free fallback).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._validation import as_float_array, check_weights
from .errors import GradientUnreliableError, NumericError, ShapeError

LOG_FLOOR = np.log(1e-300)
_EXP_CAP = 300.0     # caps cumulative hazards at e^300 ~ 2e130
_LOG_ALPHA_CAP = 60.0


@dataclass(frozen=True)
class LatencyParams:
    """Weibull shape ``alpha`` (> 0) and PH coefficients ``gamma``."""

    alpha: float
    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise NumericError(f"alpha must be finite and positive, got {self.alpha}")
        if not np.all(np.isfinite(gamma)):
            raise NumericError("gamma must be finite")
        object.__setattr__(self, "gamma", gamma)

    def to_vector(self):
        """Internal optimizer coordinates (log alpha, gamma)."""
        return np.concatenate([[np.log(self.alpha)], self.gamma])

    @classmethod
    def from_vector(cls, vec):
        return cls(alpha=float(np.exp(vec[0])), gamma=np.asarray(vec[1:], dtype=float))


@dataclass(frozen=True)
class Q2Result:
    """Outcome of :func:`maximize_q2`."""

    params: LatencyParams
    objective: float
    converged: bool
    iterations: int
    used_fallback: bool = False


def _cumulative_hazard(t, lin, alpha):
    """t^alpha * e^{x'g}, computed in log space and capped to stay finite.

    ``t`` may contain zeros (hazard 0) but must be non-negative and finite.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros(np.broadcast(t, lin).shape)
    pos = t > 0
    if np.any(pos):
        log_u = alpha * np.log(t[pos]) + (lin[pos] if np.ndim(lin) else lin)
        out[pos] = np.exp(np.minimum(log_u, _EXP_CAP))
    return out


def survival_u(t, x, params):
    """Susceptible survival S_u(t | x) = exp{-t^alpha e^{x'gamma}}.

    Accepts a scalar ``t`` with a single covariate vector ``x``, or
    vectors/matrices for batch evaluation.
    """
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if np.any(t_arr < 0):
        raise NumericError("survival_u requires t >= 0")
    if not np.all(np.isfinite(t_arr)):
        raise NumericError("survival_u requires finite t")
    x_arr = np.asarray(x, dtype=float)
    if x_arr.ndim == 1:
        x_arr = np.broadcast_to(x_arr, (t_arr.shape[0], x_arr.shape[0]))
    if x_arr.shape != (t_arr.shape[0], params.gamma.shape[0]):
        raise ShapeError(
            f"x has shape {np.asarray(x).shape}; expected covariate length "
            f"{params.gamma.shape[0]}"
        )
    lin = x_arr @ params.gamma
    out = np.exp(-_cumulative_hazard(t_arr, lin, params.alpha))
    return float(out[0]) if scalar else out


def _q2_terms(vec, dataset, w):
    """Per-term pieces of Q2 and its gradient in (log alpha, gamma).

    Returns (objective, gradient, floored) where ``floored`` is True when
    any event interval mass fell below the 1e-300 floor (the gradient is
    then meaningless for those terms and is reported as zero there).
    """
    log_alpha = min(float(vec[0]), _LOG_ALPHA_CAP)
    alpha = np.exp(log_alpha)
    gamma = np.asarray(vec[1:], dtype=float)
    L, R, delta, X = dataset.left, dataset.right, dataset.delta, dataset.x
    lin = X @ gamma
    u_left = _cumulative_hazard(L, lin, alpha)
    # d u / d(log alpha) = u * alpha * log t ; zero when t == 0
    log_L = np.where(L > 0, np.log(np.where(L > 0, L, 1.0)), 0.0)
    du_left = u_left * alpha * log_L

    grad = np.zeros(1 + gamma.shape[0])
    objective = 0.0
    floored = False

    cens = delta == 0
    if np.any(cens):
        wc = w[cens]
        objective -= float(wc @ u_left[cens])
        grad[0] -= float(wc @ du_left[cens])
        grad[1:] -= (wc * u_left[cens]) @ X[cens]

    ev = delta == 1
    if np.any(ev):
        Le, Re = L[ev], R[ev]
        u_l = u_left[ev]
        u_r = _cumulative_hazard(Re, lin[ev], alpha)
        gap = np.maximum(u_r - u_l, 0.0)
        with np.errstate(divide="ignore"):
            # log{S(L) - S(R)} = -u_l + log(1 - exp(-gap))
            one_minus = -np.expm1(-gap)
            raw = -u_l + np.log(one_minus)
        term_floored = ~(raw > LOG_FLOOR)
        floored = bool(term_floored.any())
        objective += float(np.where(term_floored, LOG_FLOOR, raw).sum())

        log_R = np.where(Re > 0, np.log(np.where(Re > 0, Re, 1.0)), 0.0)
        du_r = u_r * alpha * log_R
        du_l = du_left[ev]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = np.exp(-gap) / one_minus
        ok = ~term_floored
        coef = np.zeros_like(u_l)
        coef[ok] = -u_l[ok] + ratio[ok] * (u_r[ok] - u_l[ok])
        galpha = np.zeros_like(u_l)
        galpha[ok] = -du_l[ok] + ratio[ok] * (du_r[ok] - du_l[ok])
        grad[0] += float(galpha.sum())
        grad[1:] += coef @ X[ev]
    return objective, grad, floored


def q2_objective(params, dataset, w):
    """The weighted latency log-likelihood Q2 (floored, always finite)."""
    w = check_weights(w, n=dataset.n)
    value, _, _ = _q2_terms(params.to_vector(), dataset, w)
    return value


def q2_gradient(params, dataset, w):
    """Analytic gradient of Q2 in (log alpha, gamma) coordinates.

    Raises :class:`GradientUnreliableError` when any event interval mass
    is at the 1e-300 floor, where the floored objective is flat and the
    analytic expression meaningless.
    """
    w = check_weights(w, n=dataset.n)
    _, grad, floored = _q2_terms(params.to_vector(), dataset, w)
    if floored:
        raise GradientUnreliableError(
            "an interval mass underflowed the 1e-300 floor; "
            "gradient is unreliable at these parameters"
        )
    return grad


def maximize_q2(dataset, w, init, gtol=1e-6, max_iter=500):
    """Maximize Q2 from ``init`` by BFGS with a simplex fallback.

    The quasi-Newton path uses the analytic gradient; if any evaluation
    trips the underflow floor the whole attempt falls back to Nelder-Mead
    on the floored objective.  The returned objective never falls below
    the value at ``init``.
    """
    w = check_weights(w, n=dataset.n)
    x0 = init.to_vector()
    f0, _, _ = _q2_terms(x0, dataset, w)

    def negative(vec):
        value, _, _ = _q2_terms(vec, dataset, w)
        return -value

    def negative_grad(vec):
        _, grad, floored = _q2_terms(vec, dataset, w)
        if floored:
            raise GradientUnreliableError("floored during line search")
        return -grad

    used_fallback = False
    try:
        res = optimize.minimize(
            negative, x0, jac=negative_grad, method="BFGS",
            options={"gtol": gtol, "maxiter": max_iter},
        )
        best_x = res.x
        iterations = int(res.nit)
        converged = bool(res.success) or float(np.linalg.norm(res.jac)) < gtol
    except GradientUnreliableError:
        used_fallback = True
        res = optimize.minimize(
            negative, x0, method="Nelder-Mead",
            options={"maxiter": max_iter * (x0.size + 1), "xatol": 1e-8, "fatol": 1e-10},
        )
        best_x = res.x
        iterations = int(res.nit)
        try:
            converged = float(np.linalg.norm(negative_grad(best_x))) < gtol
        except GradientUnreliableError:
            converged = False

    best_f, _, _ = _q2_terms(best_x, dataset, w)
    if best_f < f0:
        best_x, best_f = x0, f0
        converged = False
    return Q2Result(
        params=LatencyParams.from_vector(best_x),
        objective=float(best_f),
        converged=converged,
        iterations=iterations,
        used_fallback=used_fallback,
    )
