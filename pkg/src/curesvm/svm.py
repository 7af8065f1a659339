"""RBF-kernel SVM incidence model.

The classifier is trained by sequential minimal optimization (SMO) on the
dual box-constrained QP, calibrated to uncured probabilities with a
two-parameter sigmoid (Platt scaling), and embedded in a multiple
imputation loop that turns fractional cure weights into probability
estimates.

Conventions:  labels are +1 for susceptible (uncured) and -1 for cured;
``psi > 0`` classifies as susceptible.  The calibration sigmoid is fitted
on k-fold cross-validated decision values so that the resulting
probabilities are not optimistically sharp, and is then applied to the
full-model decision values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._validation import check_binary_labels, check_matrix, check_pm_labels, check_weights
from .errors import (
    DegenerateFoldError,
    DegenerateLabelsError,
    IterationLimitError,
    NumericError,
    ShapeError,
)

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
DEFAULT_SIGMA2_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_TOL = 1e-3
CALIBRATION_FOLDS = 5
PROB_CLIP = 1e-6


@dataclass(frozen=True)
class HyperParams:
    """SVM hyperparameters: box constraint C and RBF width sigma2."""

    C: float
    sigma2: float

    def __post_init__(self):
        if not (np.isfinite(self.C) and self.C > 0):
            raise NumericError(f"C must be finite and positive, got {self.C}")
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise NumericError(f"sigma2 must be finite and positive, got {self.sigma2}")


def default_grid():
    """The default C x sigma2 search grid (on standardized covariates)."""
    return [HyperParams(C=c, sigma2=s) for c in DEFAULT_C_GRID for s in DEFAULT_SIGMA2_GRID]


@dataclass(frozen=True)
class SvmModel:
    """A trained soft-margin kernel SVM in dual form."""

    d: np.ndarray            # dual coefficients, 0 <= d_i <= C
    labels: np.ndarray       # +-1 training labels
    support_z: np.ndarray    # training covariate rows
    b: float                 # decision threshold
    sigma2: float
    C: float
    kkt_residual: float = field(default=np.nan, compare=False)
    n_iter: int = field(default=0, compare=False)
    dual_objective: float = field(default=np.nan, compare=False)


@dataclass(frozen=True)
class PlattCalibration:
    """Sigmoid calibration pi = 1 / (1 + exp(A*psi + B))."""

    A: float
    B: float


def rbf_kernel(z_i, z_j, sigma2):
    """exp(-||z_i - z_j||^2 / sigma2); 1 at zero distance."""
    z_i = np.asarray(z_i, dtype=float)
    z_j = np.asarray(z_j, dtype=float)
    if z_i.shape != z_j.shape:
        raise ShapeError(f"shape mismatch {z_i.shape} vs {z_j.shape}")
    if not (np.all(np.isfinite(z_i)) and np.all(np.isfinite(z_j)) and np.isfinite(sigma2)):
        raise NumericError("rbf_kernel requires finite inputs")
    if sigma2 <= 0:
        raise NumericError("sigma2 must be positive")
    diff = z_i - z_j
    return float(np.exp(-(diff @ diff) / sigma2))


def rbf_gram(z, sigma2, z2=None):
    """Gram matrix of the RBF kernel between row sets ``z`` and ``z2``."""
    z = check_matrix(z, "z")
    other = z if z2 is None else check_matrix(z2, "z2", n_cols=z.shape[1])
    sq1 = np.einsum("ij,ij->i", z, z)
    sq2 = sq1 if z2 is None else np.einsum("ij,ij->i", other, other)
    d2 = np.maximum(sq1[:, None] + sq2[None, :] - 2.0 * z @ other.T, 0.0)
    return np.exp(-d2 / sigma2)


@njit(cache=True)
def _smo_solve(K, y, C, tol, max_iter):  # pragma: no cover - exercised via smo_train
    """Maximal-violating-pair SMO on the dual QP.

    Minimizes 0.5 d'Qd - 1'd with Q_ij = y_i y_j K_ij subject to
    0 <= d <= C and y'd = 0.  Returns (d, iterations, kkt_residual).
    """
    n = K.shape[0]
    d = np.zeros(n)
    grad = -np.ones(n)
    it = 0
    resid = np.inf
    while it < max_iter:
        m_val = -np.inf
        M_val = np.inf
        i = -1
        j = -1
        for t in range(n):
            yg = -y[t] * grad[t]
            if (y[t] > 0.0 and d[t] < C) or (y[t] < 0.0 and d[t] > 0.0):
                if yg > m_val:
                    m_val = yg
                    i = t
            if (y[t] < 0.0 and d[t] < C) or (y[t] > 0.0 and d[t] > 0.0):
                if yg < M_val:
                    M_val = yg
                    j = t
        resid = m_val - M_val
        if resid < tol:
            break
        di_old = d[i]
        dj_old = d[j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] + 2.0 * K[i, j]
            if quad <= 0.0:
                quad = 1e-12
            delta = (-grad[i] - grad[j]) / quad
            diff = d[i] - d[j]
            d[i] += delta
            d[j] += delta
            if diff > 0.0:
                if d[j] < 0.0:
                    d[j] = 0.0
                    d[i] = diff
                if d[i] > C:
                    d[i] = C
                    d[j] = C - diff
            else:
                if d[i] < 0.0:
                    d[i] = 0.0
                    d[j] = -diff
                if d[j] > C:
                    d[j] = C
                    d[i] = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0.0:
                quad = 1e-12
            delta = (grad[i] - grad[j]) / quad
            tot = d[i] + d[j]
            d[i] -= delta
            d[j] += delta
            if tot > C:
                if d[i] > C:
                    d[i] = C
                    d[j] = tot - C
                if d[j] > C:
                    d[j] = C
                    d[i] = tot - C
            else:
                if d[j] < 0.0:
                    d[j] = 0.0
                    d[i] = tot
                if d[i] < 0.0:
                    d[i] = 0.0
                    d[j] = tot
        ddi = d[i] - di_old
        ddj = d[j] - dj_old
        yi = y[i]
        yj = y[j]
        for t in range(n):
            grad[t] += y[t] * (yi * K[t, i] * ddi + yj * K[t, j] * ddj)
        it += 1
    return d, it, resid


def _threshold(d, y, g, C):
    """Decision threshold b, averaged over margin support vectors.

    ``g`` holds the pre-threshold decision values at the training points.
    When no dual coefficient is strictly inside (0, C), fall back to the
    midpoint of the interval allowed by the optimality conditions.
    """
    eps = 1e-8 * C
    margin = (d > eps) & (d < C - eps)
    if margin.any():
        return float(np.mean(g[margin] - y[margin]))
    lower = []
    upper = []
    for t in range(len(y)):
        if (y[t] > 0 and d[t] <= eps) or (y[t] < 0 and d[t] >= C - eps):
            upper.append(g[t] - y[t])
        else:
            lower.append(g[t] - y[t])
    if not lower or not upper:
        return float(np.mean(g - y))
    return float((max(lower) + min(upper)) / 2.0)


def smo_train(labels, z, hp, tol=DEFAULT_TOL, gram=None, max_iter=None):
    """Train the dual SVM with SMO.

    ``labels`` are +-1.  ``gram`` may carry a precomputed RBF Gram matrix
    for ``z`` at ``hp.sigma2`` (the EM loop reuses one across imputations).
    Raises :class:`IterationLimitError` if the KKT residual has not
    reached ``tol`` after ``max_iter`` pair updates (default ``1e5 * n``).
    """
    y = check_pm_labels(labels)
    z = check_matrix(z, "z", n_rows=y.shape[0])
    n = y.shape[0]
    if n < 2:
        raise DegenerateLabelsError("need at least two training points")
    if tol <= 0:
        raise NumericError("tol must be positive")
    K = rbf_gram(z, hp.sigma2) if gram is None else gram
    cap = int(1e5 * n) if max_iter is None else int(max_iter)
    d, n_iter, resid = _smo_solve(K, y, float(hp.C), float(tol), cap)
    if resid >= tol:
        raise IterationLimitError(
            f"SMO stopped after {n_iter} iterations with KKT residual {resid:.3e}",
            residual=float(resid),
        )
    g = (d * y) @ K
    b = _threshold(d, y, g, hp.C)
    # d'Qd = d'(y * g), hence the dual objective sum(d) - 0.5 d'Qd:
    objective = float(d.sum() - 0.5 * d @ (y * g))
    return SvmModel(
        d=d, labels=y, support_z=np.array(z, dtype=float, copy=True), b=b,
        sigma2=float(hp.sigma2), C=float(hp.C),
        kkt_residual=float(resid), n_iter=int(n_iter), dual_objective=objective,
    )


def decision_values(model, z_new, gram=None):
    """Vectorized decision rule psi(z) = sum_i d_i y_i k(z_i, z) - b."""
    z_new = check_matrix(z_new, "z_new", n_cols=model.support_z.shape[1])
    K = rbf_gram(model.support_z, model.sigma2, z_new) if gram is None else gram
    return (model.d * model.labels) @ K - model.b


def decision_value(model, z_new):
    """psi at a single covariate vector; susceptible when positive."""
    z_new = np.asarray(z_new, dtype=float)
    if z_new.ndim != 1 or z_new.shape[0] != model.support_z.shape[1]:
        raise ShapeError(
            f"z_new must have length {model.support_z.shape[1]}, got shape {z_new.shape}"
        )
    return float(decision_values(model, z_new.reshape(1, -1))[0])


def platt_targets(labels):
    """Shrunken regression targets: (n1+1)/(n1+2) for 1s, 1/(n0+2) for 0s."""
    labels = check_binary_labels(labels)
    n1 = int(labels.sum())
    n0 = labels.shape[0] - n1
    hi = (n1 + 1.0) / (n1 + 2.0)
    lo = 1.0 / (n0 + 2.0)
    return np.where(labels == 1, hi, lo)


def platt_fit(psi, labels):
    """Fit the calibration sigmoid by damped Newton iterations.

    Maximizes sum_i (1 - zeta_i)(A psi_i + B) - log(1 + exp(A psi_i + B)),
    which is the Bernoulli likelihood of the shrunken targets zeta under
    pi = 1/(1 + exp(A psi + B)).  The objective is concave; Newton with a
    small ridge and backtracking reaches gradient norm < 1e-8.
    """
    psi = np.asarray(psi, dtype=float)
    if not np.all(np.isfinite(psi)):
        raise NumericError("psi contains non-finite values")
    labels = check_binary_labels(labels)
    if psi.shape != labels.shape:
        raise ShapeError("psi and labels must have equal length")
    zeta = platt_targets(labels)
    one_minus_zeta = 1.0 - zeta

    def objective(a, b):
        u = a * psi + b
        return float(one_minus_zeta @ u - np.logaddexp(0.0, u).sum())

    n1 = int(labels.sum())
    n0 = labels.shape[0] - n1
    A = 0.0
    B = float(np.log((n0 + 1.0) / (n1 + 1.0)))
    best = objective(A, B)
    for _ in range(200):
        u = np.clip(A * psi + B, -500.0, 500.0)
        s = 1.0 / (1.0 + np.exp(-u))
        resid = one_minus_zeta - s
        g_a = float(psi @ resid)
        g_b = float(resid.sum())
        if np.hypot(g_a, g_b) < 1e-8:
            break
        var = s * (1.0 - s) + 1e-12
        h_aa = float(psi @ (psi * var))
        h_ab = float(psi @ var)
        h_bb = float(var.sum())
        ridge = 1e-10 * (h_aa + h_bb) + 1e-300
        det = (h_aa + ridge) * (h_bb + ridge) - h_ab * h_ab
        step_a = ((h_bb + ridge) * g_a - h_ab * g_b) / det
        step_b = ((h_aa + ridge) * g_b - h_ab * g_a) / det
        scale = 1.0
        for _bt in range(50):
            cand = objective(A + scale * step_a, B + scale * step_b)
            if cand > best:
                A += scale * step_a
                B += scale * step_b
                best = cand
                break
            scale *= 0.5
        else:
            break
    return PlattCalibration(A=float(A), B=float(B))


def platt_probability(calibration, psi):
    """Calibrated uncured probability 1 / (1 + exp(A*psi + B)).

    Strictly inside (0, 1) even for clamped exponents.
    """
    u = np.clip(calibration.A * np.asarray(psi, dtype=float) + calibration.B, -500.0, 500.0)
    out = 1.0 / (1.0 + np.exp(u))
    out = np.clip(out, np.finfo(float).tiny, 1.0 - 1e-16)
    if out.ndim == 0:
        return float(out)
    return out


def _stratified_folds(labels, folds, rng):
    """Fold assignment with each class spread round-robin across folds."""
    n = labels.shape[0]
    fold_of = np.empty(n, dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        fold_of[idx] = np.arange(idx.size) % folds
    return fold_of


def cross_val_decision_values(labels, z, hp, folds=CALIBRATION_FOLDS, rng=None, gram=None):
    """Out-of-fold decision values used to fit the calibration sigmoid.

    Each subject's psi comes from a model trained without that subject's
    fold.  A fold whose training part degenerates to one class (possible
    only for classes smaller than the fold count) falls back to the
    full-data model for its held-out points.
    """
    labels = check_binary_labels(labels)
    z = check_matrix(z, "z", n_rows=labels.shape[0])
    rng = np.random.default_rng(0) if rng is None else rng
    y = 2.0 * labels - 1.0
    K = rbf_gram(z, hp.sigma2) if gram is None else gram
    fold_of = _stratified_folds(labels, folds, rng)
    psi = np.empty(labels.shape[0])
    full_model = None
    for f in range(folds):
        test = fold_of == f
        if not test.any():
            continue
        train = ~test
        y_train = y[train]
        if np.unique(y_train).size < 2:
            if full_model is None:
                full_model = smo_train(y, z, hp, gram=K)
            psi[test] = (full_model.d * full_model.labels) @ K[:, test] - full_model.b
            continue
        sub = smo_train(y_train, z[train], hp, gram=K[np.ix_(train, train)])
        psi[test] = (sub.d * y_train) @ K[np.ix_(train, test)] - sub.b
    return psi


def tune_hyperparams(labels, z, grid=None, folds=5, rng=None):
    """Pick the grid point with the best stratified k-fold accuracy.

    Ties are broken toward smaller C, then smaller sigma2 (the smoother
    boundary).  Every training fold must contain both classes.
    """
    labels = check_binary_labels(labels)
    z = check_matrix(z, "z", n_rows=labels.shape[0])
    grid = default_grid() if grid is None else list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if folds < 2:
        raise ValueError("folds must be at least 2")
    rng = np.random.default_rng(0) if rng is None else rng
    y = 2.0 * labels - 1.0
    fold_of = _stratified_folds(labels, folds, rng)
    for f in range(folds):
        train = fold_of != f
        if np.unique(labels[train]).size < 2:
            raise DegenerateFoldError(
                f"fold {f}: training part has a single class; "
                "need at least `folds` members per class"
            )
    grams = {}
    for hp in grid:
        if hp.sigma2 not in grams:
            grams[hp.sigma2] = rbf_gram(z, hp.sigma2)
    results = []
    for hp in grid:
        K = grams[hp.sigma2]
        correct = 0
        for f in range(folds):
            test = fold_of == f
            if not test.any():
                continue
            train = ~test
            y_train = y[train]
            sub = smo_train(y_train, z[train], hp, gram=K[np.ix_(train, train)])
            psi = (sub.d * y_train) @ K[np.ix_(train, test)] - sub.b
            # psi == 0 classifies as susceptible
            correct += int(np.sum((psi >= 0) == (y[test] > 0)))
        accuracy = correct / labels.shape[0]
        results.append((accuracy, hp))
    best_acc = max(acc for acc, _ in results)
    tied = [hp for acc, hp in results if acc == best_acc]
    tied.sort(key=lambda hp: (hp.C, hp.sigma2))
    return tied[0]


def impute_and_estimate_pi(
    w,
    z,
    n_impute,
    hp,
    rng,
    gram=None,
    calibration_folds=CALIBRATION_FOLDS,
    diagnostics=None,
):
    """Multiple-imputation estimate of the uncured probabilities.

    For each imputation, cure indicators are drawn as Bernoulli(w), an SVM
    is trained on them, calibrated on out-of-fold decision values, and the
    calibrated probabilities at all subjects are averaged over the
    imputations.  A draw that comes out single-class is redrawn up to ten
    times, then replaced by the constant mean(w) (clipped away from 0/1);
    such fallbacks are counted in ``diagnostics['single_class_fallbacks']``.
    """
    w = check_weights(w)
    z = check_matrix(z, "z", n_rows=w.shape[0])
    if n_impute < 1:
        raise ValueError("n_impute must be at least 1")
    n = w.shape[0]
    K = rbf_gram(z, hp.sigma2) if gram is None else gram
    total = np.zeros(n)
    for _ in range(n_impute):
        labels = None
        for _attempt in range(10):
            draw = (rng.random(n) < w).astype(np.int64)
            if 0 < draw.sum() < n:
                labels = draw
                break
        if labels is None:
            if diagnostics is not None:
                diagnostics["single_class_fallbacks"] = (
                    diagnostics.get("single_class_fallbacks", 0) + 1
                )
            total += np.clip(np.full(n, w.mean()), PROB_CLIP, 1.0 - PROB_CLIP)
            continue
        y = 2.0 * labels - 1.0
        model = smo_train(y, z, hp, gram=K)
        psi_full = (model.d * y) @ K - model.b
        psi_cv = cross_val_decision_values(
            labels, z, hp, folds=calibration_folds, rng=rng, gram=K
        )
        calibration = platt_fit(psi_cv, labels)
        total += platt_probability(calibration, psi_full)
    return total / n_impute
