"""Synthetic interval-censored mixture-cure data.

Three incidence links over two standard-normal covariates (shared by the
incidence and latency parts), a Weibull latency truth, uniform censoring
times, and inspection grids with uniform cell widths.  Generated datasets
carry the true cure status and true uncured probability for evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ValidationError
from .latency import LatencyParams

SCENARIO_IDS = (1, 2, 3)


def _default_truth():
    return LatencyParams(alpha=0.5, gamma=np.array([1.0, 0.5]))


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation scenario at a given sample size."""

    id: int
    n: int
    latency_truth: LatencyParams = field(default_factory=_default_truth)
    censor_upper: float = 20.0

    def __post_init__(self):
        if self.id not in SCENARIO_IDS:
            raise ValidationError(f"scenario id must be one of {SCENARIO_IDS}")
        if self.n < 1:
            raise ValidationError("n must be at least 1")
        if not self.censor_upper > 0:
            raise ValidationError("censor_upper must be positive")


def scenario_pi(scenario_id, z):
    """True uncured probability of a scenario at covariates ``z``.

    Scenario 1 is a plain logistic link (linear boundary); scenarios 2
    and 3 are quadratic-logistic and trigonometric-log-log links with
    non-linear boundaries.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != 2:
        raise ValidationError(f"z must have two columns, got {z.shape[1]}")
    z1, z2 = z[:, 0], z[:, 1]
    if scenario_id == 1:
        eta = 0.3 - 5.0 * z1 - 3.0 * z2
        out = 1.0 / (1.0 + np.exp(-np.clip(eta, -500, 500)))
    elif scenario_id == 2:
        eta = 0.3 + 10.0 * z1 ** 2 - 5.0 * z2 ** 2
        out = 1.0 / (1.0 + np.exp(-np.clip(eta, -500, 500)))
    elif scenario_id == 3:
        eta = 0.3 - 4.0 * np.cos(z1) - 5.0 * np.sin(z2)
        out = np.exp(-np.exp(np.clip(eta, -500, 500)))
    else:
        raise ValidationError(f"scenario id must be one of {SCENARIO_IDS}")
    # keep strictly inside (0, 1) where the float formula saturates
    out = np.clip(out, np.finfo(float).tiny, 1.0 - 1e-16)
    return float(out[0]) if single else out


def generate_dataset(spec, rng):
    """Draw one dataset under a scenario.

    Per subject: a uniform draw against 1 - pi(z) decides cure; cured
    subjects are censored at C ~ U(0, censor_upper).  Susceptible subjects
    get a Weibull event time T (inverse-CDF sampling); if T exceeds C they
    are censored at C, otherwise the observed interval is the cell of the
    inspection grid (0, L2], (L2, L2 + L1], ... that contains T, with
    L1 ~ U(0.2, 0.7) and L2 ~ U(0, 1).

    All per-subject draws are taken upfront in a fixed order, so the same
    seed always yields the same dataset.
    """
    n = spec.n
    truth = spec.latency_truth
    z = rng.normal(size=(n, 2))
    u = rng.random(n)
    censor = rng.uniform(0.0, spec.censor_upper, size=n)
    v = rng.random(n)
    width = rng.uniform(0.2, 0.7, size=n)
    offset = rng.uniform(0.0, 1.0, size=n)

    x = z.copy()
    pi = scenario_pi(spec.id, z)
    status = (u > 1.0 - pi).astype(np.int64)
    scale = np.exp(-(x @ truth.gamma) / truth.alpha)
    event_time = scale * (-np.log(v)) ** (1.0 / truth.alpha)

    left = np.empty(n)
    right = np.empty(n)
    delta = np.zeros(n, dtype=np.int64)
    observed = (status == 1) & (event_time <= censor)
    # censored rows (cured, or susceptible with T beyond C)
    left[~observed] = censor[~observed]
    right[~observed] = np.inf
    # events: locate the grid cell containing T
    t_obs = event_time[observed]
    off = offset[observed]
    wid = width[observed]
    in_first = t_obs <= off
    cell = np.where(in_first, 0, np.ceil((t_obs - off) / wid)).astype(np.int64)
    lo = np.where(in_first, 0.0, off + (cell - 1) * wid)
    hi = np.where(in_first, off, off + cell * wid)
    left[observed] = lo
    right[observed] = hi
    delta[observed] = 1

    return Dataset(
        left=left, right=right, delta=delta, x=x, z=z,
        x_names=("x1", "x2"), z_names=("z1", "z2"),
        true_status=status.astype(float), true_pi=pi,
    )
