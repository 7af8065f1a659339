import numpy as np
import pytest

from curesvm import EMConfig, HyperParams, ScenarioSpec, generate_dataset, standardize_covariates


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


def make_scenario_dataset(scenario_id=1, n=120, seed=0, standardize=False):
    spec = ScenarioSpec(id=scenario_id, n=n)
    dataset = generate_dataset(spec, np.random.default_rng(seed))
    if standardize:
        dataset = standardize_covariates(dataset)
    return dataset


@pytest.fixture
def scenario1_dataset():
    return make_scenario_dataset(scenario_id=1, n=120, seed=3)


@pytest.fixture
def small_hp():
    return HyperParams(C=1.0, sigma2=1.0)


def tiny_em_config(**overrides):
    """Config with a small grid, for fast EM tests."""
    base = dict(
        incidence="logistic",
        epsilon=1e-3,
        max_iter=30,
        n_impute=3,
        hyper_grid=(HyperParams(C=1.0, sigma2=1.0), HyperParams(C=10.0, sigma2=1.0)),
        folds=3,
        bootstrap_b=10,
        seed=11,
    )
    base.update(overrides)
    return EMConfig(**base)
