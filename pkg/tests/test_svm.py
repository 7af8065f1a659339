import numpy as np
import pytest

from curesvm import (
    HyperParams,
    SvmModel,
    decision_value,
    decision_values,
    impute_and_estimate_pi,
    platt_fit,
    platt_probability,
    rbf_gram,
    rbf_kernel,
    scenario_pi,
    smo_train,
    tune_hyperparams,
)
from curesvm.errors import (
    DegenerateFoldError,
    DegenerateLabelsError,
    NumericError,
    ShapeError,
)
from curesvm.svm import cross_val_decision_values, platt_targets

from oracles import dual_objective, platt_grid_search, projected_gradient_qp


class TestRbfKernel:
    def test_identical_points_give_one(self):
        assert rbf_kernel([1.0, 2.0], [1.0, 2.0], 3.0) == 1.0

    def test_unit_distance_unit_width(self):
        value = rbf_kernel([1.0, 0.0], [0.0, 0.0], 1.0)
        assert value == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_wide_kernel_limit(self):
        value = rbf_kernel([1.0, 2.0], [-1.0, 0.5], 1e8)
        assert abs(value - 1.0) < 1e-6

    def test_symmetry(self, rng):
        a, b = rng.normal(size=2), rng.normal(size=2)
        assert rbf_kernel(a, b, 0.7) == rbf_kernel(b, a, 0.7)

    def test_nonfinite_input_rejected(self):
        with pytest.raises(NumericError):
            rbf_kernel([np.inf, 0.0], [0.0, 0.0], 1.0)

    def test_gram_matrices_are_psd(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 31))
            z = rng.normal(size=(n, int(rng.integers(1, 4))))
            sigma2 = float(rng.uniform(0.2, 5.0))
            eigenvalues = np.linalg.eigvalsh(rbf_gram(z, sigma2))
            assert eigenvalues.min() >= -1e-8


def feasibility_ok(model):
    n = model.d.shape[0]
    inside_box = np.all(model.d >= 0) and np.all(model.d <= model.C)
    balanced = abs(model.labels @ model.d) <= 1e-8 * n * model.C
    return inside_box and balanced


class TestSmoTrain:
    def test_two_point_symmetric_instance(self):
        model = smo_train([-1.0, 1.0], [[-1.0], [1.0]], HyperParams(C=10.0, sigma2=1.0))
        assert model.d[0] == pytest.approx(model.d[1], rel=1e-6)
        assert model.b == pytest.approx(0.0, abs=1e-6)
        assert feasibility_ok(model)

    def test_two_point_decision_sign(self):
        model = smo_train([-1.0, 1.0], [[-1.0], [1.0]], HyperParams(C=10.0, sigma2=1.0))
        assert decision_value(model, np.array([1.0])) > 0
        assert decision_value(model, np.array([-1.0])) < 0

    def test_xor_layout_is_separated(self):
        z = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
        labels = np.array([1.0, -1.0, -1.0, 1.0])
        model = smo_train(labels, z, HyperParams(C=100.0, sigma2=1.0))
        psi = decision_values(model, z)
        assert np.all(np.sign(psi) == labels)

    def test_oracle_equivalence_on_small_instances(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 9))
            labels = np.ones(n)
            labels[: int(rng.integers(1, n))] = -1.0
            rng.shuffle(labels)
            z = rng.normal(size=(n, 2))
            hp = HyperParams(
                C=float(rng.choice([0.5, 1.0, 10.0])),
                sigma2=float(rng.choice([0.5, 1.0, 2.0])),
            )
            model = smo_train(labels, z, hp)
            K = rbf_gram(z, hp.sigma2)
            d_oracle = projected_gradient_qp(K, labels, hp.C)
            smo_value = dual_objective(K, labels, model.d)
            oracle_value = dual_objective(K, labels, d_oracle)
            assert abs(smo_value - oracle_value) < 1e-4
            assert model.kkt_residual <= 1e-3
            assert feasibility_ok(model)

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateLabelsError):
            smo_train([1.0, 1.0], [[0.0], [1.0]], HyperParams(C=1.0, sigma2=1.0))

    def test_deterministic(self, rng):
        z = rng.normal(size=(30, 2))
        labels = np.where(rng.random(30) < 0.5, -1.0, 1.0)
        labels[0], labels[1] = -1.0, 1.0
        hp = HyperParams(C=5.0, sigma2=0.8)
        a = smo_train(labels, z, hp)
        b = smo_train(labels, z, hp)
        np.testing.assert_array_equal(a.d, b.d)
        assert a.b == b.b


class TestDecisionValue:
    def test_empty_expansion_is_zero(self):
        model = SvmModel(
            d=np.zeros(3), labels=np.array([1.0, -1.0, 1.0]),
            support_z=np.zeros((3, 2)), b=0.0, sigma2=1.0, C=1.0,
        )
        assert decision_value(model, np.array([5.0, -2.0])) == 0.0

    def test_margin_vector_reproduces_label(self, rng):
        z = rng.normal(size=(40, 2))
        labels = np.where(z[:, 0] + 0.3 * rng.normal(size=40) > 0, 1.0, -1.0)
        labels[0], labels[1] = 1.0, -1.0
        model = smo_train(labels, z, HyperParams(C=2.0, sigma2=1.0))
        eps = 1e-8 * model.C
        margin = (model.d > eps) & (model.d < model.C - eps)
        assert margin.any()
        psi = decision_values(model, z)
        # at a free support vector the scaled decision value sits near +1
        assert np.all(labels[margin] * psi[margin] > -1e-3)

    def test_dimension_mismatch_rejected(self):
        model = smo_train([-1.0, 1.0], [[-1.0], [1.0]], HyperParams(C=1.0, sigma2=1.0))
        with pytest.raises(ShapeError):
            decision_value(model, np.array([1.0, 2.0]))


class TestPlatt:
    def test_target_values(self):
        labels = np.array([1, 1, 1, 0, 0, 0])
        zeta = platt_targets(labels)
        assert zeta[0] == pytest.approx(4.0 / 5.0)
        assert zeta[-1] == pytest.approx(1.0 / 5.0)

    def test_matches_grid_search_oracle(self, rng):
        for _ in range(3):
            psi = rng.normal(scale=2.0, size=40)
            labels = (psi + rng.normal(scale=1.5, size=40) > 0).astype(int)
            labels[0], labels[1] = 0, 1
            cal = platt_fit(-psi, labels)  # negative so A comes out positive too
            a_star, b_star = platt_grid_search(-psi, labels)
            assert cal.A == pytest.approx(a_star, abs=2e-3)
            assert cal.B == pytest.approx(b_star, abs=2e-3)

    def test_single_class_rejected(self):
        with pytest.raises(DegenerateLabelsError):
            platt_fit(np.array([0.1, 0.2]), np.array([1, 1]))

    def test_flat_calibration_probability(self):
        from curesvm import PlattCalibration

        assert platt_probability(PlattCalibration(0.0, 0.0), 123.4) == 0.5

    def test_logistic_limits(self):
        from curesvm import PlattCalibration

        cal = PlattCalibration(-1.0, 0.0)
        assert platt_probability(cal, 0.0) == 0.5
        assert platt_probability(cal, 1e6) == pytest.approx(1.0, abs=1e-6)
        values = platt_probability(cal, np.array([-3.0, 0.0, 3.0]))
        assert np.all(np.diff(values) > 0)  # increasing when A < 0

    def test_exponent_cancellation(self):
        from curesvm import PlattCalibration

        assert platt_probability(PlattCalibration(-2.0, 1.0), 0.5) == 0.5

    def test_output_strictly_inside_unit_interval(self):
        from curesvm import PlattCalibration

        cal = PlattCalibration(-5.0, 2.0)
        for psi in (-1e300, -1e6, 0.0, 1e6, 1e300):
            p = platt_probability(cal, psi)
            assert 0.0 < p < 1.0


class TestCrossValDecisionValues:
    def test_every_subject_scored_out_of_fold(self, rng):
        z = rng.normal(size=(50, 2))
        labels = (z[:, 0] > 0).astype(int)
        labels[:3] = [0, 1, 0]
        psi = cross_val_decision_values(labels, z, HyperParams(C=1.0, sigma2=1.0), rng=rng)
        assert psi.shape == (50,)
        assert np.all(np.isfinite(psi))
        # out-of-fold values should still separate the classes broadly
        assert psi[labels == 1].mean() > psi[labels == 0].mean()


class TestTuneHyperparams:
    def test_singleton_grid_returned(self, rng):
        z = rng.normal(size=(30, 2))
        labels = (z[:, 0] > 0).astype(int)
        only = HyperParams(C=2.0, sigma2=1.5)
        assert tune_hyperparams(labels, z, [only], folds=3, rng=rng) == only

    def test_tie_break_prefers_smaller_c_then_sigma2(self, rng):
        # linearly separated labels with a wide margin: every grid point
        # classifies perfectly, so the tie-break decides
        z = np.vstack([rng.normal(size=(20, 1)) - 10.0, rng.normal(size=(20, 1)) + 10.0])
        labels = np.array([0] * 20 + [1] * 20)
        grid = [
            HyperParams(C=1.0, sigma2=5.0),
            HyperParams(C=1.0, sigma2=0.5),
            HyperParams(C=10.0, sigma2=0.5),
        ]
        best = tune_hyperparams(labels, z, grid, folds=4, rng=rng)
        assert best == HyperParams(C=1.0, sigma2=0.5)

    def test_scenario2_cv_accuracy(self, rng):
        z = rng.normal(size=(200, 2))
        labels = (rng.random(200) < scenario_pi(2, z)).astype(int)
        best = tune_hyperparams(labels, z, folds=5, rng=rng)
        # re-estimate the CV accuracy of the chosen point
        from curesvm.svm import _stratified_folds

        fold_of = _stratified_folds(labels, 5, np.random.default_rng(0))
        correct = 0
        y = 2.0 * labels - 1.0
        for f in range(5):
            test = fold_of == f
            model = smo_train(y[~test], z[~test], best)
            psi = decision_values(model, z[test])
            correct += int(np.sum((psi >= 0) == (labels[test] == 1)))
        assert correct / 200 >= 0.85

    def test_degenerate_fold_rejected(self, rng):
        z = rng.normal(size=(10, 1))
        labels = np.array([1] + [0] * 9)  # one positive cannot fill 3 folds
        with pytest.raises(DegenerateFoldError):
            tune_hyperparams(labels, z, folds=3, rng=rng)


class TestImputeAndEstimatePi:
    def test_all_one_weights_use_fallback(self, rng):
        z = rng.normal(size=(20, 2))
        diagnostics = {}
        pi = impute_and_estimate_pi(
            np.ones(20), z, 2, HyperParams(C=1.0, sigma2=1.0), rng,
            diagnostics=diagnostics,
        )
        np.testing.assert_allclose(pi, 1.0 - 1e-6)
        assert diagnostics["single_class_fallbacks"] == 2

    def test_single_imputation_reproducible(self, rng):
        z = rng.normal(size=(40, 2))
        w = np.clip(0.5 + 0.4 * np.tanh(z[:, 0]), 0.0, 1.0)
        hp = HyperParams(C=1.0, sigma2=1.0)
        a = impute_and_estimate_pi(w, z, 1, hp, np.random.default_rng(7))
        b = impute_and_estimate_pi(w, z, 1, hp, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_recovers_scenario1_probabilities_from_true_status(self):
        gen = np.random.default_rng(42)
        z = gen.normal(size=(200, 2))
        true_pi = scenario_pi(1, z)
        w = (gen.random(200) < true_pi).astype(float)
        if w.sum() in (0, 200):  # keep both classes
            w[0] = 1.0 - w[0]
        pi = impute_and_estimate_pi(
            w, z, 5, HyperParams(C=10.0, sigma2=1.0), np.random.default_rng(1)
        )
        assert np.mean(np.abs(pi - true_pi)) < 0.15

    def test_values_strictly_inside_unit_interval(self, rng):
        z = rng.normal(size=(30, 2))
        w = rng.random(30)
        pi = impute_and_estimate_pi(w, z, 3, HyperParams(C=1.0, sigma2=1.0), rng)
        assert np.all(pi > 0) and np.all(pi < 1)
