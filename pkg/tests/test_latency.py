import numpy as np
import pytest

from curesvm import Dataset, LatencyParams, maximize_q2, q2_gradient, q2_objective, survival_u
from curesvm.errors import GradientUnreliableError, NumericError

from oracles import central_difference, q2_reference


def interval_dataset(left, right, delta, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] != len(left):
        x = x.T
    names = tuple(f"x{j+1}" for j in range(x.shape[1]))
    return Dataset(
        left=left, right=right, delta=delta, x=x,
        z=np.zeros((len(left), 1)), x_names=names, z_names=("z1",),
    )


def random_instance(rng, n=20, p=2):
    left = rng.uniform(0.1, 2.0, size=n)
    width = rng.uniform(0.2, 1.5, size=n)
    delta = (rng.random(n) < 0.6).astype(int)
    right = np.where(delta == 1, left + width, np.inf)
    x = rng.normal(size=(n, p))
    w = np.where(delta == 1, 1.0, rng.random(n))
    d = interval_dataset(left, right, delta, x)
    params = LatencyParams(
        alpha=float(rng.uniform(0.3, 1.5)), gamma=rng.normal(scale=0.5, size=p)
    )
    return d, w, params


class TestSurvival:
    def test_survival_at_origin_is_one(self):
        p = LatencyParams(alpha=0.7, gamma=np.array([0.4]))
        assert survival_u(0.0, np.array([1.0]), p) == 1.0

    def test_unit_exponential(self):
        p = LatencyParams(alpha=1.0, gamma=np.array([0.0]))
        assert survival_u(1.0, np.array([3.0]), p) == pytest.approx(np.exp(-1), rel=1e-12)

    def test_square_root_shape(self):
        p = LatencyParams(alpha=0.5, gamma=np.array([1.0, 0.5]))
        value = survival_u(4.0, np.array([0.0, 0.0]), p)
        assert value == pytest.approx(np.exp(-2.0), rel=1e-12)

    def test_negative_time_rejected(self):
        p = LatencyParams(alpha=1.0, gamma=np.array([0.0]))
        with pytest.raises(NumericError):
            survival_u(-0.5, np.array([0.0]), p)

    def test_bounds_and_monotonicity(self, rng):
        p = LatencyParams(alpha=0.8, gamma=rng.normal(size=3))
        x = rng.normal(size=3)
        ts = np.sort(rng.uniform(0.0, 5.0, size=25))
        values = survival_u(ts, x, p)
        assert np.all(values > 0) and np.all(values <= 1)
        assert np.all(np.diff(values) <= 0)

    def test_depends_on_x_only_through_linear_predictor(self, rng):
        gamma = np.array([1.0, -2.0, 0.5])
        p = LatencyParams(alpha=0.9, gamma=gamma)
        x1 = rng.normal(size=3)
        # different covariates, same inner product
        x2 = x1 + np.array([2.0, 1.0, 0.0])  # gamma . delta = 1*2 - 2*1 = 0
        assert np.dot(gamma, x1) == pytest.approx(np.dot(gamma, x2))
        s1 = survival_u(1.7, x1, p)
        s2 = survival_u(1.7, x2, p)
        assert s1 == pytest.approx(s2, abs=1e-12)

    def test_interval_mass_positive(self, rng):
        d, w, params = random_instance(rng, n=40)
        s_left = survival_u(d.left, d.x, params)
        finite = np.isfinite(d.right)
        s_right = survival_u(d.right[finite], d.x[finite], params)
        assert np.all(s_left[finite] > s_right)


class TestQ2Objective:
    def test_zero_weight_censored_subject_contributes_nothing(self):
        d = interval_dataset([1.0], [np.inf], [0], [[2.0]])
        for alpha in (0.3, 1.0, 2.5):
            value = q2_objective(LatencyParams(alpha=alpha, gamma=np.array([0.7])), d, np.array([0.0]))
            assert value == 0.0

    def test_single_event_closed_form(self):
        d = interval_dataset([1.0], [2.0], [1], [[0.0]])
        value = q2_objective(LatencyParams(alpha=1.0, gamma=np.array([0.0])), d, np.array([1.0]))
        assert value == pytest.approx(np.log(np.exp(-1) - np.exp(-2)), rel=1e-12)
        assert value == pytest.approx(-1.45867514539708, rel=1e-10)

    def test_matches_direct_summation(self, rng):
        for _ in range(10):
            d, w, params = random_instance(rng)
            mine = q2_objective(params, d, w)
            ref = q2_reference(params.alpha, params.gamma, d.left, d.right, d.delta, d.x, w)
            assert mine == pytest.approx(ref, abs=1e-10)


class TestQ2Gradient:
    def test_zero_for_all_censored_zero_weights(self):
        d = interval_dataset([1.0, 2.0], [np.inf, np.inf], [0, 0], [[1.0], [2.0]])
        grad = q2_gradient(LatencyParams(alpha=0.7, gamma=np.array([0.3])), d, np.zeros(2))
        np.testing.assert_array_equal(grad, np.zeros(2))

    def test_finite_difference_agreement(self, rng):
        for _ in range(100):
            d, w, params = random_instance(rng, n=int(rng.integers(5, 25)))
            grad = q2_gradient(params, d, w)
            vec = params.to_vector()

            def objective(v):
                return q2_objective(LatencyParams.from_vector(v), d, w)

            approx = central_difference(objective, vec)
            scale = np.maximum(np.abs(grad), 1.0)
            assert np.all(np.abs(grad - approx) / scale < 1e-5)

    def test_mirrored_covariates_give_opposite_gradient(self):
        # two identical intervals with mirrored single covariate: at
        # gamma = 0 the per-subject gamma-scores cancel exactly
        d = interval_dataset([1.0, 1.0], [2.0, 2.0], [1, 1], [[1.0], [-1.0]])
        params = LatencyParams(alpha=1.0, gamma=np.array([0.0]))
        grad = q2_gradient(params, d, np.ones(2))
        assert grad[1] == pytest.approx(0.0, abs=1e-12)

        half = interval_dataset([1.0], [2.0], [1], [[1.0]])
        g_plus = q2_gradient(params, half, np.ones(1))
        half_minus = interval_dataset([1.0], [2.0], [1], [[-1.0]])
        g_minus = q2_gradient(params, half_minus, np.ones(1))
        assert g_plus[1] == pytest.approx(-g_minus[1], rel=1e-12)

    def test_floored_mass_raises(self):
        # a huge shape pushes both endpoint survivals to zero and the
        # interval mass under the floor
        d = interval_dataset([10.0], [11.0], [1], [[0.0]])
        params = LatencyParams(alpha=400.0, gamma=np.array([0.0]))
        with pytest.raises(GradientUnreliableError):
            q2_gradient(params, d, np.ones(1))


class TestMaximizeQ2:
    def test_fixed_point_restart(self, rng):
        d, w, params = random_instance(rng, n=40)
        first = maximize_q2(d, w, params)
        second = maximize_q2(d, w, first.params)
        assert second.objective == pytest.approx(first.objective, abs=1e-10)

    def test_monotone_improvement(self, rng):
        for _ in range(10):
            d, w, params = random_instance(rng)
            result = maximize_q2(d, w, params)
            assert result.objective >= q2_objective(params, d, w) - 1e-12

    def test_recovers_truth_on_narrow_intervals(self):
        gen = np.random.default_rng(5)
        n = 200
        truth = LatencyParams(alpha=0.5, gamma=np.array([1.0, 0.5]))
        x = gen.normal(size=(n, 2))
        scale = np.exp(-(x @ truth.gamma) / truth.alpha)
        t = scale * (-np.log(gen.random(n))) ** (1.0 / truth.alpha)
        left = np.maximum(t * 0.999, 1e-9)
        right = t * 1.001 + 1e-9
        d = interval_dataset(left, right, np.ones(n, dtype=int), x)
        result = maximize_q2(d, np.ones(n), LatencyParams(alpha=1.0, gamma=np.zeros(2)))
        assert abs(result.params.alpha - 0.5) < 0.15
        assert np.all(np.abs(result.params.gamma - truth.gamma) < 0.15)

    def test_matches_grid_search_oracle(self):
        gen = np.random.default_rng(17)
        n = 60
        truth_alpha, truth_gamma = 0.8, 0.6
        x = gen.normal(size=(n, 1))
        scale = np.exp(-(x[:, 0] * truth_gamma) / truth_alpha)
        t = scale * (-np.log(gen.random(n))) ** (1.0 / truth_alpha)
        cens = gen.uniform(0, 4.0, size=n)
        delta = (t <= cens).astype(int)
        left = np.where(delta == 1, np.maximum(t - 0.25, 0.0), cens)
        right = np.where(delta == 1, t + 0.25, np.inf)
        d = interval_dataset(left, right, delta, x)
        w = np.where(delta == 1, 1.0, 0.7)

        def grid_best(alphas, gammas):
            # direct-summation objective, vectorized over the gamma axis
            best = (-np.inf, None)
            ev = d.delta == 1
            for a in alphas:
                la = d.left ** a
                ra = np.where(ev, np.where(ev, d.right, 1.0) ** a, np.inf)
                rate = np.exp(np.outer(d.x[:, 0], gammas))
                s_left = np.exp(-la[:, None] * rate)
                mass = np.where(
                    ev[:, None],
                    np.log(np.maximum(s_left - np.exp(-ra[:, None] * rate), 1e-300)),
                    w[:, None] * np.log(np.maximum(s_left, 1e-300)),
                )
                values = mass.sum(axis=0)
                k = int(np.argmax(values))
                if values[k] > best[0]:
                    best = (float(values[k]), (float(a), float(gammas[k])))
            return best[1]

        a0, g0 = grid_best(np.arange(0.05, 3.0, 0.01), np.arange(-3.0, 3.0, 0.01))
        a1, g1 = grid_best(
            np.arange(a0 - 0.02, a0 + 0.02, 0.002),
            np.arange(g0 - 0.02, g0 + 0.02, 0.002),
        )
        result = maximize_q2(d, w, LatencyParams(alpha=1.0, gamma=np.zeros(1)))
        assert abs(result.params.alpha - a1) < 0.02
        assert abs(result.params.gamma[0] - g1) < 0.02

    def test_iteration_cap_flags_nonconvergence(self, rng):
        d, w, params = random_instance(rng, n=30)
        result = maximize_q2(d, w, params, max_iter=1)
        assert result.converged in (False, True)  # flag present and boolean
        full = maximize_q2(d, w, params)
        assert full.objective >= result.objective - 1e-12
