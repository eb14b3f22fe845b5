import math

import numpy as np
import pytest

from conftest import central_difference_gradient, relative_error
from natgrad.models import (
    GAUSS2D_MEAN_JACOBIAN,
    DataSet,
    Gauss2dModel,
    L2RegressionModel,
    Objective,
    ParametricMap,
    gauss2d_grad_log_q,
    gauss2d_kl,
    gauss2d_log_q,
    gauss2d_mean,
    gauss2d_population_nll,
    gauss2d_sample,
    l2_regression_model,
    linear_map,
    nll_objective,
)

LOG_2PI = math.log(2 * math.pi)
FISHER = GAUSS2D_MEAN_JACOBIAN.T @ GAUSS2D_MEAN_JACOBIAN


class TestGauss2dMean:
    def test_origin(self):
        np.testing.assert_array_equal(gauss2d_mean([0.0, 0.0]), [0.0, 0.0])

    def test_frozen_values(self):
        np.testing.assert_allclose(gauss2d_mean([1.0, -1.0]), [8.0 / 3.0, 1.0 / 3.0])
        np.testing.assert_allclose(gauss2d_mean([0.0, 3.0]), [1.0, 0.0])


class TestGauss2dLogDensity:
    def test_at_mode(self):
        assert gauss2d_log_q([0, 0], [0, 0]) == pytest.approx(-LOG_2PI)
        assert gauss2d_log_q([8 / 3, 1 / 3], [1, -1]) == pytest.approx(-LOG_2PI)

    def test_unit_displacement(self):
        assert gauss2d_log_q([1, 0], [0, 0]) == pytest.approx(-LOG_2PI - 0.5)

    def test_density_integrates_to_one(self):
        # Quadrature oracle over a wide grid; tails beyond 8 sigma are negligible.
        xs = np.linspace(-8, 8, 401)
        step = xs[1] - xs[0]
        x1, x2 = np.meshgrid(xs, xs, indexing="ij")
        pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
        logq = Gauss2dModel().log_q_batch(pts, [0.0, 0.0])
        assert np.sum(np.exp(logq)) * step * step == pytest.approx(1.0, abs=1e-6)


class TestGauss2dScore:
    def test_zero_at_mean(self):
        np.testing.assert_allclose(
            gauss2d_grad_log_q([8 / 3, 1 / 3], [1, -1]), [0.0, 0.0], atol=1e-15
        )

    def test_frozen_value(self):
        np.testing.assert_allclose(
            gauss2d_grad_log_q([0, 0], [1, -1]), [-73.0 / 9.0, -8.0 / 9.0]
        )

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            x = rng.uniform(-3, 3, size=2)
            theta = rng.uniform(-2, 2, size=2)
            got = gauss2d_grad_log_q(x, theta)
            want = central_difference_gradient(lambda t: gauss2d_log_q(x, t), theta)
            assert relative_error(got, want) < 1e-6

    def test_batch_matches_pointwise(self):
        rng = np.random.default_rng(0)
        pts = rng.standard_normal((50, 2))
        theta = np.array([0.7, -1.3])
        model = Gauss2dModel()
        batch = model.grad_log_q_batch(pts, theta)
        for i, x in enumerate(pts):
            np.testing.assert_allclose(batch[i], model.grad_log_q(x, theta), atol=1e-14)


class TestGauss2dSample:
    def test_mean_and_covariance(self):
        data = gauss2d_sample([0.0, 0.0], 100_000, seed=42)
        pts = data.points
        assert np.abs(pts.mean(axis=0)).max() < 0.02
        centered = pts - pts.mean(axis=0)
        cov = centered.T @ centered / len(data)
        assert np.abs(cov - np.eye(2)).max() < 0.03

    def test_determinism(self):
        a = gauss2d_sample([1.0, 2.0], 100, seed=7)
        b = gauss2d_sample([1.0, 2.0], 100, seed=7)
        np.testing.assert_array_equal(a.points, b.points)

    def test_centered_at_model_mean(self):
        data = gauss2d_sample([1.0, -1.0], 100_000, seed=3)
        np.testing.assert_allclose(
            data.points.mean(axis=0), [8 / 3, 1 / 3], atol=0.02
        )


class TestNllObjective:
    def test_single_point_at_mode(self):
        obj = nll_objective(Gauss2dModel(), DataSet([[0.0, 0.0]]))
        assert obj.value([0.0, 0.0]) == pytest.approx(LOG_2PI)

    def test_single_point_gradient(self):
        obj = nll_objective(Gauss2dModel(), DataSet([[0.0, 0.0]]))
        np.testing.assert_allclose(obj.gradient([1, -1]), [73 / 9, 8 / 9])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            nll_objective(Gauss2dModel(), DataSet([[0.0, 0.0, 0.0]]))

    def test_sample_gradient_approaches_population(self):
        n = 10_000
        data = gauss2d_sample([0.0, 0.0], n, seed=11)
        sample_grad = nll_objective(Gauss2dModel(), data).gradient([1, -1])
        pop_grad = gauss2d_population_nll([0.0, 0.0]).gradient([1, -1])
        assert np.linalg.norm(sample_grad - pop_grad) < 5 * (3 / math.sqrt(n))

    def test_finite_difference_hygiene(self):
        data = gauss2d_sample([0.5, 0.5], 50, seed=2)
        obj = nll_objective(Gauss2dModel(), data)
        rng = np.random.default_rng(5)
        for _ in range(20):
            theta = rng.uniform(-2, 2, size=2)
            want = central_difference_gradient(obj.value, theta)
            assert relative_error(obj.gradient(theta), want) < 1e-5


class TestPopulationNll:
    def test_minimum(self):
        obj = gauss2d_population_nll([0.0, 0.0])
        assert obj.value([0.0, 0.0]) == pytest.approx(LOG_2PI + 1.0)
        np.testing.assert_array_equal(obj.gradient([0.0, 0.0]), [0.0, 0.0])

    def test_frozen_gradient(self):
        obj = gauss2d_population_nll([0.0, 0.0])
        np.testing.assert_allclose(obj.gradient([1, -1]), [73 / 9, 8 / 9])

    def test_gradient_is_fisher_times_displacement(self):
        rng = np.random.default_rng(9)
        true = np.array([0.3, -0.2])
        obj = gauss2d_population_nll(true)
        for _ in range(10):
            theta = rng.uniform(-5, 5, size=2)
            want = FISHER @ (theta - true)
            assert relative_error(obj.gradient(theta), want) < 1e-12

    def test_finite_difference_hygiene(self):
        obj = gauss2d_population_nll([1.0, 2.0])
        rng = np.random.default_rng(13)
        for _ in range(20):
            theta = rng.uniform(-3, 3, size=2)
            want = central_difference_gradient(obj.value, theta)
            assert relative_error(obj.gradient(theta), want) < 1e-5

    def test_kl_comparator_attached(self):
        obj = gauss2d_population_nll([0.0, 0.0])
        assert obj.kl_fn is not None
        assert obj.kl_fn([1.0, -1.0]) == pytest.approx(65.0 / 18.0)


class TestGauss2dKl:
    def test_zero_at_truth(self):
        assert gauss2d_kl([0.7, -0.4], [0.7, -0.4]) == 0.0

    def test_frozen_value(self):
        assert gauss2d_kl([1, -1], [0, 0]) == pytest.approx(65.0 / 18.0)

    def test_against_numerical_integration(self):
        # Independent oracle: integrate p * (log p - log q) on a grid once.
        model = Gauss2dModel()
        theta, theta_true = [1.0, -1.0], [0.0, 0.0]
        xs = np.linspace(-10, 10, 1201)
        step = xs[1] - xs[0]
        x1, x2 = np.meshgrid(xs, xs, indexing="ij")
        pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
        logp = model.log_q_batch(pts, theta_true)
        logq = model.log_q_batch(pts, theta)
        kl_quad = np.sum(np.exp(logp) * (logp - logq)) * step * step
        assert gauss2d_kl(theta, theta_true) == pytest.approx(kl_quad, abs=1e-9)

    def test_nonnegative(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            a, b = rng.uniform(-4, 4, size=2), rng.uniform(-4, 4, size=2)
            assert gauss2d_kl(a, b) >= 0.0

    def test_decreases_along_exact_natural_steps(self):
        # theta' = theta - eta*(theta - theta_true) contracts the KL for eta in (0, 1].
        true = np.array([0.5, 0.5])
        rng = np.random.default_rng(17)
        for eta in [0.05, 0.3, 0.7, 1.0]:
            theta = rng.uniform(-3, 3, size=2)
            last = gauss2d_kl(theta, true)
            for _ in range(5):
                theta = theta - eta * (theta - true)
                cur = gauss2d_kl(theta, true)
                assert cur < last or cur == 0.0
                last = cur


class TestDataSetCsv:
    def test_round_trip(self, tmp_path):
        data = gauss2d_sample([0.3, 0.9], 25, seed=1)
        path = tmp_path / "points.csv"
        data.to_csv(path)
        back = DataSet.from_csv(path)
        np.testing.assert_array_equal(back.points, data.points)

    def test_round_trip_is_byte_identical(self, tmp_path):
        data = gauss2d_sample([0.0, 0.0], 10, seed=5)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        data.to_csv(p1)
        DataSet.from_csv(p1).to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_malformed_field_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0,x1\n1.0,2.0\n3.0\n")
        with pytest.raises(ValueError, match="expected 2 fields"):
            DataSet.from_csv(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x0\n1.0\npotato\n")
        with pytest.raises(ValueError, match="non-numeric"):
            DataSet.from_csv(path)

    def test_rejects_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("x0,x1\n")
        with pytest.raises(ValueError, match="no data rows"):
            DataSet.from_csv(path)


class TestL2Regression:
    def test_scalar_hand_value(self):
        # f(x; theta) = theta*x, one pair (x=1, y=2), theta=0: score is [2].
        f = linear_map(1)
        model = L2RegressionModel(f)
        np.testing.assert_allclose(model.grad_log_q([1.0, 2.0], [0.0]), [2.0])

    def test_perfect_fit_gradient_is_zero(self):
        rng = np.random.default_rng(4)
        theta_star = np.array([1.5, -2.0, 0.25])
        x = rng.standard_normal((40, 3))
        y = x @ theta_star
        pairs = DataSet(np.column_stack([x, y]))
        _, obj = l2_regression_model(linear_map(3), pairs)
        np.testing.assert_allclose(obj.gradient(theta_star), np.zeros(3), atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(29)
        x = rng.standard_normal((15, 2))
        y = x @ np.array([0.5, 2.0]) + rng.standard_normal(15)
        pairs = DataSet(np.column_stack([x, y]))
        _, obj = l2_regression_model(linear_map(2), pairs)
        for _ in range(20):
            theta = rng.uniform(-2, 2, size=2)
            want = central_difference_gradient(obj.value, theta)
            assert relative_error(obj.gradient(theta), want) < 1e-6

    def test_no_sampler(self):
        model = L2RegressionModel(linear_map(2))
        with pytest.raises(NotImplementedError, match="no sampler"):
            model.sample([0.0, 0.0], 5, seed=0)

    def test_prediction_dimension_mismatch(self):
        bad = ParametricMap(
            n_params=1,
            x_dim=1,
            y_dim=1,
            value=lambda x, theta: np.array([1.0, 2.0]),  # wrong output size
            jacobian=lambda x, theta: np.zeros((1, 1)),
        )
        model = L2RegressionModel(bad)
        with pytest.raises(ValueError, match="y_dim"):
            model.log_q([1.0, 1.0], [0.0])

    def test_pair_dimension_mismatch(self):
        with pytest.raises(ValueError, match="x_dim \\+ y_dim"):
            l2_regression_model(linear_map(3), DataSet([[1.0, 2.0]]))


def test_objective_with_kl_shares_functions():
    obj = Objective(1, lambda t: float(t[0] ** 2), lambda t: 2 * t)
    assert obj.kl_fn is None
    tagged = obj.with_kl(lambda t: 0.0)
    assert tagged.kl_fn is not None
    assert tagged.value([3.0]) == obj.value([3.0])
