"""Objective/model contracts and the two concrete example models.

The benchmark model throughout the library is a deliberately ill-parameterized
2D unit-covariance Gaussian whose mean depends on the parameters through the
constant Jacobian [[3, 1/3], [1/3, 0]]: one parameter direction moves the
density roughly nine times farther than the other, which is what makes plain
steepest descent slow and metric-aware descent interesting.  An L2-regression
model (squared error read as a conditional unit-variance Gaussian likelihood)
covers the supervised case.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)

# Single source for gauss2d gradients, Fisher, and the population objective.
GAUSS2D_MEAN_JACOBIAN = np.array([[3.0, 1.0 / 3.0], [1.0 / 3.0, 0.0]])
GAUSS2D_MEAN_JACOBIAN.setflags(write=False)


def _as_params(theta) -> np.ndarray:
    return np.asarray(theta, dtype=float)


class DataSet:
    """Immutable collection of data points, one point per row."""

    __slots__ = ("_points",)

    def __init__(self, points) -> None:
        a = np.array(points, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[0] < 1:
            raise ValueError(f"expected at least one point, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("data points must be finite")
        a.setflags(write=False)
        self._points = a

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self._points.shape[0]

    def to_csv(self, path) -> None:
        """Write one point per row with an x0..x{d-1} header.

        Floats are written with repr, which round-trips exactly, so a
        rerun with the same seed produces byte-identical files.
        """
        with open(path, "w", newline="") as fh:
            fh.write(",".join(f"x{i}" for i in range(self.dim)) + "\n")
            for row in self._points:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "DataSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty CSV") from None
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ValueError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric field") from None
        if not rows:
            raise ValueError(f"{path}: no data rows")
        return cls(rows)


class ProbModel:
    """Contract for probabilistic models: log-density, score, sampling."""

    n_params: int
    data_dim: int

    def log_q(self, x, theta) -> float:
        raise NotImplementedError

    def grad_log_q(self, x, theta) -> np.ndarray:
        raise NotImplementedError

    def sample(self, theta, n: int, seed: int) -> DataSet:
        raise NotImplementedError(
            f"{type(self).__name__} has no sampler; average over observed data instead"
        )

    # Batch hooks so metric estimation over 1e5 points is not a Python loop.
    def log_q_batch(self, points: np.ndarray, theta) -> np.ndarray:
        return np.array([self.log_q(x, theta) for x in points])

    def grad_log_q_batch(self, points: np.ndarray, theta) -> np.ndarray:
        return np.array([self.grad_log_q(x, theta) for x in points])


class Objective:
    """Scalar objective with analytic gradient.

    ``kl_fn``, when given, maps parameters to a KL divergence against the
    known ground truth; descent traces record it alongside the objective.
    """

    def __init__(
        self,
        n_params: int,
        value_fn: Callable[[np.ndarray], float],
        gradient_fn: Callable[[np.ndarray], np.ndarray],
        kl_fn: Optional[Callable[[np.ndarray], float]] = None,
    ) -> None:
        self.n_params = n_params
        self._value_fn = value_fn
        self._gradient_fn = gradient_fn
        self.kl_fn = kl_fn

    def value(self, theta) -> float:
        return float(self._value_fn(_as_params(theta)))

    def gradient(self, theta) -> np.ndarray:
        return np.asarray(self._gradient_fn(_as_params(theta)), dtype=float)

    def with_kl(self, kl_fn) -> "Objective":
        return Objective(self.n_params, self._value_fn, self._gradient_fn, kl_fn)


# ---------------------------------------------------------------------------
# The ill-parameterized 2D Gaussian.
# ---------------------------------------------------------------------------


def gauss2d_mean(theta) -> np.ndarray:
    """Mean of the model density: [3*t0 + t1/3, t0/3]."""
    return GAUSS2D_MEAN_JACOBIAN @ _as_params(theta)


def gauss2d_log_q(x, theta) -> float:
    resid = np.asarray(x, dtype=float) - gauss2d_mean(theta)
    return float(-LOG_2PI - 0.5 * resid @ resid)


def gauss2d_grad_log_q(x, theta) -> np.ndarray:
    """Score: [3*(x0-m0) + (x1-m1)/3, (x0-m0)/3]."""
    resid = np.asarray(x, dtype=float) - gauss2d_mean(theta)
    return GAUSS2D_MEAN_JACOBIAN.T @ resid


def gauss2d_sample(theta, n: int, seed: int) -> DataSet:
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    return DataSet(gauss2d_mean(theta) + rng.standard_normal((n, 2)))


class Gauss2dModel(ProbModel):
    """Unit-covariance 2D Gaussian with the ill-conditioned mean map."""

    n_params = 2
    data_dim = 2

    def log_q(self, x, theta) -> float:
        return gauss2d_log_q(x, theta)

    def grad_log_q(self, x, theta) -> np.ndarray:
        return gauss2d_grad_log_q(x, theta)

    def sample(self, theta, n: int, seed: int) -> DataSet:
        return gauss2d_sample(theta, n, seed)

    def log_q_batch(self, points, theta) -> np.ndarray:
        resid = points - gauss2d_mean(theta)
        return -LOG_2PI - 0.5 * np.sum(resid * resid, axis=1)

    def grad_log_q_batch(self, points, theta) -> np.ndarray:
        resid = points - gauss2d_mean(theta)
        return resid @ GAUSS2D_MEAN_JACOBIAN  # row i = J^T resid_i


def nll_objective(model: ProbModel, data: DataSet) -> Objective:
    """Negative mean log-likelihood of ``data`` under ``model``."""
    if data.dim != model.data_dim:
        raise ValueError(
            f"data dimension {data.dim} != model data_dim {model.data_dim}"
        )
    points = data.points

    def value(theta):
        return -np.mean(model.log_q_batch(points, theta))

    def gradient(theta):
        return -np.mean(model.grad_log_q_batch(points, theta), axis=0)

    return Objective(model.n_params, value, gradient)


def gauss2d_kl(theta, theta_true) -> float:
    """KL divergence between the model at theta_true and at theta.

    Both are unit-covariance Gaussians, so this is half the squared mean
    displacement (symmetric in its arguments).
    """
    dmu = gauss2d_mean(theta) - gauss2d_mean(theta_true)
    return float(0.5 * dmu @ dmu)


def gauss2d_population_nll(theta_true) -> Objective:
    """Expected negative log-likelihood under the exact generating density.

    The closed form log(2pi) + 1 + 0.5*||mu(theta) - mu(theta_true)||^2
    replaces the sample average so trajectory tests are exact rather than
    chasing Monte-Carlo noise.  Gradient is J^T (mu(theta) - mu(theta_true)),
    which equals Fisher @ (theta - theta_true) for this linear-Gaussian model.
    """
    mu_true = gauss2d_mean(theta_true)
    true = _as_params(theta_true)

    def value(theta):
        dmu = gauss2d_mean(theta) - mu_true
        return LOG_2PI + 1.0 + 0.5 * dmu @ dmu

    def gradient(theta):
        dmu = gauss2d_mean(theta) - mu_true
        return GAUSS2D_MEAN_JACOBIAN.T @ dmu

    return Objective(2, value, gradient, kl_fn=lambda th: gauss2d_kl(th, true))


# ---------------------------------------------------------------------------
# L2 regression as a conditional Gaussian.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametricMap:
    """A differentiable prediction map x -> f(x; theta).

    The caller supplies the value and the parameter-Jacobian; nothing here
    differentiates anything symbolically.
    """

    n_params: int
    x_dim: int
    y_dim: int
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]


def linear_map(n_inputs: int) -> ParametricMap:
    """Pure linear predictor f(x; theta) = theta . x with scalar output."""
    return ParametricMap(
        n_params=n_inputs,
        x_dim=n_inputs,
        y_dim=1,
        value=lambda x, theta: np.array([theta @ x]),
        jacobian=lambda x, theta: x[None, :].copy(),
    )


class L2RegressionModel(ProbModel):
    """Conditional unit-variance Gaussian: log q(y|x) = -||y - f(x)||^2/2 + const.

    Points are concatenated (x..., y...) rows.  There is no sampler: the
    input distribution is only known empirically, so metrics for this model
    should average over the observed data.
    """

    def __init__(self, f: ParametricMap) -> None:
        self.f = f
        self.n_params = f.n_params
        self.data_dim = f.x_dim + f.y_dim

    def _split(self, point):
        point = np.asarray(point, dtype=float)
        return point[: self.f.x_dim], point[self.f.x_dim :]

    def _residual(self, x, y, theta):
        pred = np.asarray(self.f.value(x, theta), dtype=float)
        if pred.shape != (self.f.y_dim,):
            raise ValueError(
                f"prediction shape {pred.shape} does not match y_dim {self.f.y_dim}"
            )
        return y - pred

    def log_q(self, point, theta) -> float:
        x, y = self._split(point)
        resid = self._residual(x, y, theta)
        return float(-0.5 * self.f.y_dim * LOG_2PI - 0.5 * resid @ resid)

    def grad_log_q(self, point, theta) -> np.ndarray:
        x, y = self._split(point)
        resid = self._residual(x, y, theta)
        return np.asarray(self.f.jacobian(x, theta), dtype=float).T @ resid


def l2_regression_model(
    f: ParametricMap, pairs: DataSet
) -> tuple[L2RegressionModel, Objective]:
    """Bundle an L2 regression likelihood with its mean-NLL objective."""
    model = L2RegressionModel(f)
    if pairs.dim != model.data_dim:
        raise ValueError(
            f"pairs have dimension {pairs.dim}, expected x_dim + y_dim = {model.data_dim}"
        )
    return model, nll_objective(model, pairs)
