"""Parameter-space metrics G(theta) and their providers.

A metric turns gradient descent into metric-aware descent: the update
direction becomes G^{-1} grad J instead of grad J.  This module supplies the
standard choices: the analytic Fisher matrix of the benchmark Gaussian, a
Monte-Carlo Fisher averaged over the model distribution, an empirical Fisher
averaged over observed data, an energy-gradient metric for unnormalized
models, and a diagonal approximation of any of them.  The matrix-parameter
relative update (dJ/dW) W^T W lives here too.

There is no uniquely correct metric; providers are never ranked here.
Benchmarking them against each other is the experiments module's job.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import SymMatrix, sym_eig
from .models import GAUSS2D_MEAN_JACOBIAN, DataSet, ProbModel

PSD_TOLERANCE = 1e-10


@dataclass(frozen=True)
class Metric:
    """A PSD metric evaluated at a parameter point.

    ``representation`` is "dense" (entries in ``matrix``) or "diagonal"
    (entries in ``diagonal``); the diagonal form exists so that inversion
    can stay O(N).
    """

    representation: str
    at_params: np.ndarray
    matrix: Optional[SymMatrix] = None
    diagonal: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(
            self, "at_params", np.asarray(self.at_params, dtype=float)
        )
        if self.representation == "dense":
            if self.matrix is None:
                raise ValueError("dense metric needs a matrix")
            lam = sym_eig(self.matrix).eigenvalues
            if lam[0] < -PSD_TOLERANCE * lam[-1]:
                raise ValueError(
                    f"metric is not PSD: eigenvalues [{lam[0]:.3e}, {lam[-1]:.3e}]"
                )
        elif self.representation == "diagonal":
            if self.diagonal is None:
                raise ValueError("diagonal metric needs diagonal entries")
            d = np.asarray(self.diagonal, dtype=float)
            d.setflags(write=False)
            object.__setattr__(self, "diagonal", d)
            if d.min(initial=0.0) < -PSD_TOLERANCE * d.max(initial=0.0):
                raise ValueError(f"diagonal metric has negative entry {d.min():.3e}")
        else:
            raise ValueError(f"unknown representation {self.representation!r}")

    @property
    def dim(self) -> int:
        if self.representation == "dense":
            return self.matrix.dim
        return len(self.diagonal)

    def as_dense_matrix(self) -> SymMatrix:
        if self.representation == "dense":
            return self.matrix
        return SymMatrix.from_diagonal(self.diagonal)

    def to_json_dict(self) -> dict:
        if self.representation == "dense":
            entries = [float(v) for v in self.matrix.mat.ravel()]
        else:
            entries = [float(v) for v in self.diagonal]
        return {
            "dim": self.dim,
            "representation": self.representation,
            "entries": entries,
            "at_params": [float(v) for v in self.at_params],
        }


class MetricProvider:
    """Lazily evaluated, per-theta cached metric source.

    The optimizer decides when to refresh; the provider must not silently
    recompute, so results are cached under the exact parameter bits.  The
    cache tolerates concurrent readers with a single writer.
    """

    cost_class = "analytic"

    def __init__(self) -> None:
        self._cache: dict[bytes, Metric] = {}
        self._lock = threading.Lock()

    def evaluate(self, theta) -> Metric:
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        metric = self._cache.get(key)
        if metric is None:
            computed = self._compute(theta)
            with self._lock:
                metric = self._cache.setdefault(key, computed)
        return metric

    def _compute(self, theta: np.ndarray) -> Metric:
        raise NotImplementedError


def _mean_outer(scores: np.ndarray, theta: np.ndarray) -> Metric:
    """Mean outer product of score rows, mirrored from the upper triangle.

    Mirroring guarantees exact symmetry instead of relying on the matmul
    to deliver it.
    """
    m = scores.T @ scores / scores.shape[0]
    sym = np.triu(m) + np.triu(m, 1).T
    return Metric(representation="dense", matrix=SymMatrix(sym), at_params=theta)


def fisher_analytic_gauss2d() -> Metric:
    """The closed-form Fisher matrix of the benchmark Gaussian, [[82/9, 1], [1, 1/9]].

    Constant in theta because the model's mean map is linear.
    """
    j = GAUSS2D_MEAN_JACOBIAN
    return Metric(
        representation="dense",
        matrix=SymMatrix(j.T @ j),
        at_params=np.zeros(2),
    )


def fisher_monte_carlo(
    model: ProbModel, theta, n_samples: int, seed: int
) -> Metric:
    """Fisher matrix estimated by averaging score outer products over the model.

    Draws ``n_samples`` points from q(. ; theta) and averages
    grad_log_q outer grad_log_q.  Deterministic per seed.  Models without a
    sampler raise; average over observed data with fisher_empirical instead.
    """
    if n_samples < 1:
        raise ValueError("need n_samples >= 1")
    theta = np.asarray(theta, dtype=float)
    data = model.sample(theta, n_samples, seed)
    scores = model.grad_log_q_batch(data.points, theta)
    return _mean_outer(scores, theta)


def fisher_empirical(model: ProbModel, theta, data: DataSet) -> Metric:
    """Fisher-style average of score outer products over observed data."""
    theta = np.asarray(theta, dtype=float)
    if data.dim != model.data_dim:
        raise ValueError(
            f"data dimension {data.dim} != model data_dim {model.data_dim}"
        )
    scores = model.grad_log_q_batch(data.points, theta)
    return _mean_outer(scores, theta)


def energy_metric(
    energy_grad: Callable[[np.ndarray, np.ndarray], np.ndarray],
    data: DataSet,
    theta,
) -> Metric:
    """Metric from energy gradients: mean outer product of dE/dtheta over data.

    For unnormalized models q ~ exp(-E) this drops the intractable log-Z
    term entirely; the caller supplies dE/dtheta.
    """
    theta = np.asarray(theta, dtype=float)
    grads = np.array([energy_grad(x, theta) for x in data.points], dtype=float)
    return _mean_outer(grads, theta)


class AnalyticGauss2dFisher(MetricProvider):
    cost_class = "analytic"

    def _compute(self, theta):
        base = fisher_analytic_gauss2d()
        return Metric(representation="dense", matrix=base.matrix, at_params=theta)


class ConstantMetric(MetricProvider):
    """Provider wrapping a fixed matrix (identity metric, test metrics)."""

    cost_class = "analytic"

    def __init__(self, matrix: SymMatrix) -> None:
        super().__init__()
        self._matrix = matrix

    def _compute(self, theta):
        return Metric(representation="dense", matrix=self._matrix, at_params=theta)


class MonteCarloFisher(MetricProvider):
    cost_class = "monte_carlo"

    def __init__(self, model: ProbModel, n_samples: int = 10_000, seed: int = 0):
        super().__init__()
        self.model = model
        self.n_samples = n_samples
        self.seed = seed

    def _compute(self, theta):
        return fisher_monte_carlo(self.model, theta, self.n_samples, self.seed)


class EmpiricalFisher(MetricProvider):
    cost_class = "empirical"

    def __init__(self, model: ProbModel, data: DataSet):
        super().__init__()
        self.model = model
        self.data = data

    def _compute(self, theta):
        return fisher_empirical(self.model, theta, self.data)


class EnergyMetric(MetricProvider):
    cost_class = "energy"

    def __init__(self, energy_grad, data: DataSet):
        super().__init__()
        self.energy_grad = energy_grad
        self.data = data

    def _compute(self, theta):
        return energy_metric(self.energy_grad, self.data, theta)


class DiagonalOf(MetricProvider):
    """Diagonal approximation of another provider's metric.

    Neglecting off-diagonal entries keeps inversion O(N); convergence help
    is usually retained even so.
    """

    def __init__(self, provider: MetricProvider) -> None:
        super().__init__()
        self.wrapped = provider
        self.cost_class = f"diagonal-of({provider.cost_class})"

    def _compute(self, theta):
        inner = self.wrapped.evaluate(theta)
        if inner.representation == "diagonal":
            return inner
        return Metric(
            representation="diagonal",
            diagonal=np.diag(inner.matrix.mat).copy(),
            at_params=inner.at_params,
        )


def diagonal_of(provider: MetricProvider) -> MetricProvider:
    return DiagonalOf(provider)


def matrix_natural_update(grad: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Relative update direction for a matrix parameter: (dJ/dW) W^T W.

    Derived for square non-singular W; stepping along this direction is
    equivariant under right-multiplication of W (see the two-path tests).
    """
    grad = np.asarray(grad, dtype=float)
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"w must be square, got shape {w.shape}")
    if grad.shape != w.shape:
        raise ValueError(f"gradient shape {grad.shape} != w shape {w.shape}")
    return grad @ w.T @ w
