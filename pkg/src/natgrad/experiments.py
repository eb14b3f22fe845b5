"""Desk-scale benchmark experiments on the ill-parameterized Gaussian.

Four runnable studies, each deterministic given its config and seed:

* trajectory comparison: steepest vs natural descent from [1, -1] on the
  population objective, with per-step KL against the true parameters;
* vector fields: the negative objective gradient over a parameter grid,
  in the raw coordinates and in the whitened coordinates phi = G^{1/2} theta
  where every arrow points straight at the optimum;
* signal whitening: draw a correlated Gaussian cloud, whiten it with the
  symmetric inverse square root of its sample covariance, report both
  covariances;
* metric comparison: tabulate the analytic, Monte-Carlo, empirical, and
  diagonal Fisher estimates at a point against the analytic reference.

The functions return in-memory reports; writing CSVs and manifests is the
command-line layer's job.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .linalg import (
    SingularMatrixError,
    SymMatrix,
    is_positive_definite,
    sym_inv_sqrt,
    sym_sqrt,
)
from .metrics import (
    AnalyticGauss2dFisher,
    Metric,
    diagonal_of,
    fisher_analytic_gauss2d,
    fisher_empirical,
    fisher_monte_carlo,
)
from .models import Gauss2dModel, gauss2d_kl, gauss2d_population_nll, nll_objective
from .optimize import DescentTrace, OptimizerConfig, natural_descent, steepest_descent

THETA_INIT = np.array([1.0, -1.0])
THETA_TRUE = np.array([0.0, 0.0])

# stable for steepest descent: 0.02 < 2 / lambda_max(G) ~ 0.217
FIG1_LEARNING_RATE = 0.02
FIG1_MAX_STEPS = 2000

# the generating covariance is a free choice; an elongated tilted cloud
# makes the whitening visible
FIG2_COVARIANCE = np.array([[2.0, 1.2], [1.2, 1.0]])


@dataclass(frozen=True)
class GridSpec:
    min: float = -1.5
    max: float = 1.5
    points_per_axis: int = 13

    def __post_init__(self):
        if not self.min < self.max:
            raise ValueError(f"need min < max, got [{self.min}, {self.max}]")
        if self.points_per_axis < 2:
            raise ValueError(
                f"points_per_axis must be >= 2, got {self.points_per_axis}"
            )

    def points(self) -> np.ndarray:
        """All grid points as rows, first axis varying slowest."""
        axis = np.linspace(self.min, self.max, self.points_per_axis)
        return np.array([[a, b] for a in axis for b in axis])


@dataclass(frozen=True)
class VectorField:
    points: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        dirs = np.asarray(self.directions, dtype=float)
        if pts.shape != dirs.shape:
            raise ValueError(
                f"points shape {pts.shape} != directions shape {dirs.shape}"
            )
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(dirs))):
            raise ValueError("vector field contains non-finite entries")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "directions", dirs)

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x0", "x1", "dx0", "dx1"])
            for p, d in zip(self.points, self.directions):
                writer.writerow([repr(float(v)) for v in (*p, *d)])


@dataclass(frozen=True)
class WhiteningReport:
    raw_samples: np.ndarray
    whitened_samples: np.ndarray
    raw_covariance: SymMatrix
    whitened_covariance: SymMatrix
    whitening_matrix: SymMatrix

    @property
    def identity_deviation(self) -> float:
        """Largest entrywise deviation of the whitened covariance from I."""
        eye = np.eye(self.whitened_covariance.dim)
        return float(np.max(np.abs(self.whitened_covariance.mat - eye)))


@dataclass(frozen=True)
class MetricComparison:
    at_params: np.ndarray
    rows: Dict[str, Metric]
    reference: str = "analytic"

    def deviations(self) -> Dict[str, float]:
        ref = self.rows[self.reference].as_dense_matrix().mat
        return {
            name: float(np.max(np.abs(m.as_dense_matrix().mat - ref)))
            for name, m in self.rows.items()
        }

    def to_csv(self, path) -> None:
        devs = self.deviations()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "g00", "g01", "g10", "g11", "max_abs_deviation"])
            for name, m in self.rows.items():
                entries = m.as_dense_matrix().mat.ravel()
                writer.writerow(
                    [name]
                    + [repr(float(v)) for v in entries]
                    + [repr(devs[name])]
                )


def _sample_cov(centered: np.ndarray) -> SymMatrix:
    m = centered.T @ centered / centered.shape[0]
    return SymMatrix(np.triu(m) + np.triu(m, 1).T)


def fig1_objective(data_n: Optional[int] = None, seed: int = 0):
    """The benchmark objective: exact population NLL, or a finite-sample
    average over ``data_n`` draws from the true parameters."""
    if data_n is None:
        return gauss2d_population_nll(THETA_TRUE)
    model = Gauss2dModel()
    data = model.sample(THETA_TRUE, data_n, seed)
    obj = nll_objective(model, data)
    return obj.with_kl(lambda th: gauss2d_kl(th, THETA_TRUE))


def run_fig1_trajectories(
    config: OptimizerConfig,
    data_n: Optional[int] = None,
    seed: int = 0,
) -> Tuple[DescentTrace, DescentTrace]:
    """Steepest vs natural descent from [1, -1], analytic Fisher metric."""
    obj = fig1_objective(data_n, seed)
    steepest = steepest_descent(obj, THETA_INIT, config)
    natural = natural_descent(obj, AnalyticGauss2dFisher(), THETA_INIT, config)
    return steepest, natural


def run_fig1_vector_fields(
    grid: GridSpec = GridSpec(),
) -> Tuple[VectorField, VectorField]:
    """Negative-gradient fields in theta and in phi = G^{1/2} theta.

    The phi grid is the image of the theta grid, so the two fields describe
    the same objective seen in the two coordinate systems.
    """
    obj = gauss2d_population_nll(THETA_TRUE)
    g = fisher_analytic_gauss2d().matrix
    w = sym_sqrt(g).mat
    w_inv = sym_inv_sqrt(g).mat

    theta_points = grid.points()
    raw_dirs = np.array([-obj.gradient(th) for th in theta_points])
    phi_points = theta_points @ w  # w symmetric, rows map as w @ theta
    phi_dirs = np.array([w_inv @ d for d in raw_dirs])
    return (
        VectorField(theta_points, raw_dirs),
        VectorField(phi_points, phi_dirs),
    )


def run_fig2_whitening(
    n: int, seed: int, covariance: Optional[np.ndarray] = None
) -> WhiteningReport:
    """Draw n correlated samples and whiten them zero-phase.

    The whitening matrix is the symmetric inverse square root of the
    mean-centered sample covariance, so the transform is a pure
    decorrelation stretch with no rotation.
    """
    cov = FIG2_COVARIANCE if covariance is None else np.asarray(covariance, float)
    cov_m = SymMatrix(cov)
    if not is_positive_definite(cov_m):
        raise ValueError("generating covariance must be positive definite")
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")

    rng = np.random.default_rng(seed)
    shaper = sym_sqrt(cov_m).mat
    raw = rng.standard_normal((n, cov_m.dim)) @ shaper  # shaper symmetric
    centered = raw - raw.mean(axis=0)
    sample_cov = _sample_cov(centered)
    try:
        w = sym_inv_sqrt(sample_cov, eps_floor=0.0)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"sample covariance is singular at n={n}, dim={cov_m.dim}; "
            "need more samples than dimensions"
        ) from exc
    whitened = centered @ w.mat
    return WhiteningReport(
        raw_samples=raw,
        whitened_samples=whitened,
        raw_covariance=sample_cov,
        whitened_covariance=_sample_cov(whitened),
        whitening_matrix=w,
    )


def run_metric_comparison(
    theta, n_mc: int, n_data: int, seed: int
) -> MetricComparison:
    """All four Fisher estimates at one point, against the analytic row.

    The empirical row uses a fresh draw (seed + 1) so the two stochastic
    rows are independent estimates rather than the same numbers twice.
    """
    theta = np.asarray(theta, dtype=float)
    model = Gauss2dModel()
    analytic = AnalyticGauss2dFisher().evaluate(theta)
    mc = fisher_monte_carlo(model, theta, n_mc, seed)
    data = model.sample(theta, n_data, seed + 1)
    empirical = fisher_empirical(model, theta, data)
    diagonal = diagonal_of(AnalyticGauss2dFisher()).evaluate(theta)
    return MetricComparison(
        at_params=theta,
        rows={
            "analytic": analytic,
            "monte_carlo": mc,
            "empirical": empirical,
            "diagonal": diagonal,
        },
    )
