"""Stabilized application of inverse metrics.

Estimated metrics are noisy; tiny eigenvalues in G turn into huge ones in
G^{-1} and wreck the update.  Two standard remedies are provided: the robust
approximation (G^T G + eps I)^{-1} G^T, whose spectrum is bounded by
1/(2 sqrt(eps)) no matter how close G is to singular, and a plain ridge
shift G + lambda I.  ``apply_inverse_metric`` routes a gradient through
whichever remedy the config selects, falling back from the exact solve to
the robust form when the metric turns out singular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import SingularMatrixError, SymMatrix, solve_spd
from .metrics import Metric

MODES = ("robust", "ridge", "exact")


@dataclass(frozen=True)
class RegularizationConfig:
    """How to invert a metric: epsilon for the robust form and the diagonal
    floor, ridge_lambda for the ridge shift, mode selecting the dense path."""

    epsilon: float = 0.01
    ridge_lambda: float = 0.0
    mode: str = "exact"

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.ridge_lambda < 0:
            raise ValueError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def robust_inverse(g: SymMatrix, epsilon: float) -> SymMatrix:
    """Robust approximate inverse (G^T G + epsilon I)^{-1} G^T.

    Acts on each eigenvalue s of G as s / (s^2 + epsilon), so the result's
    spectrum never exceeds 1/(2 sqrt(epsilon)): near-singular metrics stop
    amplifying gradient noise.  With epsilon = 0 this is the exact inverse
    and a singular G raises.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    a = g.mat.T @ g.mat + epsilon * np.eye(g.dim)
    x = solve_spd(SymMatrix((a + a.T) / 2.0), g.mat.T)
    return SymMatrix((x + x.T) / 2.0)


def ridge_solve(g: SymMatrix, rhs: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """Solve (G + lambda I) x = rhs."""
    if ridge_lambda < 0:
        raise ValueError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    rhs = np.asarray(rhs, dtype=float)
    if ridge_lambda == 0.0:
        return solve_spd(g, rhs)
    shifted = SymMatrix(g.mat + ridge_lambda * np.eye(g.dim))
    return solve_spd(shifted, rhs)


def apply_inverse_metric(
    metric: Metric, grad: np.ndarray, config: RegularizationConfig | None = None
) -> np.ndarray:
    """Compute G^{-1} grad under the configured regularization.

    Diagonal metrics divide elementwise with entries floored at epsilon,
    skipping matrix machinery so the cost stays linear in the dimension.
    Dense metrics follow config.mode; exact mode falls back to the robust
    form on a singular metric when epsilon allows it.
    """
    if config is None:
        config = RegularizationConfig()
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (metric.dim,):
        raise ValueError(
            f"gradient shape {grad.shape} does not match metric dim {metric.dim}"
        )

    if metric.representation == "diagonal":
        return grad / np.maximum(metric.diagonal, config.epsilon)

    g = metric.matrix
    if config.mode == "exact":
        try:
            return solve_spd(g, grad)
        except SingularMatrixError:
            if config.epsilon > 0:
                return robust_inverse(g, config.epsilon).mat @ grad
            raise
    if config.mode == "ridge":
        return ridge_solve(g, grad, config.ridge_lambda)
    return robust_inverse(g, config.epsilon).mat @ grad
