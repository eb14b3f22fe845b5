"""Descent loops: steepest, natural-gradient, and whitened-space.

All three share the same skeleton: record the current point, stop on a small
gradient or an exhausted budget, otherwise step along a direction.  They
differ only in the direction.  Steepest uses the raw gradient.  Natural
applies the inverse metric to it.  Whitened never inverts the metric at all:
it maps parameters into phi = W theta with W = G^{1/2}(theta_fixed), takes a
plain gradient step there, and maps back, refreshing theta_fixed every
``refresh_interval`` steps.  For a constant metric the whitened loop is
algebraically identical to the natural one (W^{-1} W^{-1} = G^{-1}).

Divergence does not raise: the first non-finite objective or gradient ends
the run with the partial trace flagged, so unstable configurations can be
compared against stable ones.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .linalg import SymMatrix, sym_inv_sqrt, sym_sqrt
from .metrics import MetricProvider
from .models import Objective
from .regularize import RegularizationConfig, apply_inverse_metric

TERMINATIONS = ("max_steps", "stop_tol", "diverged")


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 0.1
    max_steps: int = 1000
    refresh_interval: int = 10
    stop_tol: float = 1e-10
    regularization: RegularizationConfig = field(default_factory=RegularizationConfig)
    seed: int = 0
    debug_checks: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.refresh_interval < 1:
            raise ValueError(
                f"refresh_interval must be >= 1, got {self.refresh_interval}"
            )
        if self.stop_tol < 0:
            raise ValueError(f"stop_tol must be >= 0, got {self.stop_tol}")


@dataclass(frozen=True)
class TraceRecord:
    step: int
    params: np.ndarray
    objective: float
    kl: Optional[float] = None


class DescentTrace:
    """Every point an optimizer visited, plus why it stopped.

    Steps count from 0 (the starting point is always recorded).  A diverged
    run keeps only the finite prefix.
    """

    def __init__(
        self,
        records: List[TraceRecord],
        terminated_by: str,
        config: OptimizerConfig,
    ) -> None:
        if terminated_by not in TERMINATIONS:
            raise ValueError(f"unknown termination {terminated_by!r}")
        if not records and terminated_by != "diverged":
            raise ValueError("empty trace only allowed for diverged runs")
        for i, rec in enumerate(records):
            if rec.step != i:
                raise ValueError(f"record {i} has step {rec.step}; must count from 0")
            if not np.isfinite(rec.objective):
                raise ValueError(f"non-finite objective at step {rec.step}")
        self.records = list(records)
        self.terminated_by = terminated_by
        self.config = config

    def __len__(self) -> int:
        return len(self.records)

    @property
    def diverged(self) -> bool:
        return self.terminated_by == "diverged"

    @property
    def params(self) -> np.ndarray:
        return np.array([r.params for r in self.records])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r.objective for r in self.records])

    @property
    def kls(self) -> Optional[np.ndarray]:
        if not self.records or self.records[0].kl is None:
            return None
        return np.array([r.kl for r in self.records])

    @property
    def final_params(self) -> np.ndarray:
        return self.records[-1].params

    @property
    def n_steps(self) -> int:
        return self.records[-1].step if self.records else 0

    def to_csv(self, path) -> None:
        n_params = len(self.records[0].params) if self.records else 0
        header = (
            ["step"]
            + [f"theta_{i}" for i in range(n_params)]
            + ["objective", "kl"]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for rec in self.records:
                row = [str(rec.step)]
                row += [repr(float(v)) for v in rec.params]
                row.append(repr(float(rec.objective)))
                row.append("" if rec.kl is None else repr(float(rec.kl)))
                writer.writerow(row)

    def to_json_dict(self) -> dict:
        return {
            "terminated_by": self.terminated_by,
            "config": asdict(self.config),
            "records": [
                {
                    "step": rec.step,
                    "params": [float(v) for v in rec.params],
                    "objective": float(rec.objective),
                    "kl": None if rec.kl is None else float(rec.kl),
                }
                for rec in self.records
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class WhitenedState:
    """Frozen whitening frame: w = G^{1/2}(theta_fixed), w_inv its inverse."""

    theta_fixed: np.ndarray
    w: SymMatrix
    w_inv: SymMatrix

    def __post_init__(self):
        resid = np.max(np.abs(self.w.mat @ self.w_inv.mat - np.eye(self.w.dim)))
        if resid > 1e-8:
            raise ValueError(f"w @ w_inv deviates from identity by {resid:.2e}")


def _whitened_state(provider: MetricProvider, theta: np.ndarray) -> WhitenedState:
    metric = provider.evaluate(theta)
    dense = metric.as_dense_matrix()
    # eps_floor=0 so a singular metric raises instead of being floored
    return WhitenedState(
        theta_fixed=theta.copy(),
        w=sym_sqrt(dense),
        w_inv=sym_inv_sqrt(dense, eps_floor=0.0),
    )


def phi_space_objective(obj: Objective, state: WhitenedState) -> Objective:
    """View an objective through the whitening map phi = W theta.

    Returns an objective whose gradient in phi obeys the chain rule
    grad_phi = W^{-1} grad_theta.  Third-party descent routines can run on
    this view directly; only the plain evaluation hook is provided here.
    """
    w_inv = state.w_inv.mat

    def value_fn(phi):
        return obj.value(w_inv @ phi)

    def gradient_fn(phi):
        return w_inv @ obj.gradient(w_inv @ phi)

    kl_fn = None
    if obj.kl_fn is not None:
        kl_fn = lambda phi: obj.kl_fn(w_inv @ phi)
    return Objective(obj.n_params, value_fn, gradient_fn, kl_fn)


def _run_loop(
    obj: Objective,
    theta0,
    config: OptimizerConfig,
    step_fn: Callable[[int, np.ndarray, np.ndarray], np.ndarray],
) -> DescentTrace:
    theta = np.asarray(theta0, dtype=float).copy()
    if theta.shape != (obj.n_params,):
        raise ValueError(
            f"theta0 shape {theta.shape} does not match objective "
            f"dimension {obj.n_params}"
        )
    records: List[TraceRecord] = []
    terminated = "max_steps"
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(config.max_steps + 1):
            value = obj.value(theta)
            grad = obj.gradient(theta)
            if not (np.isfinite(value) and np.all(np.isfinite(grad))):
                terminated = "diverged"
                break
            kl = None if obj.kl_fn is None else float(obj.kl_fn(theta))
            records.append(TraceRecord(t, theta.copy(), value, kl))
            if float(np.linalg.norm(grad)) < config.stop_tol:
                terminated = "stop_tol"
                break
            if t == config.max_steps:
                terminated = "max_steps"
                break
            theta_next = step_fn(t, theta, grad)
            if config.debug_checks and not float(grad @ (theta - theta_next)) > 0.0:
                raise AssertionError(
                    f"step {t}: update is not a descent direction "
                    f"(grad . displacement = {float(grad @ (theta - theta_next)):.3e})"
                )
            theta = theta_next
    return DescentTrace(records, terminated, config)


def steepest_descent(obj: Objective, theta0, config: OptimizerConfig) -> DescentTrace:
    """Plain gradient descent: theta_{t+1} = theta_t - lr * grad J(theta_t)."""

    def step(t, theta, grad):
        return theta - config.learning_rate * grad

    return _run_loop(obj, theta0, config, step)


def natural_descent(
    obj: Objective,
    provider: MetricProvider,
    theta0,
    config: OptimizerConfig,
) -> DescentTrace:
    """Metric-aware descent: theta_{t+1} = theta_t - lr * G^{-1} grad J.

    The metric is re-evaluated every ``refresh_interval`` steps (at steps
    0, r, 2r, ...); between refreshes the cached metric is reused, which is
    what makes expensive estimators affordable.
    """
    state = {"metric": None}

    def step(t, theta, grad):
        if t % config.refresh_interval == 0 or state["metric"] is None:
            state["metric"] = provider.evaluate(theta)
        nat_grad = apply_inverse_metric(state["metric"], grad, config.regularization)
        return theta - config.learning_rate * nat_grad

    return _run_loop(obj, theta0, config, step)


def whitened_descent(
    obj: Objective,
    provider: MetricProvider,
    theta0,
    config: OptimizerConfig,
) -> DescentTrace:
    """Descend in the whitened parameters phi = G^{1/2}(theta_fixed) theta.

    Each step: (1) map the current point into phi, (2) form the phi-space
    gradient W^{-1} grad_theta, (3) take the plain gradient step in phi,
    (4) map back.  theta_fixed (and with it W) refreshes every
    ``refresh_interval`` steps.  Needs a strictly PD metric at every
    refresh point; a singular one raises.
    """
    state = {"frame": None}

    def step(t, theta, grad):
        if t % config.refresh_interval == 0 or state["frame"] is None:
            state["frame"] = _whitened_state(provider, theta)
        frame = state["frame"]
        phi = frame.w.mat @ theta
        grad_phi = frame.w_inv.mat @ grad
        phi_next = phi - config.learning_rate * grad_phi
        return frame.w_inv.mat @ phi_next

    return _run_loop(obj, theta0, config, step)


def descent_direction_holds(obj: Objective, h: SymMatrix, theta) -> bool:
    """True when stepping along -H grad J still descends: grad^T H grad > 0.

    Any positive definite H passes for any nonzero gradient; this is the
    safety property that makes approximate metrics forgiving.
    """
    grad = obj.gradient(theta)
    return bool(float(grad @ h.mat @ grad) > 0.0)
