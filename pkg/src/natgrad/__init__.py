"""Natural-gradient descent toolkit.

Fisher-information metrics, regularized metric inversion, whitened-parameter
descent, and a CLI that reproduces the library's benchmark experiments.
"""

from .linalg import (
    ConvergenceError,
    IndefiniteMatrixError,
    LinalgError,
    SingularMatrixError,
    SymMatrix,
    solve_spd,
    sym_eig,
    sym_inv_sqrt,
    sym_sqrt,
)
from .metrics import (
    AnalyticGauss2dFisher,
    ConstantMetric,
    DiagonalOf,
    EmpiricalFisher,
    EnergyMetric,
    Metric,
    MetricProvider,
    MonteCarloFisher,
    diagonal_of,
    fisher_analytic_gauss2d,
    fisher_empirical,
    fisher_monte_carlo,
    matrix_natural_update,
)
from .models import (
    DataSet,
    Gauss2dModel,
    Objective,
    ProbModel,
    gauss2d_kl,
    gauss2d_population_nll,
    l2_regression_model,
    linear_map,
    nll_objective,
)
from .optimize import (
    DescentTrace,
    OptimizerConfig,
    TraceRecord,
    descent_direction_holds,
    natural_descent,
    phi_space_objective,
    steepest_descent,
    whitened_descent,
)
from .regularize import (
    RegularizationConfig,
    apply_inverse_metric,
    ridge_solve,
    robust_inverse,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticGauss2dFisher",
    "ConstantMetric",
    "ConvergenceError",
    "DataSet",
    "DescentTrace",
    "DiagonalOf",
    "EmpiricalFisher",
    "EnergyMetric",
    "Gauss2dModel",
    "IndefiniteMatrixError",
    "LinalgError",
    "Metric",
    "MetricProvider",
    "MonteCarloFisher",
    "Objective",
    "OptimizerConfig",
    "ProbModel",
    "RegularizationConfig",
    "SingularMatrixError",
    "SymMatrix",
    "TraceRecord",
    "apply_inverse_metric",
    "descent_direction_holds",
    "diagonal_of",
    "fisher_analytic_gauss2d",
    "fisher_empirical",
    "fisher_monte_carlo",
    "gauss2d_kl",
    "gauss2d_population_nll",
    "l2_regression_model",
    "linear_map",
    "matrix_natural_update",
    "natural_descent",
    "nll_objective",
    "phi_space_objective",
    "ridge_solve",
    "robust_inverse",
    "solve_spd",
    "steepest_descent",
    "sym_eig",
    "sym_inv_sqrt",
    "sym_sqrt",
    "whitened_descent",
]
