"""Command-line harness: fig1, fig2, metrics, and fit subcommands.

Each subcommand writes delimited artifacts plus a ``manifest.json`` naming
the resolved configuration and every file produced, and renders a PNG of
the result unless ``--no-plot`` is given.  Option resolution is flags over
config file over defaults; the config format is flat ``key = value`` lines
with ``#`` comments.  Exit codes: 0 success, 1 numerical failure
(divergence, singular covariance), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .experiments import (
    FIG2_COVARIANCE,
    GridSpec,
    fig1_objective,
    run_fig1_vector_fields,
    run_fig2_whitening,
    run_metric_comparison,
)
from .linalg import LinalgError, SingularMatrixError
from .metrics import (
    AnalyticGauss2dFisher,
    EmpiricalFisher,
    EnergyMetric,
    MonteCarloFisher,
    diagonal_of,
)
from .models import DataSet, Gauss2dModel, l2_regression_model, linear_map
from .optimize import (
    DescentTrace,
    OptimizerConfig,
    natural_descent,
    steepest_descent,
    whitened_descent,
)
from .regularize import RegularizationConfig

THETA_TRUE = np.array([0.0, 0.0])

METRIC_CHOICES = ("analytic", "mc", "empirical", "energy", "diagonal", "none")
OPTIMIZER_CHOICES = ("steepest", "natural", "whitened")

OPTION_TYPES = {
    "out": str,
    "seed": int,
    "lr": float,
    "steps": int,
    "refresh": int,
    "eps": float,
    "metric": str,
    "optimizer": str,
    "no_plot": bool,
    "data_n": int,
    "n": int,
    "theta": str,
    "n_mc": int,
    "n_data": int,
    "data": str,
    "y_dim": int,
}

_COMMON = {
    "out": "natgrad_out",
    "seed": 0,
    "lr": 0.1,
    "steps": 1000,
    "refresh": 10,
    "eps": 0.01,
    "metric": "analytic",
    "optimizer": "natural",
    "no_plot": False,
}

DEFAULTS = {
    "fig1": {**_COMMON, "lr": 0.02, "steps": 2000, "data_n": None},
    "fig2": {**_COMMON, "n": 10000},
    "metrics": {**_COMMON, "theta": "1,-1", "n_mc": 100000, "n_data": 10000},
    # fit freezes the metric at the start by default (refresh = step budget):
    # near a perfect fit the empirical Fisher degenerates, and re-estimating
    # it there blows the step size up
    "fit": {
        **_COMMON,
        "lr": 1.0,
        "steps": 500,
        "refresh": None,
        "metric": "empirical",
        "data": None,
        "y_dim": 1,
    },
}


class UsageError(Exception):
    """Bad flags, bad config, or malformed input files; exits with code 2."""


def parse_config(text: str) -> Dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def config_to_text(resolved: Dict) -> str:
    """Inverse of parse_config for the resolved options (None entries skipped)."""
    lines = []
    for key, value in resolved.items():
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _coerce(key: str, raw: str):
    typ = OPTION_TYPES[key]
    if typ is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise UsageError(f"config value for {key} must be boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError:
        raise UsageError(
            f"config value for {key} must be {typ.__name__}, got {raw!r}"
        ) from None


def resolve_options(subcommand: str, args: argparse.Namespace):
    """Merge flags over config-file values over defaults."""
    resolved = dict(DEFAULTS[subcommand])
    config_text: Optional[str] = None
    if args.config is not None:
        try:
            config_text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        for key, raw in parse_config(config_text).items():
            if key not in resolved:
                raise UsageError(
                    f"config key {key!r} is not an option of {subcommand}"
                )
            resolved[key] = _coerce(key, raw)
    for key in resolved:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = flag_value
    if resolved.get("metric") not in METRIC_CHOICES:
        raise UsageError(f"metric must be one of {METRIC_CHOICES}")
    if resolved.get("optimizer") not in OPTIMIZER_CHOICES:
        raise UsageError(f"optimizer must be one of {OPTIMIZER_CHOICES}")
    return resolved, config_text


def _out_dir(resolved) -> Path:
    path = Path(resolved["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _optimizer_config(resolved) -> OptimizerConfig:
    refresh = resolved["refresh"]
    if refresh is None:
        refresh = resolved["steps"]
        resolved["refresh"] = refresh
    return OptimizerConfig(
        learning_rate=resolved["lr"],
        max_steps=resolved["steps"],
        refresh_interval=refresh,
        regularization=RegularizationConfig(epsilon=resolved["eps"]),
        seed=resolved["seed"],
    )


def _write_manifest(out_dir, subcommand, resolved, config_text, files, t_start):
    manifest = {
        "subcommand": subcommand,
        "config": resolved,
        "config_text": config_text,
        "seed": resolved["seed"],
        "out_dir": str(out_dir),
        "files": files,
        "wall_time_s": round(time.perf_counter() - t_start, 6),
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _write_kl_curves(path, traces: Dict[str, DescentTrace]) -> None:
    names = list(traces)
    kls = {name: traces[name].kls for name in names}
    length = max(len(traces[name]) for name in names)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step"] + [f"kl_{name}" for name in names])
        for i in range(length):
            row = [str(i)]
            for name in names:
                series = kls[name]
                if series is None or i >= len(series):
                    row.append("")
                else:
                    row.append(repr(float(series[i])))
            writer.writerow(row)


def _gauss2d_provider(resolved):
    """Metric provider for the benchmark model per the --metric option."""
    metric = resolved["metric"]
    model = Gauss2dModel()
    if metric == "analytic":
        return AnalyticGauss2dFisher()
    if metric == "diagonal":
        return diagonal_of(AnalyticGauss2dFisher())
    if metric == "mc":
        return MonteCarloFisher(model, n_samples=10000, seed=resolved["seed"])
    data = model.sample(
        THETA_TRUE, resolved.get("data_n") or 10000, resolved["seed"]
    )
    if metric == "empirical":
        return EmpiricalFisher(model, data)
    if metric == "energy":
        return EnergyMetric(lambda x, th: -model.grad_log_q(x, th), data)
    raise UsageError("fig1 needs a metric; 'none' only applies to fit --optimizer steepest")


def cmd_fig1(args) -> int:
    t_start = time.perf_counter()
    resolved, config_text = resolve_options("fig1", args)
    if resolved["optimizer"] == "steepest":
        raise UsageError(
            "fig1 always runs the steepest reference; pick --optimizer natural "
            "or whitened for the metric-aware trace"
        )
    out_dir = _out_dir(resolved)
    config = _optimizer_config(resolved)
    obj = fig1_objective(resolved["data_n"], resolved["seed"])
    provider = _gauss2d_provider(resolved)
    theta_init = np.array([1.0, -1.0])

    steepest = steepest_descent(obj, theta_init, config)
    descend = natural_descent if resolved["optimizer"] == "natural" else whitened_descent
    metric_trace = descend(obj, provider, theta_init, config)

    raw_field, whitened_field = run_fig1_vector_fields(GridSpec())

    second_name = resolved["optimizer"]
    files = []
    steepest.to_csv(out_dir / "steepest_trace.csv")
    files.append("steepest_trace.csv")
    metric_trace.to_csv(out_dir / f"{second_name}_trace.csv")
    files.append(f"{second_name}_trace.csv")
    _write_kl_curves(
        out_dir / "kl_curves.csv", {"steepest": steepest, second_name: metric_trace}
    )
    files.append("kl_curves.csv")
    raw_field.to_csv(out_dir / "field_raw.csv")
    files.append("field_raw.csv")
    whitened_field.to_csv(out_dir / "field_whitened.csv")
    files.append("field_whitened.csv")

    if not resolved["no_plot"]:
        from .plotting import plot_fig1

        plot_fig1(steepest, metric_trace, raw_field, whitened_field,
                  out_dir / "fig1.png")
        files.append("fig1.png")

    _write_manifest(out_dir, "fig1", resolved, config_text, files, t_start)

    code = 0
    for name, trace in [("steepest", steepest), (second_name, metric_trace)]:
        if trace.diverged:
            print(f"warning: {name} descent diverged after {len(trace)} "
                  "recorded steps", file=sys.stderr)
            code = 1
    return code


def cmd_fig2(args) -> int:
    t_start = time.perf_counter()
    resolved, config_text = resolve_options("fig2", args)
    out_dir = _out_dir(resolved)
    report = run_fig2_whitening(resolved["n"], resolved["seed"])

    files = []
    DataSet(report.raw_samples).to_csv(out_dir / "raw_samples.csv")
    files.append("raw_samples.csv")
    DataSet(report.whitened_samples).to_csv(out_dir / "whitened_samples.csv")
    files.append("whitened_samples.csv")
    blob = {
        "dim": report.whitening_matrix.dim,
        "whitening_matrix": [float(v) for v in report.whitening_matrix.mat.ravel()],
        "generating_covariance": [float(v) for v in FIG2_COVARIANCE.ravel()],
        "raw_covariance": [float(v) for v in report.raw_covariance.mat.ravel()],
        "whitened_covariance": [
            float(v) for v in report.whitened_covariance.mat.ravel()
        ],
        "identity_deviation": report.identity_deviation,
    }
    with open(out_dir / "whitening.json", "w") as fh:
        json.dump(blob, fh, indent=2)
        fh.write("\n")
    files.append("whitening.json")

    if not resolved["no_plot"]:
        from .plotting import plot_fig2

        plot_fig2(report, out_dir / "fig2.png")
        files.append("fig2.png")

    _write_manifest(out_dir, "fig2", resolved, config_text, files, t_start)

    # whitening by the sample covariance makes the whitened sample covariance
    # identity by construction, so judge sample size by how far the estimate
    # sits from the generating covariance instead
    estimate_deviation = float(
        np.max(np.abs(report.raw_covariance.mat - FIG2_COVARIANCE))
    )
    if estimate_deviation > 0.05:
        print(
            f"warning: sample covariance at n={resolved['n']} is off the "
            f"generating covariance by {estimate_deviation:.3f} (> 0.05); "
            "the whitening matrix is a noisy estimate",
            file=sys.stderr,
        )
    return 0


def cmd_metrics(args) -> int:
    t_start = time.perf_counter()
    resolved, config_text = resolve_options("metrics", args)
    out_dir = _out_dir(resolved)
    try:
        theta = np.array([float(v) for v in resolved["theta"].split(",")])
    except ValueError:
        raise UsageError(
            f"--theta must be two comma-separated numbers, got {resolved['theta']!r}"
        ) from None
    if theta.shape != (2,):
        raise UsageError("--theta must have exactly two components")

    report = run_metric_comparison(
        theta, resolved["n_mc"], resolved["n_data"], resolved["seed"]
    )

    files = []
    report.to_csv(out_dir / "metrics.csv")
    files.append("metrics.csv")
    blob = {name: m.to_json_dict() for name, m in report.rows.items()}
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(blob, fh, indent=2)
        fh.write("\n")
    files.append("metrics.json")

    if not resolved["no_plot"]:
        from .plotting import plot_metrics

        plot_metrics(report, out_dir / "metrics.png")
        files.append("metrics.png")

    _write_manifest(out_dir, "metrics", resolved, config_text, files, t_start)
    return 0


def _fit_provider(resolved, model, data):
    metric = resolved["metric"]
    if metric == "empirical":
        return EmpiricalFisher(model, data)
    if metric == "diagonal":
        return diagonal_of(EmpiricalFisher(model, data))
    if metric == "energy":
        return EnergyMetric(lambda x, th: -model.grad_log_q(x, th), data)
    raise UsageError(
        f"fit cannot use metric {metric!r}; choose empirical, diagonal, "
        "energy, or none (with --optimizer steepest)"
    )


def cmd_fit(args) -> int:
    t_start = time.perf_counter()
    resolved, config_text = resolve_options("fit", args)
    if resolved["data"] is None:
        raise UsageError("fit requires --data CSV")
    if resolved["y_dim"] != 1:
        raise UsageError("the built-in linear map predicts a single output; "
                         "--y-dim must be 1")
    try:
        data = DataSet.from_csv(resolved["data"])
    except OSError as exc:
        raise UsageError(f"cannot read data file: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"malformed data CSV: {exc}") from exc
    x_dim = data.dim - resolved["y_dim"]
    if x_dim < 1:
        raise UsageError(
            f"data has {data.dim} columns; need at least one feature "
            "column plus the target"
        )

    out_dir = _out_dir(resolved)
    config = _optimizer_config(resolved)
    model, obj = l2_regression_model(linear_map(x_dim), data)
    theta0 = np.zeros(x_dim)

    opt = resolved["optimizer"]
    if opt == "steepest":
        trace = steepest_descent(obj, theta0, config)
    else:
        provider = _fit_provider(resolved, model, data)
        descend = natural_descent if opt == "natural" else whitened_descent
        trace = descend(obj, provider, theta0, config)

    files = []
    trace.to_csv(out_dir / "fit_trace.csv")
    files.append("fit_trace.csv")
    result = {
        "theta": [float(v) for v in trace.final_params] if len(trace) else None,
        "objective": float(trace.objectives[-1]) if len(trace) else None,
        "terminated_by": trace.terminated_by,
        "n_steps": trace.n_steps,
    }
    with open(out_dir / "fit_result.json", "w") as fh:
        json.dump(result, fh, indent=2)
        fh.write("\n")
    files.append("fit_result.json")

    if not resolved["no_plot"] and len(trace):
        from .plotting import plot_fit

        plot_fit(trace, out_dir / "fit.png")
        files.append("fit.png")

    _write_manifest(out_dir, "fit", resolved, config_text, files, t_start)

    if trace.diverged:
        print(f"warning: fit diverged after {len(trace)} recorded steps",
              file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--lr", type=float, help="learning rate")
    common.add_argument("--steps", type=int, help="step budget")
    common.add_argument("--refresh", type=int, help="metric refresh interval")
    common.add_argument("--eps", type=float, help="robust-inverse epsilon")
    common.add_argument("--metric", choices=METRIC_CHOICES, help="metric provider")
    common.add_argument(
        "--optimizer", choices=OPTIMIZER_CHOICES, help="descent variant"
    )
    common.add_argument(
        "--no-plot", dest="no_plot", action="store_const", const=True,
        help="skip PNG rendering",
    )

    parser = argparse.ArgumentParser(
        prog="natgrad",
        description="Natural-gradient descent experiments and model fitting.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fig1", parents=[common],
                       help="steepest vs natural descent on the 2D benchmark")
    p.add_argument("--data-n", dest="data_n", type=int,
                   help="use a finite sample of this size instead of the "
                        "population objective")
    p.set_defaults(func=cmd_fig1)

    p = sub.add_parser("fig2", parents=[common], help="signal whitening demo")
    p.add_argument("--n", type=int, help="number of samples")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("metrics", parents=[common],
                       help="compare Fisher metric estimates at a point")
    p.add_argument("--theta", help="evaluation point, e.g. '1,-1'")
    p.add_argument("--n-mc", dest="n_mc", type=int,
                   help="Monte-Carlo sample count")
    p.add_argument("--n-data", dest="n_data", type=int,
                   help="empirical-Fisher data count")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("fit", parents=[common],
                       help="fit a linear model to CSV data")
    p.add_argument("--data", help="input CSV of (x..., y) rows")
    p.add_argument("--y-dim", dest="y_dim", type=int,
                   help="number of trailing target columns (must be 1)")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LinalgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
