"""Command-line entry point: ``ssm-gic {fit,gradcheck,simulate,compare}``.

Exit codes: 0 success, 1 gradcheck tolerance exceeded, 2 configuration or
input error, 3 numerical failure (filter divergence, singular J).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .core import FilterInit, TimeSeries
from .criteria import compare_models, format_table
from .diff_filter import gradient_filter, hessian_filter
from .kalman import FilterDivergenceError, InvalidModelError, loglik
from .models import SeasonalArConfig, SeasonalConfig, TrendConfig, ar_root_moduli, simulate
from .optimize import AllStartsFailedError, OptimizerConfig, default_start, fit, multi_start_fit
from .oracle import FdConfig, fd_gradient, fd_hessian

logger = logging.getLogger("ssmgic")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
WHARD_ENV = "SSM_GIC_WHARD"
DEFAULT_CANDIDATES = "trend1,trend2,seasonal,seasonal-ar1,seasonal-ar2,seasonal-ar3"


class DataError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class ConfigError(ValueError):
    pass


def ingest_csv(path, log_transform: bool = False) -> TimeSeries:
    """Read a one-column CSV of observations.

    A single non-numeric first line is taken as a header; blank lines are
    skipped. Errors cite the 1-based line number.
    """
    values = []
    header_seen = False
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            if len(cells) != 1:
                raise DataError(f"expected one column, found {len(cells)}", lineno)
            cell = cells[0]
            try:
                v = float(cell)
            except ValueError:
                if not values and not header_seen:
                    header_seen = True
                    continue
                raise DataError(f"non-numeric value {cell!r}", lineno) from None
            if not math.isfinite(v):
                raise DataError(f"non-finite value {cell!r}", lineno)
            if log_transform:
                if v <= 0:
                    raise DataError(f"value {cell} is not positive; cannot take logarithm", lineno)
                v = math.log(v)
            values.append(v)
    if not values:
        raise DataError(f"{path} contains no observations")
    return TimeSeries(np.array(values))


def write_csv(path, series: TimeSeries) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("value\n")
        for v in series.values:
            fh.write(f"{v:.17g}\n")


def _num(x):
    if x is None:
        return None
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_num(v) for v in np.asarray(x, dtype=float).tolist()] if np.ndim(x) <= 1 else [_num(r) for r in x]
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class RunConfig:
    command: str
    data_path: Optional[str] = None
    model: str = "trend"
    trend_order: int = 1
    period: int = 12
    ar_order: int = 1
    init: Optional[tuple] = None
    init_scale: str = "natural"
    log_transform_data: bool = False
    kappa: float = 1.0e4
    max_iters: int = 200
    grad_tol: float = 1e-8
    tol: float = 1e-4
    hess_tol: float = 1e-3
    n: int = 155
    seed: int = 0
    candidates: str = DEFAULT_CANDIDATES
    output_path: Optional[str] = None
    timestamp: bool = True

    def model_config(self):
        return make_model(self.model, self.trend_order, self.period, self.ar_order)


def make_model(family: str, trend_order: int = 1, period: int = 12, ar_order: int = 1):
    try:
        if family == "trend":
            return TrendConfig(trend_order)
        if family == "seasonal":
            return SeasonalConfig(trend_order, period)
        if family == "seasonal-ar":
            return SeasonalArConfig(trend_order, period, ar_order)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown model family {family!r}")


def parse_candidate(token: str, period: int):
    """'trend1', 'trend2', 'seasonal', 'seasonal1', 'seasonal-ar2', ... -> model config."""
    t = token.strip().lower()
    if t.startswith("seasonal-ar"):
        rest = t[len("seasonal-ar"):]
        return make_model("seasonal-ar", 2, period, int(rest) if rest else 1)
    if t.startswith("seasonal"):
        rest = t[len("seasonal"):]
        return make_model("seasonal", int(rest) if rest else 2, period)
    if t.startswith("trend"):
        rest = t[len("trend"):]
        return make_model("trend", int(rest) if rest else 1)
    raise ConfigError(f"unknown candidate model {token!r}")


def label_of(model) -> str:
    return "({},{},{})".format(*model.label)


def _describe_model(model) -> dict:
    family = {TrendConfig: "trend", SeasonalConfig: "seasonal", SeasonalArConfig: "seasonal-ar"}[type(model)]
    out = {"family": family, "label": label_of(model)}
    out["trend_order"] = model.order if isinstance(model, TrendConfig) else model.trend_order
    if not isinstance(model, TrendConfig):
        out["period"] = model.period
    if isinstance(model, SeasonalArConfig):
        out["ar_order"] = model.ar_order
    return out


def _initial_theta(cfg: RunConfig, model, y: Optional[TimeSeries]) -> np.ndarray:
    p = len(model.param_names)
    if cfg.init is None:
        if y is None:
            raise ConfigError("--init is required")
        return default_start(model, y)
    values = np.asarray(cfg.init, dtype=float)
    if values.size != p:
        raise ConfigError(f"--init has {values.size} values, model {label_of(model)} needs {p}")
    if cfg.init_scale == "working":
        return values
    mask = np.asarray(model.log_variance)
    if np.any(values[mask] <= 0):
        raise ConfigError("variances in --init must be positive on the natural scale")
    theta = values.copy()
    theta[mask] = np.log(values[mask])
    return theta


def _criteria_block(crit) -> dict:
    return {
        "I_hat": _num(crit.I_hat),
        "J_hat": _num(crit.J_hat),
        "j_condition": _num(crit.j_condition),
        "b_aic": crit.p,
        "b_gic": _num(crit.b_gic),
        "aic": _num(-2.0 * _num(crit.loglik) + 2.0 * crit.p),
        "gic": None if crit.singular else _num(-2.0 * _num(crit.loglik) + 2.0 * _num(crit.b_gic)),
    }


def fit_report(model, result, y: TimeSeries, cfg: RunConfig) -> dict:
    pv = result.theta_hat
    report = {
        "model": _describe_model(model),
        "N": y.N,
        "theta_hat": {"names": list(pv.names), "working": _num(pv.theta), "natural": _num(pv.natural_scale)},
        "loglik": _num(result.loglik),
        "p": pv.p,
        "gradient": _num(result.gradient),
        "hessian": _num(result.hessian),
        "neg_hessian": _num(-result.hessian),
        "convergence": {
            "converged": result.converged,
            "iterations": result.iterations,
            "gradient_norm": _num(result.gradient_norm),
            "grad_tol": cfg.grad_tol,
            "message": result.message,
        },
    }
    report.update(_criteria_block(result.criteria))
    if isinstance(model, SeasonalArConfig):
        report["ar_root_moduli"] = _num(ar_root_moduli(pv.theta[4:]))
    return report


def _envelope(cfg: RunConfig, **body) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": cfg.command, "version": __version__}
    if cfg.timestamp:
        out["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    if cfg.data_path is not None:
        out["data"] = {"path": str(cfg.data_path), "log_transform": cfg.log_transform_data}
    out["kappa"] = cfg.kappa
    out.update(body)
    return out


def _emit(cfg: RunConfig, report: dict, text: Optional[str] = None) -> None:
    payload = json.dumps(report, indent=2, sort_keys=False, allow_nan=False)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
        if text:
            print(text)
    else:
        print(payload)
        if text:
            print(text, file=sys.stderr)


def _load(cfg: RunConfig) -> TimeSeries:
    if cfg.data_path is None:
        raise ConfigError("a data file is required")
    if not os.path.exists(cfg.data_path):
        raise ConfigError(f"data file {cfg.data_path} does not exist")
    return ingest_csv(cfg.data_path, cfg.log_transform_data)


def _opt_config(cfg: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(max_iters=cfg.max_iters, grad_tol=cfg.grad_tol)


def _run_fit(cfg: RunConfig) -> int:
    y = _load(cfg)
    model = cfg.model_config()
    theta0 = _initial_theta(cfg, model, y)
    result = fit(model, y, theta0, _opt_config(cfg), FilterInit(kappa=cfg.kappa))
    report = fit_report(model, result, y, cfg)
    _emit(cfg, _envelope(cfg, **report))
    return EXIT_NUMERIC if result.criteria.singular else EXIT_OK


def _within(analytic, numeric, rel, floor) -> tuple[float, bool]:
    err = np.abs(np.asarray(analytic) - np.asarray(numeric))
    scale = np.abs(numeric)
    rel_err = float(np.max(err / np.maximum(scale, floor / rel)))
    ok = bool(np.all(err <= np.maximum(rel * scale, floor)))
    return rel_err, ok


def gradcheck(model, y: TimeSeries, theta, init: FilterInit, tol=1e-4, hess_tol=1e-3, fd: FdConfig = FdConfig()) -> dict:
    """Compare analytic derivatives against central finite differences at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    ev = hessian_filter(model.build(theta), init, y)
    g_fd = fd_gradient(lambda t: loglik(model.build(t), init, y), theta, fd)
    h_fd = fd_hessian(lambda t: gradient_filter(model.build(t), init, y).gradient, theta, fd)
    g_rel, g_ok = _within(ev.gradient, g_fd, tol, 1e-6)
    h_rel, h_ok = _within(ev.hessian, h_fd, hess_tol, 1e-5)
    rows = []
    for j, name in enumerate(model.param_names):
        rows.append({
            "parameter": name,
            "theta": _num(theta[j]),
            "analytic": _num(ev.gradient[j]),
            "finite_difference": _num(g_fd[j]),
            "abs_error": _num(abs(ev.gradient[j] - g_fd[j])),
        })
    return {
        "loglik": _num(ev.loglik),
        "gradient": rows,
        "hessian_analytic": _num(ev.hessian),
        "hessian_finite_difference": _num(h_fd),
        "max_rel_error_gradient": _num(g_rel),
        "max_rel_error_hessian": _num(h_rel),
        "tol_gradient": tol,
        "tol_hessian": hess_tol,
        "passed": g_ok and h_ok,
    }


def _run_gradcheck(cfg: RunConfig) -> int:
    y = _load(cfg)
    model = cfg.model_config()
    theta = _initial_theta(cfg, model, y)
    body = gradcheck(model, y, theta, FilterInit(kappa=cfg.kappa), cfg.tol, cfg.hess_tol)
    _emit(cfg, _envelope(cfg, model=_describe_model(model), N=y.N, **body))
    return EXIT_OK if body["passed"] else EXIT_TOLERANCE


def _run_simulate(cfg: RunConfig) -> int:
    if not cfg.output_path:
        raise ConfigError("simulate needs --out")
    model = cfg.model_config()
    theta = _initial_theta(cfg, model, None)
    spec = model.build(theta)
    series = simulate(spec, FilterInit(V0=np.zeros((spec.m, spec.m))), cfg.n, cfg.seed)
    write_csv(cfg.output_path, series)
    return EXIT_OK


def candidate_starts(model, y: TimeSeries) -> list:
    """Default start plus a variant with a much smaller first (trend) variance."""
    base = default_start(model, y)
    alt = base.copy()
    alt[0] -= math.log(1000.0)
    return [base, alt]


def _run_compare(cfg: RunConfig) -> int:
    y = _load(cfg)
    init = FilterInit(kappa=cfg.kappa)
    entries = []
    models = [parse_candidate(tok, cfg.period) for tok in cfg.candidates.split(",") if tok.strip()]
    if not models:
        raise ConfigError("no candidate models given")
    for model in models:
        results = multi_start_fit(model, y, candidate_starts(model, y), _opt_config(cfg), init)
        best = results[0]
        entries.append((label_of(model), model, best))
    rows = compare_models([(label, best.criteria) for label, _, best in entries])
    fits = {label: fit_report(model, best, y, cfg) for label, model, best in entries}
    table = [
        {
            "rank": r.rank, "model": r.label, "loglik": _num(r.loglik), "p": r.p, "b_aic": r.p,
            "b_gic": _num(r.b_gic), "aic": _num(r.aic), "gic": _num(r.gic),
            "converged": fits[r.label]["convergence"]["converged"],
        }
        for r in rows
    ]
    _emit(cfg, _envelope(cfg, N=y.N, table=table, fits=fits, best=rows[0].label), format_table(rows))
    return EXIT_OK


COMMANDS = {"fit": _run_fit, "gradcheck": _run_gradcheck, "simulate": _run_simulate, "compare": _run_compare}


def run(cfg: RunConfig) -> int:
    try:
        return COMMANDS[cfg.command](cfg)
    except (ConfigError, DataError, InvalidModelError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (FilterDivergenceError, np.linalg.LinAlgError, AllStartsFailedError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERIC


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssm-gic", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p):
        p.add_argument("--model", choices=["trend", "seasonal", "seasonal-ar"], default="trend")
        p.add_argument("--trend-order", type=int, default=None, help="1 or 2 (default 1 for trend, 2 otherwise)")
        p.add_argument("--period", type=int, default=12)
        p.add_argument("--ar-order", type=int, default=1)
        p.add_argument("--init", type=_floats, default=None, help="comma-separated initial parameters")
        p.add_argument("--init-scale", choices=["natural", "working"], default="natural")

    def data_flags(p):
        p.add_argument("data", help="one-column CSV file")
        p.add_argument("--log-data", action="store_true", help="fit the natural log of the data")
        p.add_argument("--kappa", type=float, default=1.0e4, help="initial state variance scale")
        p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
        p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field")

    def opt_flags(p):
        p.add_argument("--max-iters", type=int, default=200)
        p.add_argument("--grad-tol", type=float, default=1e-8)

    p_fit = sub.add_parser("fit", help="maximum likelihood fit with GIC/AIC report")
    data_flags(p_fit)
    model_flags(p_fit)
    opt_flags(p_fit)

    p_gc = sub.add_parser("gradcheck", help="analytic vs finite-difference derivatives")
    data_flags(p_gc)
    model_flags(p_gc)
    p_gc.add_argument("--tol", type=float, default=1e-4)
    p_gc.add_argument("--hess-tol", type=float, default=1e-3)

    p_sim = sub.add_parser("simulate", help="draw a series from a model")
    model_flags(p_sim)
    p_sim.add_argument("--n", type=int, default=155)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", required=True)

    p_cmp = sub.add_parser("compare", help="fit several models and rank them by GIC")
    data_flags(p_cmp)
    opt_flags(p_cmp)
    p_cmp.add_argument("--period", type=int, default=12)
    p_cmp.add_argument("--candidates", default=DEFAULT_CANDIDATES)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    model = getattr(args, "model", "trend")
    trend_order = getattr(args, "trend_order", None)
    if trend_order is None:
        trend_order = 1 if model == "trend" else 2
    return RunConfig(
        command=args.command,
        data_path=getattr(args, "data", None),
        model=model,
        trend_order=trend_order,
        period=getattr(args, "period", 12),
        ar_order=getattr(args, "ar_order", 1),
        init=getattr(args, "init", None),
        init_scale=getattr(args, "init_scale", "natural"),
        log_transform_data=getattr(args, "log_data", False),
        kappa=getattr(args, "kappa", 1.0e4),
        max_iters=getattr(args, "max_iters", 200),
        grad_tol=getattr(args, "grad_tol", 1e-8),
        tol=getattr(args, "tol", 1e-4),
        hess_tol=getattr(args, "hess_tol", 1e-3),
        n=getattr(args, "n", 155),
        seed=getattr(args, "seed", 0),
        candidates=getattr(args, "candidates", DEFAULT_CANDIDATES),
        output_path=getattr(args, "out", None),
        timestamp=not getattr(args, "no_timestamp", False),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "n", 1) < 1:
        parser.error("--n must be >= 1")
    return run(config_from_args(args))


if __name__ == "__main__":
    sys.exit(main())
