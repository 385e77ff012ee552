"""Quasi-Newton (BFGS) maximization of the log-likelihood with analytic gradients."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import FilterInit, ParameterVector, TimeSeries
from .criteria import CriteriaReport, criteria_from_evaluation
from .diff_filter import LikelihoodEvaluation, gradient_filter, hessian_filter
from .kalman import FilterDivergenceError
from .models import parameter_vector

logger = logging.getLogger(__name__)

LOG_VARIANCE_FLOOR = -60.0
# relative rounding noise of the recursion; the diffuse start (kappa = 1e4)
# costs several digits through cancellation in the covariance update
LOGLIK_NOISE = 1e-10


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 200
    grad_tol: float = 1e-8
    step_shrink: float = 0.5
    armijo_c: float = 1e-4
    max_shrinks: int = 60
    max_step: float = 5.0
    max_expansions: int = 10
    # reset B to the exact inverse negative Hessian every this many iterations (0 disables)
    hessian_refresh: int = 20
    initial_inverse_hessian: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        if not 0 < self.armijo_c <= 0.5:
            raise ValueError("armijo_c must lie in (0, 0.5]")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.hessian_refresh < 0:
            raise ValueError("hessian_refresh must be >= 0")


@dataclass(frozen=True)
class FitResult:
    theta_hat: ParameterVector
    loglik: float
    gradient: np.ndarray
    gradient_norm: float
    iterations: int
    converged: bool
    trajectory: tuple
    criteria: CriteriaReport
    hessian: np.ndarray
    message: str = ""

    @property
    def p(self) -> int:
        return self.theta_hat.p


class AllStartsFailedError(RuntimeError):
    def __init__(self, errors):
        super().__init__("every start failed: " + "; ".join(str(e) for e in errors))
        self.errors = list(errors)


def _project(theta: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = theta.copy()
    out[mask] = np.maximum(out[mask], LOG_VARIANCE_FLOOR)
    return out


def _evaluate(model, y, init, theta) -> LikelihoodEvaluation:
    return gradient_filter(model.build(theta), init, y)


def _try_evaluate(model, y, init, theta) -> Optional[LikelihoodEvaluation]:
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            ev = _evaluate(model, y, init, theta)
    except (FilterDivergenceError, FloatingPointError, ValueError):
        return None
    if not (math.isfinite(ev.loglik) and np.all(np.isfinite(ev.gradient))):
        return None
    return ev


def _roundoff_progress(ev: LikelihoodEvaluation, trial: LikelihoodEvaluation, s: np.ndarray, c: float) -> bool:
    """Armijo test for steps whose loglik change is lost in rounding noise.

    The change is estimated from the analytic gradients at both ends
    (trapezoid rule), which does not suffer the cancellation of the
    function-value difference.
    """
    noise = LOGLIK_NOISE * max(1.0, abs(ev.loglik))
    if abs(trial.loglik - ev.loglik) > noise:
        return False
    estimated = 0.5 * float((ev.gradient + trial.gradient) @ s)
    return estimated >= c * float(ev.gradient @ s)


def _expand(model, y, init, cfg, mask, theta, d, ev, accepted):
    """Double a full step while the slope along ``d`` stays nearly undiminished.

    Without this, regions where -loglik is not convex along ``d`` reject every
    BFGS update and leave a tiny inverse-Hessian estimate in place.
    """
    slope0 = float(ev.gradient @ d)
    lam = 1.0
    for _ in range(cfg.max_expansions):
        trial_ev = accepted[2]
        if float(trial_ev.gradient @ d) < 0.9 * slope0:
            break
        lam *= 2.0
        trial = _project(theta + lam * d, mask)
        s = trial - theta
        ev_trial = _try_evaluate(model, y, init, trial)
        if ev_trial is None or ev_trial.loglik < ev.loglik + cfg.armijo_c * (ev.gradient @ s) \
                or ev_trial.loglik <= trial_ev.loglik:
            break
        accepted = (trial, s, ev_trial)
    return accepted


def _exact_inverse(model, y, init, theta) -> Optional[np.ndarray]:
    """Positive-definite inverse built from the exact negative Hessian at ``theta``.

    Eigenvalues are replaced by their magnitudes, floored relative to the
    largest, so the result is usable on non-concave stretches too.
    """
    try:
        ev = hessian_filter(model.build(theta), init, y)
        w, V = np.linalg.eigh(-ev.hessian)
    except (FilterDivergenceError, np.linalg.LinAlgError, ValueError):
        return None
    w = np.abs(w)
    if not (np.all(np.isfinite(w)) and w.max() > 0):
        return None
    w = np.maximum(w, 1e-10 * w.max())
    return (V / w) @ V.T


def fit(model, y: TimeSeries, theta0, cfg: OptimizerConfig = OptimizerConfig(),
        init: FilterInit = FilterInit()) -> FitResult:
    """Maximize the log-likelihood of ``model`` (a model config with ``build``) from ``theta0``.

    Each iteration moves along B * grad, where B is the BFGS inverse-Hessian
    approximation of -loglik, with Armijo backtracking on the step length.
    Every ``cfg.hessian_refresh`` iterations B is replaced by the exact inverse
    of the negative Hessian when that is positive definite; this rescues
    ridges where the curvature spans many orders of magnitude.
    """
    pv0 = parameter_vector(model, theta0)
    mask = pv0.log_variance
    theta = _project(np.array(pv0.theta), mask)
    p = theta.size

    ev = _evaluate(model, y, init, theta)
    B = np.eye(p) if cfg.initial_inverse_hessian is None else np.array(cfg.initial_inverse_hessian, dtype=float)
    scaled = cfg.initial_inverse_hessian is not None
    trajectory = [(theta.copy(), ev.loglik)]
    message = "maximum iterations reached"
    for k in range(cfg.max_iters):
        if cfg.hessian_refresh and k and k % cfg.hessian_refresh == 0:
            exact = _exact_inverse(model, y, init, theta)
            if exact is not None:
                B, scaled = exact, True
        g = ev.gradient
        if np.max(np.abs(g)) < cfg.grad_tol:
            message = "gradient tolerance reached"
            break
        d = B @ g
        if not g @ d > 0:
            B = np.eye(p)
            d = g.copy()
        longest = np.max(np.abs(d))
        if longest > cfg.max_step:
            d *= cfg.max_step / longest

        lam = 1.0
        accepted = None
        for _ in range(cfg.max_shrinks):
            trial = _project(theta + lam * d, mask)
            s = trial - theta
            if not np.any(s):
                break
            ev_trial = _try_evaluate(model, y, init, trial)
            if ev_trial is not None and (
                ev_trial.loglik >= ev.loglik + cfg.armijo_c * (g @ s)
                or _roundoff_progress(ev, ev_trial, s, cfg.armijo_c)
            ):
                accepted = (trial, s, ev_trial)
                break
            lam *= cfg.step_shrink
        if accepted is None:
            message = "line search failed"
            break
        if lam == 1.0:
            accepted = _expand(model, y, init, cfg, mask, theta, d, ev, accepted)

        theta, s, ev_new = accepted
        # curvature of -loglik along s
        yk = g - ev_new.gradient
        sy = float(s @ yk)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yk):
            if not scaled:
                B = (sy / float(yk @ yk)) * np.eye(p)
                scaled = True
            rho = 1.0 / sy
            Vm = np.eye(p) - rho * np.outer(s, yk)
            B = Vm @ B @ Vm.T + rho * np.outer(s, s)
            B = 0.5 * (B + B.T)
        ev = ev_new
        trajectory.append((theta.copy(), ev.loglik))
        logger.debug("iter %d loglik %.10g |grad| %.3g", len(trajectory) - 1, ev.loglik, np.max(np.abs(ev.gradient)))

    full = hessian_filter(model.build(theta), init, y)
    grad_norm = float(np.max(np.abs(full.gradient)))
    converged = grad_norm < cfg.grad_tol
    if converged:
        message = "gradient tolerance reached"
    return FitResult(
        theta_hat=pv0.with_theta(theta),
        loglik=full.loglik,
        gradient=full.gradient,
        gradient_norm=grad_norm,
        iterations=len(trajectory) - 1,
        converged=converged,
        trajectory=tuple(trajectory),
        criteria=criteria_from_evaluation(full),
        hessian=full.hessian,
        message=message,
    )


def multi_start_fit(model, y: TimeSeries, starts: Sequence, cfg: OptimizerConfig = OptimizerConfig(),
                    init: FilterInit = FilterInit(), max_workers: int = 1) -> list[FitResult]:
    """Fit from every start and return the results ranked by log-likelihood (best first).

    Starts whose initial evaluation diverges are dropped; if all fail the
    collected errors are raised together.
    """
    if len(starts) < 1:
        raise ValueError("need at least one start")

    def run(start):
        try:
            return fit(model, y, start, cfg, init)
        except (FilterDivergenceError, ValueError, np.linalg.LinAlgError) as exc:
            return exc

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run, starts))
    else:
        outcomes = [run(s) for s in starts]
    results = [o for o in outcomes if isinstance(o, FitResult)]
    if not results:
        raise AllStartsFailedError(outcomes)
    return sorted(results, key=lambda r: -r.loglik)


def default_start(model, y: TimeSeries) -> np.ndarray:
    """A data-scaled starting point: variances split from var(diff y), AR(1)-like coefficients."""
    dy = np.diff(y.values) if y.N > 2 else y.values
    v = float(np.var(dy)) if dy.size > 1 else 1.0
    v = v if v > 0 else 1.0
    mask = np.asarray(model.log_variance)
    n_var = int(mask.sum())
    theta = np.zeros(mask.size)
    theta[mask] = math.log(v / n_var)
    if (~mask).any():
        theta[np.flatnonzero(~mask)[0]] = 0.5
    return theta
