"""Central finite-difference derivatives, kept independent of the analytic recursion."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ParameterVector


@dataclass(frozen=True)
class FdConfig:
    rel_step: float = 1e-4
    abs_floor: float = 1e-8

    def __post_init__(self):
        if not self.rel_step > 0:
            raise ValueError("rel_step must be positive")
        if not self.abs_floor > 0:
            raise ValueError("abs_floor must be positive")

    def steps(self, theta: np.ndarray) -> np.ndarray:
        return np.maximum(self.rel_step * np.abs(theta), self.abs_floor)


class NonFiniteEvaluation(ArithmeticError):
    pass


def _as_array(theta) -> np.ndarray:
    if isinstance(theta, ParameterVector):
        return np.array(theta.theta)
    return np.array(theta, dtype=float).ravel()


def fd_gradient(loglik_fn: Callable[[np.ndarray], float], theta, cfg: FdConfig = FdConfig()) -> np.ndarray:
    """Central differences with step max(C|theta_j|, abs_floor); exactly 2p calls."""
    th = _as_array(theta)
    h = cfg.steps(th)
    grad = np.empty(th.size)
    for j in range(th.size):
        e = np.zeros(th.size)
        e[j] = h[j]
        f_plus = float(loglik_fn(th + e))
        f_minus = float(loglik_fn(th - e))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NonFiniteEvaluation(f"non-finite log-likelihood when perturbing component {j}")
        grad[j] = (f_plus - f_minus) / (2.0 * h[j])
    return grad


def fd_hessian(grad_fn: Callable[[np.ndarray], np.ndarray], theta, cfg: FdConfig = FdConfig()) -> np.ndarray:
    """Central differences of an analytic gradient, symmetrized."""
    th = _as_array(theta)
    h = cfg.steps(th)
    p = th.size
    hess = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        e[j] = h[j]
        g_plus = np.asarray(grad_fn(th + e), dtype=float)
        g_minus = np.asarray(grad_fn(th - e), dtype=float)
        if not (np.all(np.isfinite(g_plus)) and np.all(np.isfinite(g_minus))):
            raise NonFiniteEvaluation(f"non-finite gradient when perturbing component {j}")
        hess[:, j] = (g_plus - g_minus) / (2.0 * h[j])
    return 0.5 * (hess + hess.T)
