"""Kalman filter and the prediction-error decomposition of the log-likelihood."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FilterInit, FilterStep, ModelSpec, TimeSeries, validate_model

LOG_2PI = math.log(2.0 * math.pi)


class FilterDivergenceError(ArithmeticError):
    """The innovation variance became non-positive or non-finite."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


class InvalidModelError(ValueError):
    pass


@dataclass(frozen=True)
class FilterOutput:
    steps: tuple
    loglik: float
    per_step_loglik: np.ndarray


def check_model(spec: ModelSpec) -> None:
    problems = validate_model(spec)
    if problems:
        raise InvalidModelError("; ".join(problems))


def symmetrize(V: np.ndarray) -> np.ndarray:
    return 0.5 * (V + np.swapaxes(V, -1, -2))


def predict(spec: ModelSpec, x: np.ndarray, V: np.ndarray, GQG: np.ndarray):
    x_pred = spec.F @ x
    V_pred = symmetrize(spec.F @ V @ spec.F.T + GQG)
    return x_pred, V_pred


def innovate(spec: ModelSpec, x_pred, V_pred, y: float, n: int):
    """Return (eps, r, V_pred H^T) for observation ``n`` (1-based)."""
    VHt = V_pred @ spec.H
    r = float(spec.H @ VHt) + spec.R
    if not (math.isfinite(r) and r > 0.0):
        raise FilterDivergenceError(n, f"innovation variance r = {r!r}")
    eps = y - float(spec.H @ x_pred)
    return eps, r, VHt


def update(x_pred, V_pred, VHt, eps: float, r: float):
    K = VHt / r
    x_filt = x_pred + K * eps
    # (I - K H) V_pred, with H V_pred = VHt^T
    V_filt = symmetrize(V_pred - np.outer(K, VHt))
    return K, x_filt, V_filt


def step_loglik(eps: float, r: float) -> float:
    return -0.5 * (LOG_2PI + math.log(r) + eps * eps / r)


def filter(spec: ModelSpec, init: FilterInit, y: TimeSeries, keep_steps: bool = True) -> FilterOutput:
    """Run the Kalman filter over ``y`` and accumulate the exact log-likelihood."""
    check_model(spec)
    x, V = init.resolve(spec.m)
    GQG = spec.G @ spec.Q @ spec.G.T
    per_step = np.empty(y.N)
    steps = []
    for n, yn in enumerate(y.values):
        x_pred, V_pred = predict(spec, x, V, GQG)
        eps, r, VHt = innovate(spec, x_pred, V_pred, float(yn), n + 1)
        K, x, V = update(x_pred, V_pred, VHt, eps, r)
        per_step[n] = step_loglik(eps, r)
        if keep_steps:
            steps.append(FilterStep(x_pred, V_pred, x, V, K, eps, r))
    per_step.setflags(write=False)
    return FilterOutput(tuple(steps), float(per_step.sum()), per_step)


def loglik(spec: ModelSpec, init: FilterInit, y: TimeSeries) -> float:
    return filter(spec, init, y, keep_steps=False).loglik


def brute_force_loglik(spec: ModelSpec, init: FilterInit, y: TimeSeries) -> float:
    """Joint-Gaussian log-density of (y_1..y_N) from propagated state moments.

    Independent of the filter recursion; intended for short series only.
    """
    N = y.N
    if N > 50:
        raise ValueError("brute-force likelihood is limited to N <= 50")
    x0, V0 = init.resolve(spec.m)
    F, H = spec.F, spec.H
    GQG = spec.G @ spec.Q @ spec.G.T
    means = np.empty(N)
    # state_cov[n] = Var(x_{n+1}); powers[d] = F^d
    state_cov = []
    mean = x0
    P = V0
    for n in range(N):
        mean = F @ mean
        P = F @ P @ F.T + GQG
        means[n] = H @ mean
        state_cov.append(P)
    powers = [np.eye(spec.m)]
    for _ in range(N - 1):
        powers.append(F @ powers[-1])
    S = np.empty((N, N))
    for a in range(N):
        for b in range(a + 1):
            # Cov(x_a, x_b) = F^(a-b) Var(x_b) for a >= b
            S[a, b] = S[b, a] = H @ powers[a - b] @ state_cov[b] @ H
        S[a, a] += spec.R
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        raise np.linalg.LinAlgError("joint covariance is singular")
    resid = y.values - means
    quad = float(resid @ np.linalg.solve(S, resid))
    return -0.5 * (N * LOG_2PI + logdet + quad)
