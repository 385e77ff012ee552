"""Builders for the trend, seasonal and seasonal+AR models.

Every builder takes a working-scale parameter vector (log-variances, then
raw AR coefficients) and returns a :class:`ModelSpec` carrying the first
and second derivatives of F, Q and R with respect to that vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FilterInit, ModelSpec, ParameterVector, TimeSeries


@dataclass(frozen=True)
class TrendConfig:
    order: int = 1

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"trend order must be 1 or 2, got {self.order}")

    @property
    def param_names(self) -> tuple:
        return ("log_tau2", "log_sigma2")

    @property
    def log_variance(self) -> np.ndarray:
        return np.ones(2, dtype=bool)

    @property
    def label(self) -> tuple:
        return (self.order, 0, 0)

    def build(self, theta) -> ModelSpec:
        return build_trend(self, theta)


@dataclass(frozen=True)
class SeasonalConfig:
    trend_order: int = 2
    period: int = 12
    seasonal_order: int = 1

    def __post_init__(self):
        if self.trend_order not in (1, 2):
            raise ValueError(f"trend order must be 1 or 2, got {self.trend_order}")
        if self.period < 2:
            raise ValueError(f"seasonal period must be >= 2, got {self.period}")
        if self.seasonal_order != 1:
            raise ValueError("only seasonal order 1 is supported")

    @property
    def state_dim(self) -> int:
        return self.trend_order + self.period - 1

    @property
    def param_names(self) -> tuple:
        return ("log_tau1_2", "log_tau2_2", "log_sigma2")

    @property
    def log_variance(self) -> np.ndarray:
        return np.ones(3, dtype=bool)

    @property
    def label(self) -> tuple:
        return (self.trend_order, 1, 0)

    def build(self, theta) -> ModelSpec:
        return build_seasonal(self, theta)


@dataclass(frozen=True)
class SeasonalArConfig:
    trend_order: int = 2
    period: int = 12
    ar_order: int = 1
    seasonal_order: int = 1

    def __post_init__(self):
        SeasonalConfig(self.trend_order, self.period, self.seasonal_order)
        if self.ar_order < 1:
            raise ValueError(f"AR order must be >= 1, got {self.ar_order}")

    @property
    def state_dim(self) -> int:
        return self.trend_order + self.period - 1 + self.ar_order

    @property
    def param_names(self) -> tuple:
        return ("log_tau1_2", "log_tau2_2", "log_tau3_2", "log_sigma2") + tuple(
            f"a{i + 1}" for i in range(self.ar_order)
        )

    @property
    def log_variance(self) -> np.ndarray:
        return np.r_[np.ones(4, dtype=bool), np.zeros(self.ar_order, dtype=bool)]

    @property
    def label(self) -> tuple:
        return (self.trend_order, 1, self.ar_order)

    def build(self, theta) -> ModelSpec:
        return build_seasonal_ar(self, theta)


def parameter_vector(cfg, theta) -> ParameterVector:
    """Wrap raw working-scale values with the names and scale flags of ``cfg``."""
    if isinstance(theta, ParameterVector):
        theta = theta.theta
    return ParameterVector(theta, cfg.param_names, cfg.log_variance)


def _theta_array(theta, p: int) -> np.ndarray:
    th = theta.theta if isinstance(theta, ParameterVector) else np.asarray(theta, dtype=float).ravel()
    if th.shape != (p,):
        raise ValueError(f"expected {p} parameters, got {th.size}")
    return th


def _trend_block(order: int) -> np.ndarray:
    return np.array([[1.0]]) if order == 1 else np.array([[2.0, -1.0], [1.0, 0.0]])


def _companion(first_row) -> np.ndarray:
    d = len(first_row)
    A = np.zeros((d, d))
    A[0, :] = first_row
    A[np.arange(1, d), np.arange(d - 1)] = 1.0
    return A


def _block_diag(*blocks) -> np.ndarray:
    m = sum(b.shape[0] for b in blocks)
    out = np.zeros((m, m))
    i = 0
    for b in blocks:
        out[i:i + b.shape[0], i:i + b.shape[0]] = b
        i += b.shape[0]
    return out


def _variance_derivatives(variances, p: int):
    """dQ/d2Q for Q = diag(exp(theta_0..theta_{k-1})) with those log-variances first in theta."""
    k = len(variances)
    dQ = np.zeros((p, k, k))
    d2Q = np.zeros((p, p, k, k))
    for j, v in enumerate(variances):
        dQ[j, j, j] = v
        d2Q[j, j, j, j] = v
    return dQ, d2Q


def _assemble(F, G, H, variances, sigma2, sigma_index, p, dF=None, names=()) -> ModelSpec:
    m = F.shape[0]
    dQ, d2Q = _variance_derivatives(variances, p)
    dR = np.zeros(p)
    d2R = np.zeros((p, p))
    dR[sigma_index] = sigma2
    d2R[sigma_index, sigma_index] = sigma2
    constant_F = dF is None
    if dF is None:
        dF = np.zeros((p, m, m))
    return ModelSpec(
        F=F, G=G, H=H, Q=np.diag(variances), R=sigma2,
        dF=dF, dQ=dQ, dR=dR,
        d2F=np.zeros((p, p, m, m)), d2Q=d2Q, d2R=d2R,
        F_is_constant=constant_F, param_names=names,
    )


def build_trend(cfg: TrendConfig, theta) -> ModelSpec:
    """Random walk (order 1) or integrated random walk (order 2) plus noise.

    theta = (log tau^2, log sigma^2).
    """
    th = _theta_array(theta, 2)
    tau2, sigma2 = np.exp(th)
    F = _trend_block(cfg.order)
    G = np.zeros((cfg.order, 1))
    G[0, 0] = 1.0
    H = np.zeros(cfg.order)
    H[0] = 1.0
    return _assemble(F, G, H, [tau2], sigma2, 1, 2, names=cfg.param_names)


def _seasonal_blocks(trend_order: int, period: int):
    F_trend = _trend_block(trend_order)
    F_seas = _companion(-np.ones(period - 1))
    return F_trend, F_seas


def build_seasonal(cfg: SeasonalConfig, theta) -> ModelSpec:
    """Trend plus dummy seasonal plus noise; theta = (log tau1^2, log tau2^2, log sigma^2)."""
    th = _theta_array(theta, 3)
    tau1, tau2, sigma2 = np.exp(th)
    F_trend, F_seas = _seasonal_blocks(cfg.trend_order, cfg.period)
    F = _block_diag(F_trend, F_seas)
    m1 = cfg.trend_order
    G = np.zeros((cfg.state_dim, 2))
    G[0, 0] = 1.0
    G[m1, 1] = 1.0
    H = np.zeros(cfg.state_dim)
    H[[0, m1]] = 1.0
    return _assemble(F, G, H, [tau1, tau2], sigma2, 2, 3, names=cfg.param_names)


def build_seasonal_ar(cfg: SeasonalArConfig, theta) -> ModelSpec:
    """Trend, seasonal and stationary AR(m3) components plus noise.

    theta = (log tau1^2, log tau2^2, log tau3^2, log sigma^2, a_1, ..., a_m3).
    Only F depends on the AR coefficients; dF/da_i has a single unit entry
    in the first row of the AR block.
    """
    m3 = cfg.ar_order
    p = 4 + m3
    th = _theta_array(theta, p)
    tau1, tau2, tau3, sigma2 = np.exp(th[:4])
    ar = th[4:]
    F_trend, F_seas = _seasonal_blocks(cfg.trend_order, cfg.period)
    F = _block_diag(F_trend, F_seas, _companion(ar))
    m = cfg.state_dim
    m1 = cfg.trend_order
    start = m1 + cfg.period - 1
    G = np.zeros((m, 3))
    G[0, 0] = 1.0
    G[m1, 1] = 1.0
    G[start, 2] = 1.0
    H = np.zeros(m)
    H[[0, m1, start]] = 1.0
    dF = np.zeros((p, m, m))
    for i in range(m3):
        dF[4 + i, start, start + i] = 1.0
    return _assemble(F, G, H, [tau1, tau2, tau3], sigma2, 3, p, dF=dF, names=cfg.param_names)


def ar_root_moduli(coefs) -> np.ndarray:
    """Moduli of the eigenvalues of the AR companion matrix (all < 1 iff stationary)."""
    coefs = np.ravel(np.asarray(coefs, dtype=float))
    if coefs.size == 0:
        return np.zeros(0)
    return np.sort(np.abs(np.linalg.eigvals(_companion(coefs))))[::-1]


def _psd_sqrt(S: np.ndarray, what: str) -> np.ndarray:
    S = np.atleast_2d(S)
    w, U = np.linalg.eigh(0.5 * (S + S.T))
    if w.size and w.min() < -1e-10 * max(1.0, np.abs(w).max()):
        raise ValueError(f"{what} has a negative eigenvalue ({w.min():.3g})")
    return U * np.sqrt(np.clip(w, 0.0, None))


def simulate(spec: ModelSpec, init: FilterInit, N: int, seed: int) -> TimeSeries:
    """Draw one path of length ``N`` from the model; deterministic given ``seed``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if spec.R < 0:
        raise ValueError(f"R = {spec.R} is negative")
    rng = np.random.default_rng(seed)
    x0, V0 = init.resolve(spec.m)
    root_V0 = _psd_sqrt(V0, "V0")
    root_Q = _psd_sqrt(spec.Q, "Q")
    sd_R = np.sqrt(spec.R)
    x = x0 + root_V0 @ rng.standard_normal(spec.m)
    y = np.empty(N)
    for n in range(N):
        x = spec.F @ x + spec.G @ (root_Q @ rng.standard_normal(spec.k))
        y[n] = spec.H @ x + sd_R * rng.standard_normal()
    return TimeSeries(y)
