"""Domain types shared by the filter, the derivative recursion and the fitters.

All containers are frozen dataclasses. Array fields are copied on
construction and marked read-only so a built model can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_KAPPA = 1.0e4


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """A univariate series y_1..y_N."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 1:
            raise ValueError("time series must contain at least one observation")
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            raise ValueError(f"non-finite observation at index {int(bad[0])}")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def N(self) -> int:
        return int(self.values.shape[0])

    def __len__(self) -> int:
        return self.N


@dataclass(frozen=True)
class ParameterVector:
    """Working-scale parameters.

    Entries flagged in ``log_variance`` hold log-variances; the rest
    (AR coefficients) are used as-is.
    """

    theta: np.ndarray
    names: tuple = ()
    log_variance: Optional[np.ndarray] = None

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float).ravel()
        if th.size < 1:
            raise ValueError("parameter vector must have p >= 1 entries")
        if not np.all(np.isfinite(th)):
            raise ValueError("parameter vector has non-finite entries")
        names = tuple(self.names) if self.names else tuple(f"theta{j + 1}" for j in range(th.size))
        if len(names) != th.size:
            raise ValueError(f"{len(names)} names for {th.size} parameters")
        mask = np.ones(th.size, dtype=bool) if self.log_variance is None else np.asarray(self.log_variance, dtype=bool).ravel()
        if mask.size != th.size:
            raise ValueError("log_variance mask length does not match theta")
        object.__setattr__(self, "theta", _frozen(th))
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "log_variance", _frozen(mask, dtype=bool))

    @property
    def p(self) -> int:
        return int(self.theta.shape[0])

    @property
    def natural_scale(self) -> np.ndarray:
        out = self.theta.copy()
        out[self.log_variance] = np.exp(out[self.log_variance])
        return out

    @classmethod
    def from_natural(cls, values: Sequence[float], names=(), log_variance=None) -> "ParameterVector":
        nat = np.asarray(values, dtype=float).ravel()
        mask = np.ones(nat.size, dtype=bool) if log_variance is None else np.asarray(log_variance, dtype=bool)
        if np.any(nat[mask] <= 0):
            raise ValueError("variances must be strictly positive")
        th = nat.copy()
        th[mask] = np.log(nat[mask])
        return cls(th, names, mask)

    def with_theta(self, theta) -> "ParameterVector":
        return ParameterVector(theta, self.names, self.log_variance)


@dataclass(frozen=True)
class ModelSpec:
    """System matrices of a univariate linear Gaussian state-space model.

    Shapes: F (m, m), G (m, k), H (m,), Q (k, k), R scalar; first
    derivatives are stacked on a leading parameter axis (p, ...), second
    derivatives on two leading axes (p, p, ...).
    """

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: float
    dF: np.ndarray
    dQ: np.ndarray
    dR: np.ndarray
    d2F: np.ndarray
    d2Q: np.ndarray
    d2R: np.ndarray
    F_is_constant: bool = True
    G_is_constant: bool = True
    H_is_constant: bool = True
    param_names: tuple = ()

    def __post_init__(self):
        for name in ("F", "G", "Q", "dF", "dQ", "dR", "d2F", "d2Q", "d2R"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "H", _frozen(np.ravel(self.H)))
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "param_names", tuple(self.param_names))

    @property
    def m(self) -> int:
        return int(self.F.shape[0])

    @property
    def k(self) -> int:
        return int(self.Q.shape[0])

    @property
    def p(self) -> int:
        return int(self.dR.shape[0])

    @property
    def is_time_invariant_structure(self) -> bool:
        return self.F_is_constant and self.G_is_constant and self.H_is_constant


@dataclass(frozen=True)
class FilterInit:
    """Initial filtered state x_{0|0} ~ N(x0, V0).

    ``None`` means the default: zero mean and ``kappa * I`` covariance.
    """

    x0: Optional[np.ndarray] = None
    V0: Optional[np.ndarray] = None
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.x0 is not None:
            x0 = np.ravel(np.asarray(self.x0, dtype=float))
            if not np.all(np.isfinite(x0)):
                raise ValueError("x0 must be finite")
            object.__setattr__(self, "x0", _frozen(x0))
        if self.V0 is not None:
            V0 = np.atleast_2d(np.asarray(self.V0, dtype=float))
            if V0.shape[0] != V0.shape[1] or not np.allclose(V0, V0.T, atol=1e-12):
                raise ValueError("V0 must be a symmetric square matrix")
            if V0.size and np.linalg.eigvalsh(V0).min() < -1e-10 * max(1.0, np.abs(V0).max()):
                raise ValueError("V0 must be positive semidefinite")
            object.__setattr__(self, "V0", _frozen(V0))

    def resolve(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        x0 = np.zeros(m) if self.x0 is None else np.array(self.x0)
        V0 = self.kappa * np.eye(m) if self.V0 is None else np.array(self.V0)
        if x0.shape != (m,) or V0.shape != (m, m):
            raise ValueError(f"initial state has shape {x0.shape}/{V0.shape}, model needs m={m}")
        return x0, V0


@dataclass(frozen=True)
class FilterStep:
    x_pred: np.ndarray
    V_pred: np.ndarray
    x_filt: np.ndarray
    V_filt: np.ndarray
    gain: np.ndarray
    innovation: float
    innovation_var: float


def _is_symmetric(a, tol=1e-12) -> bool:
    return bool(np.allclose(a, np.swapaxes(a, -1, -2), rtol=0.0, atol=tol * max(1.0, float(np.abs(a).max(initial=0.0)))))


def validate_model(spec: ModelSpec) -> list[str]:
    """Return every violated invariant of ``spec`` as a message; empty if consistent."""
    problems: list[str] = []
    F, G, H, Q = spec.F, spec.G, spec.H, spec.Q
    if F.ndim != 2 or F.shape[0] != F.shape[1] or F.shape[0] < 1:
        return [f"F must be a non-empty square matrix, got shape {F.shape}"]
    m = F.shape[0]
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
        return [f"Q must be a non-empty square matrix, got shape {Q.shape}"]
    k = Q.shape[0]
    p = spec.dR.shape[0] if spec.dR.ndim == 1 else -1
    if p < 1:
        return [f"dR must be a vector of length p >= 1, got shape {spec.dR.shape}"]

    if G.shape != (m, k):
        problems.append(f"G has shape {G.shape}, expected {(m, k)}")
    if H.shape != (m,):
        problems.append(f"H has shape {H.shape}, expected {(m,)}")
    expected = {
        "dF": (p, m, m), "dQ": (p, k, k),
        "d2F": (p, p, m, m), "d2Q": (p, p, k, k), "d2R": (p, p),
    }
    for name, shape in expected.items():
        if getattr(spec, name).shape != shape:
            problems.append(f"{name} has shape {getattr(spec, name).shape}, expected {shape}")
    if problems:
        return problems

    for name in ("F", "G", "H", "Q", "dF", "dQ", "dR", "d2F", "d2Q", "d2R"):
        if not np.all(np.isfinite(getattr(spec, name))):
            problems.append(f"{name} has non-finite entries")
    if not np.isfinite(spec.R):
        problems.append("R is not finite")
    if problems:
        return problems

    if not _is_symmetric(Q):
        problems.append("Q is not symmetric")
    elif np.linalg.eigvalsh(Q).min() < -1e-12 * max(1.0, np.abs(Q).max()):
        problems.append("Q is not positive semidefinite")
    if spec.R < 0:
        problems.append(f"R = {spec.R} is negative")
    for j in range(p):
        if not _is_symmetric(spec.dQ[j]):
            problems.append(f"dQ[{j}] is not symmetric")
    for i in range(p):
        for j in range(p):
            if not _is_symmetric(spec.d2Q[i, j]):
                problems.append(f"d2Q[{i}][{j}] is not symmetric")
    if not np.array_equal(spec.d2F, np.swapaxes(spec.d2F, 0, 1)):
        problems.append("d2F is not symmetric in its parameter indices")
    if not np.array_equal(spec.d2Q, np.swapaxes(spec.d2Q, 0, 1)):
        problems.append("d2Q is not symmetric in its parameter indices")
    if not np.array_equal(spec.d2R, spec.d2R.T):
        problems.append("d2R is not symmetric")
    if spec.F_is_constant and (np.any(spec.dF) or np.any(spec.d2F)):
        problems.append("F_is_constant is set but dF or d2F is nonzero")
    if not (spec.G_is_constant and spec.H_is_constant):
        problems.append("parameter-dependent G or H is not supported")
    if spec.param_names and len(spec.param_names) != p:
        problems.append(f"{len(spec.param_names)} parameter names for p={p}")
    return problems
