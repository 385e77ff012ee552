"""AIC and GIC/TIC from per-observation scores and the total Hessian.

I is the average outer product of the per-observation scores and J is the
negative Hessian divided by N. The bias-correction term tr(I J^-1)
replaces the parameter count used by AIC.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

MAX_CONDITION = 1e12


class SingularInformationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class CriteriaReport:
    loglik: float
    p: int
    I_hat: np.ndarray
    J_hat: np.ndarray
    b_gic: float
    gic: float
    aic: float
    j_condition: float = 1.0

    @property
    def singular(self) -> bool:
        return not math.isfinite(self.b_gic)


def fisher_information(scores) -> np.ndarray:
    """(1/N) sum_n s_n s_n^T over the rows of an N x p score matrix."""
    S = np.atleast_2d(np.asarray(scores, dtype=float))
    if S.shape[0] < 1:
        raise ValueError("need at least one score row")
    if not np.all(np.isfinite(S)):
        raise ValueError("scores contain non-finite values")
    return S.T @ S / S.shape[0]


def neg_hessian_estimate(hessian, N: int) -> np.ndarray:
    """J = -(1/N) * hessian, where ``hessian`` is the total over all observations."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return -np.asarray(hessian, dtype=float) / N


def bias_correction(I_hat, J_hat) -> tuple[float, float]:
    """Return (tr(I J^-1), cond(J)); raises SingularInformationError for singular J."""
    I_hat = np.asarray(I_hat, dtype=float)
    J_hat = np.asarray(J_hat, dtype=float)
    sym = 0.5 * (J_hat + J_hat.T)
    eig = np.abs(np.linalg.eigvalsh(sym))
    cond = math.inf if eig.min() == 0.0 else float(eig.max() / eig.min())
    if not cond <= MAX_CONDITION:
        raise SingularInformationError(f"J is singular or ill-conditioned (condition number {cond:.3g})")
    # J need not be definite away from the MLE; LU handles both cases
    solved = scipy.linalg.solve(sym, I_hat, assume_a="sym")
    return float(np.trace(solved)), cond


def gic(loglik: float, I_hat, J_hat) -> CriteriaReport:
    """GIC = -2 loglik + 2 tr(I J^-1); AIC alongside.

    A singular J does not raise: the report carries ``b_gic = gic = nan``.
    """
    I_hat = np.array(I_hat, dtype=float)
    J_hat = np.array(J_hat, dtype=float)
    p = I_hat.shape[0]
    aic = -2.0 * loglik + 2.0 * p
    try:
        b, cond = bias_correction(I_hat, J_hat)
    except SingularInformationError:
        eig = np.abs(np.linalg.eigvalsh(0.5 * (J_hat + J_hat.T)))
        cond = math.inf if eig.min() == 0.0 else float(eig.max() / eig.min())
        return CriteriaReport(loglik, p, I_hat, J_hat, math.nan, math.nan, aic, cond)
    return CriteriaReport(loglik, p, I_hat, J_hat, b, -2.0 * loglik + 2.0 * b, aic, cond)


def criteria_from_evaluation(evaluation) -> CriteriaReport:
    """Build the report from a full LikelihoodEvaluation (hessian required)."""
    if evaluation.hessian is None:
        raise ValueError("evaluation has no Hessian; run hessian_filter")
    I_hat = fisher_information(evaluation.scores)
    J_hat = neg_hessian_estimate(evaluation.hessian, evaluation.N)
    return gic(evaluation.loglik, I_hat, J_hat)


@dataclass(frozen=True)
class ComparisonRow:
    rank: int
    label: str
    loglik: float
    p: int
    b_gic: float
    aic: float
    gic: float


def _gic_key(item):
    label, rep = item
    g = rep.gic if math.isfinite(rep.gic) else math.inf
    return (g, rep.aic, label)


def compare_models(reports: Sequence[tuple[str, CriteriaReport]]) -> list[ComparisonRow]:
    """Rank labelled reports by GIC, then AIC, then label. Undefined GIC sorts last."""
    if not reports:
        raise ValueError("need at least one report")
    ordered = sorted(reports, key=_gic_key)
    return [
        ComparisonRow(rank, label, rep.loglik, rep.p, rep.b_gic, rep.aic, rep.gic)
        for rank, (label, rep) in enumerate(ordered, start=1)
    ]


def format_table(rows: Sequence[ComparisonRow]) -> str:
    header = f"{'rank':>4}  {'model':<16} {'log-lik':>12} {'b_AIC':>5} {'b_GIC':>9} {'AIC':>12} {'GIC':>12}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.rank:>4}  {r.label:<16} {r.loglik:>12.4f} {r.p:>5d} {r.b_gic:>9.4f} {r.aic:>12.4f} {r.gic:>12.4f}"
        )
    return "\n".join(lines)
