"""Differential Kalman filter.

Propagates the first (and optionally second) parameter derivatives of the
predicted/filtered state and covariance alongside the Kalman recursion, and
accumulates the exact gradient and Hessian of the log-likelihood.

Layout: first derivatives carry a leading parameter axis, e.g. ``dV`` has
shape (p, m, m); second derivatives carry two, e.g. ``d2V`` is (p, p, m, m).
The full (i, j) block is stored rather than the upper triangle so that the
recursion is plain broadcasting; p and m are small for all supported models.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FilterInit, ModelSpec, TimeSeries
from .kalman import FilterDivergenceError, check_model, innovate, predict, step_loglik, symmetrize, update


@dataclass(frozen=True)
class LikelihoodEvaluation:
    loglik: float
    gradient: np.ndarray
    scores: np.ndarray
    hessian: Optional[np.ndarray] = None
    hessian_asymmetry: float = 0.0

    @property
    def N(self) -> int:
        return int(self.scores.shape[0])


def _swap_ij(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, 0, 1)


def _check_finite(n: int, names, **arrays) -> None:
    for label, arr in arrays.items():
        bad = ~np.isfinite(arr)
        if bad.any():
            idx = np.argwhere(bad)[0]
            comp = ", ".join(str(names[i]) for i in idx)
            raise FilterDivergenceError(n, f"non-finite {label} for parameter(s) {comp}")


def _run(spec: ModelSpec, init: FilterInit, y: TimeSeries, second_order: bool) -> LikelihoodEvaluation:
    check_model(spec)
    F, G, H = spec.F, spec.G, spec.H
    p, m = spec.p, spec.m
    names = spec.param_names or tuple(f"theta{j + 1}" for j in range(p))
    with_dF = not spec.F_is_constant
    dF, d2F = spec.dF, spec.d2F

    GQG = G @ spec.Q @ G.T
    GdQG = G @ spec.dQ @ G.T
    Gd2QG = G @ spec.d2Q @ G.T

    x, V = init.resolve(m)
    # the initial state does not depend on theta
    dx = np.zeros((p, m))
    dV = np.zeros((p, m, m))
    if second_order:
        d2x = np.zeros((p, p, m))
        d2V = np.zeros((p, p, m, m))
        hess = np.zeros((p, p))

    N = y.N
    scores = np.empty((N, p))
    per_step = np.empty(N)
    for n in range(N):
        step = n + 1
        yn = float(y.values[n])

        # one-step-ahead prediction
        x_prev, V_prev = x, V
        x_pred, V_pred = predict(spec, x, V, GQG)
        dx_pred = dx @ F.T
        dV_pred = F @ dV @ F.T + GdQG
        if with_dF:
            dx_pred = dx_pred + dF @ x_prev
            dFVFt = dF @ V_prev @ F.T
            dV_pred = dV_pred + dFVFt + np.swapaxes(dFVFt, 1, 2)
        dV_pred = symmetrize(dV_pred)

        if second_order:
            d2x_pred = d2x @ F.T
            d2V_pred = F @ d2V @ F.T + Gd2QG
            if with_dF:
                A = np.einsum("iab,jb->ija", dF, dx)
                d2x_pred = d2x_pred + A + _swap_ij(A) + d2F @ x_prev
                B = np.einsum("iab,jbc,dc->ijad", dF, dV, F)
                B = B + np.swapaxes(B, 2, 3)
                C = np.einsum("iab,bc,jdc->ijad", dF, V_prev, dF)
                D = d2F @ V_prev @ F.T
                d2V_pred = d2V_pred + B + _swap_ij(B) + C + _swap_ij(C) + D + np.swapaxes(D, 2, 3)
            d2V_pred = symmetrize(d2V_pred)

        # innovation and its derivatives
        eps, r, VHt = innovate(spec, x_pred, V_pred, yn, step)
        d_eps = -(dx_pred @ H)
        dVHt = dV_pred @ H
        d_r = dVHt @ H + spec.dR
        _check_finite(step, names, d_eps=d_eps, d_r=d_r)

        inv_r = 1.0 / r
        ratio = eps * inv_r
        per_step[n] = step_loglik(eps, r)
        score = -0.5 * (d_r * inv_r + 2.0 * ratio * d_eps - ratio * ratio * d_r)
        scores[n] = score

        # filter
        K, x, V = update(x_pred, V_pred, VHt, eps, r)
        dK = dVHt * inv_r - np.outer(d_r, VHt) * inv_r**2
        dx_new = dx_pred + d_eps[:, None] * K + dK * eps
        dV_new = symmetrize(
            dV_pred
            - np.einsum("ia,b->iab", dK, VHt)
            - np.einsum("a,ib->iab", K, dVHt)
        )

        if second_order:
            d2_eps = -(d2x_pred @ H)
            d2VHt = d2V_pred @ H
            d2_r = d2VHt @ H + spec.d2R
            _check_finite(step, names, d2_eps=d2_eps, d2_r=d2_r)

            outer_r = np.outer(d_r, d_r)
            outer_e = np.outer(d_eps, d_eps)
            cross = np.outer(d_r, d_eps)
            cross = cross + cross.T
            hess += -0.5 * (
                (d2_r + 2.0 * outer_e + 2.0 * eps * d2_eps) * inv_r
                - (outer_r + 2.0 * eps * cross + eps * eps * d2_r) * inv_r**2
                + 2.0 * eps * eps * outer_r * inv_r**3
            )

            T = np.einsum("ia,j->ija", dVHt, d_r)
            d2K = (
                d2VHt * inv_r
                - (T + _swap_ij(T)) * inv_r**2
                - np.einsum("a,ij->ija", VHt, d2_r) * inv_r**2
                + 2.0 * np.einsum("a,ij->ija", VHt, outer_r) * inv_r**3
            )
            U = np.einsum("ia,j->ija", dK, d_eps)
            d2x = d2x_pred + U + _swap_ij(U) + np.einsum("a,ij->ija", K, d2_eps) + d2K * eps
            W = np.einsum("ia,jb->ijab", dK, dVHt)
            d2V = symmetrize(
                d2V_pred
                - np.einsum("ija,b->ijab", d2K, VHt)
                - W
                - _swap_ij(W)
                - np.einsum("a,ijb->ijab", K, d2VHt)
            )

        dx, dV = dx_new, dV_new

    total = float(per_step.sum())
    gradient = scores.sum(axis=0)
    scores.setflags(write=False)
    if not second_order:
        return LikelihoodEvaluation(total, gradient, scores)
    asym = float(np.abs(hess - hess.T).max())
    return LikelihoodEvaluation(total, gradient, scores, 0.5 * (hess + hess.T), asym)


def gradient_filter(spec: ModelSpec, init: FilterInit, y: TimeSeries) -> LikelihoodEvaluation:
    """Log-likelihood, gradient and per-observation scores (no Hessian)."""
    return _run(spec, init, y, second_order=False)


def hessian_filter(spec: ModelSpec, init: FilterInit, y: TimeSeries) -> LikelihoodEvaluation:
    """Log-likelihood, gradient, scores and the exact Hessian."""
    return _run(spec, init, y, second_order=True)
