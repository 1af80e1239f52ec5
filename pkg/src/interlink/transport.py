"""Entropic optimal transport between two embedding clouds.

The Sinkhorn iteration runs in the log domain on a cost matrix normalized by
its maximum entry, since exp(-lambda * cost) underflows for the inverse
temperatures of interest (lambda around 100) on unnormalized embeddings.
Reported transport costs are always in original cost units.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError, NumericalError


def _logsumexp(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


@dataclass
class TransportState:
    """Converged (or capped) Sinkhorn state for one cost matrix."""

    pi1: np.ndarray
    pi2: np.ndarray
    cost: np.ndarray  # original, unnormalized cost
    plan: np.ndarray
    log_u: np.ndarray  # scalings w.r.t. the normalized kernel
    log_v: np.ndarray
    lam: float
    cost_scale: float  # max cost entry used for normalization
    iterations: int
    marginal_violation: float

    @property
    def u(self) -> np.ndarray:
        return np.exp(self.log_u)

    @property
    def v(self) -> np.ndarray:
        return np.exp(self.log_v)


def cost_matrix(a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (n1, n2)."""
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if a1.ndim != 2 or a2.ndim != 2 or a1.shape[1] != a2.shape[1]:
        raise DataError(
            f"incompatible embedding shapes {a1.shape} and {a2.shape}"
        )
    return cdist(a1, a2, metric="sqeuclidean")


def sinkhorn(
    pi1: np.ndarray,
    pi2: np.ndarray,
    cost: np.ndarray,
    lam: float,
    max_iters: int = 1000,
    tol: float = 1e-6,
    warm_start: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> TransportState:
    """Entropic transport plan diag(u) K diag(v) with K = exp(-lam * cost).

    ``lam`` applies to the cost normalized by its maximum entry.  Updates use
    log-sum-exp; iteration stops when the worst marginal violation drops
    below ``tol`` or after ``max_iters`` rounds.  ``warm_start`` takes the
    (log_u, log_v) of a previous state with the same shapes.
    """
    pi1 = np.asarray(pi1, dtype=float)
    pi2 = np.asarray(pi2, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if lam <= 0:
        raise DataError(f"lambda must be > 0, got {lam}")
    if not np.all(np.isfinite(cost)):
        raise NumericalError("cost matrix contains non-finite entries")
    if cost.shape != (len(pi1), len(pi2)):
        raise DataError(
            f"cost shape {cost.shape} does not match marginals "
            f"({len(pi1)}, {len(pi2)})"
        )
    if np.any(pi1 < 0) or np.any(pi2 < 0):
        raise DataError("marginals must be nonnegative")
    if abs(pi1.sum() - 1.0) > 1e-9 or abs(pi2.sum() - 1.0) > 1e-9:
        raise DataError("marginals must each sum to 1")

    cost_scale = float(cost.max())
    scaled = cost / cost_scale if cost_scale > 0 else cost
    with np.errstate(divide="ignore"):
        log_pi1 = np.log(pi1)
        log_pi2 = np.log(pi2)

    # Cold starts anneal the inverse temperature upward (doubling schedule),
    # carrying the dual potentials between stages; plain iteration at large
    # lambda converges impractically slowly.  Warm starts are assumed close
    # already and run at the target lambda directly.
    if warm_start is not None:
        schedule = [lam]
        f = np.asarray(warm_start[0], dtype=float) / lam
        g = np.asarray(warm_start[1], dtype=float) / lam
    else:
        schedule = []
        stage_lam = lam
        while stage_lam > 2.0:
            schedule.append(stage_lam)
            stage_lam /= 2.0
        schedule.append(stage_lam)
        schedule.reverse()
        f = np.zeros(len(pi1))
        g = np.zeros(len(pi2))

    violation = np.inf
    iterations = 0
    log_u = f * schedule[-1]
    log_v = g * schedule[-1]
    log_k = -schedule[-1] * scaled
    for stage, stage_lam in enumerate(schedule):
        final = stage == len(schedule) - 1
        stage_tol = tol if final else max(tol, 1e-3)
        log_k = -stage_lam * scaled
        log_u = f * stage_lam
        log_v = g * stage_lam
        while iterations < max_iters:
            iterations += 1
            log_u = log_pi1 - _logsumexp(log_k + log_v[None, :], axis=1)
            log_v = log_pi2 - _logsumexp(log_k + log_u[:, None], axis=0)
            # Column marginals are exact right after the v-update; only the
            # rows can be off.
            row_sums = np.exp(
                _logsumexp(log_u[:, None] + log_k + log_v[None, :], axis=1)
            )
            violation = float(np.max(np.abs(row_sums - pi1)))
            if violation < stage_tol:
                break
        f = log_u / stage_lam
        g = log_v / stage_lam

    plan = np.exp(log_u[:, None] + log_k + log_v[None, :])
    if not np.all(np.isfinite(plan)):
        raise NumericalError("Sinkhorn produced a non-finite transport plan")
    return TransportState(
        pi1=pi1,
        pi2=pi2,
        cost=cost,
        plan=plan,
        log_u=log_u,
        log_v=log_v,
        lam=lam,
        cost_scale=cost_scale,
        iterations=iterations,
        marginal_violation=violation,
    )


def transport_cost(state: TransportState) -> float:
    """Linear transport cost <P, C> in original cost units."""
    if state.plan.shape != state.cost.shape:
        raise DataError("plan and cost shapes differ")
    return float(np.sum(state.plan * state.cost))


def entropic_objective(state: TransportState) -> float:
    """<P, C> plus the entropic term, in original cost units.

    The effective inverse temperature on the unnormalized cost is
    lam / cost_scale, because the iteration ran on cost / cost_scale.
    """
    plan = state.plan
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = np.where(plan > 0, plan * np.log(plan), 0.0).sum()
    lam_effective = state.lam / state.cost_scale if state.cost_scale > 0 else state.lam
    return transport_cost(state) + float(ent) / lam_effective


def ot_embedding_gradient(
    plan: np.ndarray,
    a1: np.ndarray,
    a2: np.ndarray,
    rows1: Optional[Sequence[int]] = None,
    rows2: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of <P, C(A1, A2)> with the plan held fixed.

    d<P,C>/da1_i = 2 sum_j P_ij (a1_i - a2_j), and symmetrically for a2.
    Returns gradient rows for the requested indices only (all rows when a
    selection is None).
    """
    plan = np.asarray(plan, dtype=float)
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    if plan.shape != (a1.shape[0], a2.shape[0]):
        raise DataError(
            f"plan shape {plan.shape} does not match clouds "
            f"({a1.shape[0]}, {a2.shape[0]})"
        )
    idx1 = np.arange(a1.shape[0]) if rows1 is None else np.asarray(rows1, dtype=int)
    idx2 = np.arange(a2.shape[0]) if rows2 is None else np.asarray(rows2, dtype=int)
    if len(idx1) and (idx1.min() < 0 or idx1.max() >= a1.shape[0]):
        raise DataError("row index out of range for domain 1")
    if len(idx2) and (idx2.min() < 0 or idx2.max() >= a2.shape[0]):
        raise DataError("row index out of range for domain 2")

    p_rows = plan[idx1]  # (b1, n2)
    g1 = 2.0 * (p_rows.sum(axis=1)[:, None] * a1[idx1] - p_rows @ a2)
    p_cols = plan[:, idx2]  # (n1, b2)
    g2 = 2.0 * (p_cols.sum(axis=0)[:, None] * a2[idx2] - p_cols.T @ a1)
    return g1, g2


def write_plan_tsv(
    state: TransportState,
    names1: Sequence[str],
    names2: Sequence[str],
    path: str,
) -> None:
    """Dump the plan with row/column entity names for diagnostics."""
    plan = state.plan
    if plan.shape != (len(names1), len(names2)):
        raise DataError("plan shape does not match name lists")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t" + "\t".join(names2) + "\n")
        for name, row in zip(names1, plan):
            fh.write(name + "\t" + "\t".join(f"{x:.10e}" for x in row) + "\n")
