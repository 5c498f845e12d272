"""Detector family: exhaustive ML, adaptive S-DF / P-DF, and P-DF with
constellation constraints (P-DFCC).

Operation counting
------------------
``op_count`` tallies complex multiplications of the canonical efficient
implementation:

* applying a filter of length L costs L;
* slicing and candidate ordering cost nothing (threshold comparisons);
* one reliability check costs 1 (the squared distance to the sliced point);
* one ML metric ||r - H s||^2 costs n_rx*n_users + n_rx.

P-DFCC skips the metric stage entirely when every user is reliable (the single
candidate is already the P-DF decision), so its tally then exceeds P-DF's by
the reliability checks alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constellation import (
    Constellation,
    build_candidate_list,
    check_reliability,
)

__all__ = [
    "DetectionResult",
    "ml_detect",
    "compute_order",
    "sdf_detect",
    "pdf_detect",
    "pdfcc_detect",
    "metric_ops",
    "ML_SEARCH_CAP",
]

ML_SEARCH_CAP = 1 << 20


@dataclass(frozen=True)
class DetectionResult:
    """Per-vector detector output.

    ``decisions`` and ``soft_outputs`` are indexed by user; ``gamma`` is the
    number of candidate vectors the decision was selected from; ``first_pass``
    carries the stage-1 decisions of parallel feedback detectors (None for the
    others).
    """

    decisions: np.ndarray
    soft_outputs: np.ndarray
    gamma: int
    op_count: int
    first_pass: np.ndarray | None = None


def metric_ops(n_rx: int, n_users: int) -> int:
    """Complex multiplications of one Euclidean metric ||r - H s||^2."""
    return n_rx * n_users + n_rx


@lru_cache(maxsize=8)
def _full_grid(const_name: str, const_size: int, n_users: int) -> np.ndarray:
    """All alphabet-index vectors in lexicographic order, shape (C**K, K)."""
    total = const_size**n_users
    g = np.arange(total)
    shifts = const_size ** np.arange(n_users - 1, -1, -1)
    return ((g[:, None] // shifts) % const_size).astype(np.int64)


def _slice_many(u: np.ndarray, constellation: Constellation) -> np.ndarray:
    """Nearest-point indices for a vector of soft estimates."""
    return np.argmin(np.abs(u[:, None] - constellation.points[None, :]), axis=1)


def ml_detect(
    r: np.ndarray, h_hat: np.ndarray, constellation: Constellation, n_users: int
) -> DetectionResult:
    """Exhaustive minimum-distance search over all |X|**K symbol vectors."""
    size = constellation.size**n_users
    if size > ML_SEARCH_CAP:
        raise ValueError(
            f"|X|^K = {size} exceeds the exhaustive search cap {ML_SEARCH_CAP}"
        )
    grid = _full_grid(constellation.name, constellation.size, n_users)
    cands = constellation.points[grid]  # (size, K)
    diff = r[None, :] - cands @ h_hat.T
    metrics = np.einsum("ij,ij->i", diff, diff.conj()).real
    best = int(np.argmin(metrics))
    decisions = cands[best].copy()
    return DetectionResult(
        decisions=decisions,
        soft_outputs=decisions.copy(),
        gamma=size,
        op_count=size * metric_ops(h_hat.shape[0], n_users),
    )


def compute_order(h_hat: np.ndarray) -> np.ndarray:
    """Detection order: users sorted by non-increasing column norm, stable."""
    norms = np.linalg.norm(h_hat, axis=0)
    return np.argsort(-norms, kind="stable")


def sdf_detect(r, states, order, constellation: Constellation) -> DetectionResult:
    """Successive decision feedback along the given detection order.

    ``states[j]`` is the filter for the j-th detected user and must have a
    backward section of length j.
    """
    n_users = len(states)
    n_rx = r.size
    decisions = np.zeros(n_users, dtype=complex)
    soft = np.zeros(n_users, dtype=complex)
    fed = np.zeros(n_users - 1, dtype=complex) if n_users > 1 else None
    ops = 0
    for j, user in enumerate(order):
        state = states[j]
        if state.dim != n_rx + j:
            raise ValueError(
                f"state {j} has dim {state.dim}, expected {n_rx + j} for S-DF"
            )
        x = r if j == 0 else np.concatenate([r, fed[:j]])
        u = complex(state.weights.conj() @ x)
        ops += state.dim
        soft[user] = u
        decisions[user] = constellation.points[_nearest_index_scalar(u, constellation)]
        if j < n_users - 1:
            fed[j] = decisions[user]
    return DetectionResult(decisions, soft, 1, ops)


def _nearest_index_scalar(u: complex, constellation: Constellation) -> int:
    return int(np.argmin(np.abs(constellation.points - u)))


def _pdf_pass(r, states, constellation: Constellation):
    """Two-stage parallel pass: forward-only slicing, then joint cancellation.

    Returns (soft outputs, decisions, stage-1 decisions, per-user regressors,
    op count).
    """
    n_users = len(states)
    n_rx = r.size
    expected = n_rx + n_users - 1
    weights = np.zeros((n_users, expected), dtype=complex)
    for k, state in enumerate(states):
        if state.dim != expected:
            raise ValueError(
                f"state {k} has dim {state.dim}, expected {expected} for P-DF"
            )
        weights[k] = state.weights
    u1 = weights[:, :n_rx].conj() @ r
    idx1 = _slice_many(u1, constellation)
    stage1 = constellation.points[idx1]
    regressors = np.empty((n_users, expected), dtype=complex)
    regressors[:, :n_rx] = r
    for k in range(n_users):
        regressors[k, n_rx:] = np.delete(stage1, k)
    u = np.einsum("kl,kl->k", weights.conj(), regressors)
    idx = _slice_many(u, constellation)
    decisions = constellation.points[idx]
    ops = n_users * n_rx + n_users * expected
    return u, decisions, stage1, regressors, ops


def pdf_detect(r, states, constellation: Constellation) -> DetectionResult:
    """Parallel decision feedback: slice forward outputs, cancel, slice again."""
    u, decisions, stage1, _, ops = _pdf_pass(r, states, constellation)
    return DetectionResult(decisions.copy(), u, 1, ops, first_pass=stage1.copy())


def _cap_lists(lists: list[np.ndarray], gamma_cap: int) -> list[np.ndarray]:
    """Drop farthest candidates from the largest lists until the product fits."""
    sizes = [len(lst) for lst in lists]
    gamma = int(np.prod(sizes))
    while gamma > gamma_cap:
        k = int(np.argmax(sizes))
        if sizes[k] <= 1:
            break
        lists[k] = lists[k][: sizes[k] - 1]
        sizes[k] -= 1
        gamma = int(np.prod(sizes))
    return lists


def candidate_matrix(lists: list[np.ndarray]) -> np.ndarray:
    """All cross-product symbol vectors in list order, shape (Gamma, K).

    Row 0 combines every user's first (nearest) candidate, so the plain P-DF
    decision vector always leads the enumeration.
    """
    grids = np.meshgrid(*lists, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def pdfcc_detect(
    r,
    states,
    h_hat,
    constellation: Constellation,
    d_th: float,
    tau_max: int = 4,
    gamma_cap: int = 4096,
    refine_feedback: bool = False,
) -> DetectionResult:
    """P-DF refined by constellation constraints and ML candidate selection.

    Soft outputs failing the reliability test spawn per-user candidate lists;
    the decision is the minimum-distance vector over their cross product.
    ``refine_feedback`` optionally re-runs the cancellation stage with the
    selected vector as feedback before the final slicing.
    """
    u, pdf_dec, stage1, regressors, ops = _pdf_pass(r, states, constellation)
    n_users = len(states)
    n_rx = r.size
    ops += n_users  # one distance-vs-threshold test per user
    lists = []
    for k in range(n_users):
        verdict = check_reliability(complex(u[k]), constellation, d_th)
        lists.append(build_candidate_list(complex(u[k]), verdict, constellation, tau_max))
    lists = _cap_lists(lists, gamma_cap)
    gamma = int(np.prod([len(lst) for lst in lists]))
    if gamma == 1:
        decisions = pdf_dec
    else:
        if gamma == constellation.size**n_users:
            # Full cross product: reuse the cached lexicographic grid.
            grid = _full_grid(constellation.name, constellation.size, n_users)
            cands = constellation.points[grid]
        else:
            cands = candidate_matrix(lists)
        diff = r[None, :] - cands @ h_hat.T
        metrics = np.einsum("ij,ij->i", diff, diff.conj()).real
        decisions = cands[int(np.argmin(metrics))].copy()
        ops += gamma * metric_ops(n_rx, n_users)
    if refine_feedback:
        expected = n_rx + n_users - 1
        refined = np.empty(n_users, dtype=complex)
        for k in range(n_users):
            x = np.concatenate([r, np.delete(decisions, k)])
            refined[k] = states[k].weights.conj() @ x
        ops += n_users * expected
        u = refined
        decisions = constellation.points[_slice_many(refined, constellation)]
    return DetectionResult(decisions, u, gamma, ops, first_pass=stage1.copy())
