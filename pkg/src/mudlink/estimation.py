"""Adaptive parameter estimation: RLS receive filters and recursive LS channel
estimation.

Both recursions keep an inverse-correlation matrix that is re-symmetrized after
every update to bound numerical drift.  The inverse is initialized to
(1/delta) * I because the exact least-squares normal matrix is singular until
enough data has been seen; the regularization shows up as a lambda^i * delta * I
term in the equivalent batch problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ReceiverState",
    "ChannelEstimatorState",
    "init_receiver",
    "rls_update",
    "init_channel_estimator",
    "channel_estimate_update",
    "rls_update_ops",
    "channel_update_ops",
]

SDF = "sdf"
PDF = "pdf"


@dataclass
class ReceiverState:
    """Concatenated forward/backward filter of one user plus its RLS memory."""

    weights: np.ndarray  # (L,) complex
    inv_corr: np.ndarray  # (L, L) complex, Hermitian
    forgetting: float

    @property
    def dim(self) -> int:
        return self.weights.size


@dataclass
class ChannelEstimatorState:
    """Recursive least-squares channel estimator memory."""

    cross_corr: np.ndarray  # D, (n_rx, n_users)
    inv_corr: np.ndarray  # P, (n_users, n_users), Hermitian
    forgetting: float


def init_receiver(
    n_users: int,
    n_rx: int,
    mode: str,
    delta: float = 0.01,
    forgetting: float = 0.998,
) -> list[ReceiverState]:
    """Zero-weight receiver states, one per user (or detection position).

    Successive feedback gives position k (1-based) a backward filter of length
    k - 1; parallel feedback gives every user length n_users - 1.
    """
    if n_users > n_rx:
        raise ValueError(f"n_users={n_users} must not exceed n_rx={n_rx}")
    if mode not in (SDF, PDF):
        raise ValueError(f"mode must be '{SDF}' or '{PDF}'")
    states = []
    for k in range(n_users):
        n_back = k if mode == SDF else n_users - 1
        dim = n_rx + n_back
        states.append(
            ReceiverState(
                weights=np.zeros(dim, dtype=complex),
                inv_corr=np.eye(dim, dtype=complex) / delta,
                forgetting=forgetting,
            )
        )
    return states


def rls_update(state: ReceiverState, x: np.ndarray, reference: complex) -> complex:
    """One exponentially-windowed RLS step; updates the state in place.

    ``x`` is the concatenated input (received vector plus feedback symbols) and
    ``reference`` is the pilot (training mode) or the decision (decision-directed
    mode).  Returns the a-priori filter output w^H x computed before the weight
    update.
    """
    if x.shape != state.weights.shape:
        raise ValueError(f"input shape {x.shape} does not match filter {state.weights.shape}")
    lam_inv = 1.0 / state.forgetting
    p = state.inv_corr
    q = p @ x
    denom = 1.0 + lam_inv * (x.conj() @ q)
    gain = (lam_inv / denom) * q
    p_new = lam_inv * (p - np.outer(gain, q.conj()))
    state.inv_corr = 0.5 * (p_new + p_new.conj().T)
    out = complex(state.weights.conj() @ x)
    err = reference - out
    state.weights = state.weights + gain * np.conj(err)
    return out


def init_channel_estimator(
    n_users: int,
    n_rx: int,
    delta: float = 0.01,
    forgetting: float = 0.998,
) -> ChannelEstimatorState:
    return ChannelEstimatorState(
        cross_corr=np.zeros((n_rx, n_users), dtype=complex),
        inv_corr=np.eye(n_users, dtype=complex) / delta,
        forgetting=forgetting,
    )


def channel_estimate_update(
    state: ChannelEstimatorState, r: np.ndarray, s: np.ndarray
) -> np.ndarray:
    """Fold one (received, transmitted) pair into the estimator; returns H_hat.

    ``s`` is the known pilot vector during training or the decided symbol
    vector afterwards.  Uses the matrix-inversion-lemma recursion so no matrix
    is ever inverted directly.
    """
    lam = state.forgetting
    lam_inv = 1.0 / lam
    state.cross_corr = lam * state.cross_corr + np.outer(r, s.conj())
    p = state.inv_corr
    q = p @ s
    denom = 1.0 + lam_inv * (s.conj() @ q)
    p_new = lam_inv * (p - (lam_inv / denom) * np.outer(q, q.conj()))
    state.inv_corr = 0.5 * (p_new + p_new.conj().T)
    return state.cross_corr @ state.inv_corr


def rls_update_ops(dim: int) -> int:
    """Complex multiplications of one RLS step of dimension ``dim``.

    q = P x (dim^2), x^H q (dim), gain scaling (dim), the rank-one inverse
    update with its forgetting rescale (2 dim^2), the a-priori output (dim),
    and the weight update (dim).
    """
    return 3 * dim * dim + 4 * dim


def channel_update_ops(n_rx: int, n_users: int) -> int:
    """Complex multiplications of one channel-estimator step.

    D update outer product and rescale (2 n_rx n_users), P s (n_users^2),
    s^H q (n_users), rank-one update and rescale (2 n_users^2), and the
    product H_hat = D P (n_rx n_users^2).
    """
    return 2 * n_rx * n_users + 3 * n_users * n_users + n_users + n_rx * n_users * n_users
