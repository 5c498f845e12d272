"""Iterative detection and decoding: the soft list detector and the turbo loop.

Each turbo iteration re-runs the adaptive detector pass over the frame (pilot
training, then decision-directed filtering), builds per-user candidate lists,
computes extrinsic bit LLRs by a max-log search over the combined candidate
vectors, and exchanges them with the convolutional decoder through per-user
interleavers.  In the first iteration the lists are ordered by distance to the
soft estimates; afterwards they are ordered by the symbol probabilities implied
by the decoder feedback, keeping the list length granted by the reliability
check (1 for reliable users).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .coding import ConvCode, Interleaver, bcjr_decode, clamp_llrs
from .constellation import (
    CandidateList,
    Constellation,
    build_candidate_list,
    check_reliability,
)
from .detectors import _cap_lists, _pdf_pass, candidate_matrix, metric_ops
from .estimation import (
    channel_estimate_update,
    init_channel_estimator,
    init_receiver,
    rls_update,
)

__all__ = [
    "IddConfig",
    "SymbolProbTable",
    "CodedFrame",
    "IddResult",
    "bit_prob_from_llr",
    "symbol_prob",
    "symbol_prob_table",
    "build_idd_list",
    "soft_detect_llr",
    "run_idd",
]


@dataclass(frozen=True)
class IddConfig:
    """Knobs of the turbo receiver."""

    turbo_iterations: int = 4
    d_th: float = 0.3
    tau_max: int = 4
    detector: str = "pdfcc"  # "pdfcc" | "pdf" (pdf = reliability test disabled)
    gamma_cap: int = 4096
    forgetting: float = 0.998
    delta: float = 0.01

    def __post_init__(self):
        if self.turbo_iterations < 1:
            raise ValueError("turbo_iterations must be >= 1")
        if self.detector not in ("pdfcc", "pdf"):
            raise ValueError("detector must be 'pdfcc' or 'pdf'")

    @property
    def effective_d_th(self) -> float:
        return self.d_th if self.detector == "pdfcc" else math.inf


@dataclass(frozen=True)
class SymbolProbTable:
    """Per-user symbol probabilities, rows normalized to one."""

    probs: np.ndarray  # (n_users, alphabet size)

    def __post_init__(self):
        sums = self.probs.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise ValueError("symbol probabilities must sum to 1 per user")


def bit_prob_from_llr(llr, bit_sign):
    """P[b = bit_sign] for LLR log P(+1)/P(-1); bit_sign is +1 or -1."""
    return 0.5 * (1.0 + bit_sign * np.tanh(0.5 * np.asarray(llr, dtype=float)))


def symbol_prob(bit_llrs, constellation: Constellation, point: complex) -> float:
    """Probability of one alphabet point under independent per-bit LLRs."""
    idx = constellation.index_of(point)
    signs = 2.0 * constellation.labels[idx] - 1.0
    return float(np.prod(bit_prob_from_llr(np.asarray(bit_llrs, dtype=float), signs)))


def symbol_prob_table(llrs: np.ndarray, constellation: Constellation) -> SymbolProbTable:
    """Symbol probabilities for all users from a (n_users, J) LLR block."""
    signs = 2.0 * constellation.labels - 1.0  # (C, J)
    per_bit = 0.5 * (
        1.0 + signs[None, :, :] * np.tanh(0.5 * llrs[:, None, :])
    )  # (K, C, J)
    return SymbolProbTable(per_bit.prod(axis=2))


def build_idd_list(
    table: SymbolProbTable,
    reliable: np.ndarray,
    constellation: Constellation,
    tau_max: int = 4,
) -> CandidateList:
    """Per-user lists ordered by non-increasing symbol probability.

    List lengths follow the reliability verdicts of the detector pass: one
    candidate for reliable users, min(tau_max, alphabet size) otherwise.
    Probability ties keep canonical point order.
    """
    lists = []
    for k in range(table.probs.shape[0]):
        order = np.argsort(-table.probs[k], kind="stable")
        tau = 1 if reliable[k] else min(tau_max, constellation.size)
        lists.append(constellation.points[order[:tau]].copy())
    return CandidateList(tuple(lists))


def _candidate_tensors(
    r, h_hat, lists: CandidateList, apriori, sigma_v2, constellation: Constellation
):
    """Metrics shared by the extrinsic computation and the MAP selection.

    Returns (candidate symbols (G, K), their bits (G, K, J), per-bit prior
    terms (G, K, J), and the full metric ln P(x) - ||r - H x||^2 / sigma_v2).
    """
    cands = candidate_matrix(list(lists.per_user))
    idx = np.argmin(
        np.abs(cands[:, :, None] - constellation.points[None, None, :]), axis=2
    )
    bits = constellation.labels[idx]  # (G, K, J)
    prior_terms = 0.5 * (2.0 * bits - 1.0) * apriori[None, :, :]
    diff = r[None, :] - cands @ h_hat.T
    dist = np.einsum("ij,ij->i", diff, diff.conj()).real
    base = prior_terms.sum(axis=(1, 2)) - dist / sigma_v2
    return cands, bits, prior_terms, base


def _constrained_best(apriori_k, constellation: Constellation, j: int, b: int) -> int:
    """Alphabet index with bit j forced to b that maximizes the prior."""
    signs = 2.0 * constellation.labels - 1.0
    logits = 0.5 * (signs @ apriori_k)
    logits = np.where(constellation.labels[:, j] == b, logits, -np.inf)
    return int(np.argmax(logits))


def soft_detect_llr(
    r,
    h_hat,
    lists: CandidateList,
    apriori: np.ndarray,
    sigma_v2: float,
    constellation: Constellation,
) -> np.ndarray:
    """Extrinsic LLRs of every (user, bit) over the combined candidate list.

    For each bit the metric max over candidates carrying bit 1 is compared to
    the max over candidates carrying bit 0, with the bit's own prior excluded.
    An empty hypothesis is backfilled with one vector that keeps every other
    user's best candidate and forces the constrained symbol with the highest
    prior for the user in question.  Outputs are raw (unclamped); the turbo
    loop clamps at the exchange boundary.
    """
    cands, bits, prior_terms, base = _candidate_tensors(
        r, h_hat, lists, apriori, sigma_v2, constellation
    )
    n_users, n_bits = apriori.shape
    extrinsic = np.empty((n_users, n_bits))
    heads = np.array([lst[0] for lst in lists.per_user])
    for k in range(n_users):
        for j in range(n_bits):
            metric = base - prior_terms[:, k, j]
            mask = bits[:, k, j] == 1
            best = [0.0, 0.0]
            for b, sel in ((1, mask), (0, ~mask)):
                if sel.any():
                    best[b] = float(metric[sel].max())
                else:
                    best[b] = _backfill_metric(
                        r, h_hat, heads, apriori, sigma_v2, constellation, k, j, b
                    )
            extrinsic[k, j] = best[1] - best[0]
    return extrinsic


def _backfill_metric(
    r, h_hat, heads, apriori, sigma_v2, constellation: Constellation, k, j, b
) -> float:
    vec = heads.copy()
    idx = _constrained_best(apriori[k], constellation, j, b)
    vec[k] = constellation.points[idx]
    vec_idx = np.argmin(
        np.abs(vec[:, None] - constellation.points[None, :]), axis=1
    )
    bits = constellation.labels[vec_idx]
    prior_terms = 0.5 * (2.0 * bits - 1.0) * apriori
    prior_terms[k, j] = 0.0
    diff = r - h_hat @ vec
    return float(prior_terms.sum() - np.real(diff.conj() @ diff) / sigma_v2)


@dataclass(frozen=True)
class CodedFrame:
    """Everything the turbo receiver needs about one coded transmission."""

    received: np.ndarray  # (n_pilots + n_data, n_rx)
    pilots: np.ndarray  # (n_pilots, n_users) known pilot symbol vectors
    constellation: Constellation
    code: ConvCode
    interleavers: tuple[Interleaver, ...]  # one per user
    sigma_v2: float
    n_message_bits: int
    true_coded: np.ndarray | None = None  # (n_users, coded length)
    true_message: np.ndarray | None = None  # (n_users, n_message_bits)

    @property
    def n_users(self) -> int:
        return self.pilots.shape[1]

    @property
    def n_pilots(self) -> int:
        return self.pilots.shape[0]

    @property
    def n_data(self) -> int:
        return self.received.shape[0] - self.n_pilots


@dataclass
class IddResult:
    message_bits: np.ndarray  # (n_users, n_message_bits)
    telemetry: list[dict] = field(default_factory=list)


def _train_on_pilots(frame: CodedFrame, config: IddConfig):
    """Pilot processing: channel estimate first, then RLS filter training.

    Feedback entries during training are the filters' own first-pass slices,
    matching the regressor statistics of decision-directed operation.
    """
    c = frame.constellation
    n_users, n_rx = frame.n_users, frame.received.shape[1]
    chan = init_channel_estimator(n_users, n_rx, config.delta, config.forgetting)
    h_hat = np.zeros((n_rx, n_users), dtype=complex)
    for i in range(frame.n_pilots):
        h_hat = channel_estimate_update(chan, frame.received[i], frame.pilots[i])
    states = init_receiver(n_users, n_rx, "pdf", config.delta, config.forgetting)
    for i in range(frame.n_pilots):
        r = frame.received[i]
        s = frame.pilots[i]
        fwd = np.stack([st.weights[:n_rx] for st in states])
        u1 = fwd.conj() @ r
        fb = c.points[np.argmin(np.abs(u1[:, None] - c.points[None, :]), axis=1)]
        for k in range(n_users):
            x = np.concatenate([r, np.delete(fb, k)])
            rls_update(states[k], x, complex(s[k]))
    return states, chan, h_hat


def run_idd(frame: CodedFrame, config: IddConfig) -> IddResult:
    """Run the full turbo receiver on one coded frame.

    Returns the decoded message bits and one telemetry row per iteration
    (coded/message BER when the true bits are known, mean candidate count,
    and detection operation tally).
    """
    c = frame.constellation
    n_users, n_rx = frame.n_users, frame.received.shape[1]
    n_data, j_bits = frame.n_data, c.bits_per_symbol
    coded_len = frame.code.coded_length(frame.n_message_bits)
    if coded_len != n_data * j_bits:
        raise ValueError(
            f"frame carries {n_data * j_bits} coded bits per user, expected {coded_len}"
        )
    d_th = config.effective_d_th

    states0, chan0, h_hat0 = _train_on_pilots(frame, config)
    apriori = np.zeros((n_data, n_users, j_bits))
    result = IddResult(message_bits=np.zeros((n_users, frame.n_message_bits), dtype=np.int64))

    for iteration in range(1, config.turbo_iterations + 1):
        states = copy.deepcopy(states0)
        chan = copy.deepcopy(chan0)
        h_hat = h_hat0
        extr = np.empty((n_data, n_users, j_bits))
        gamma_sum = 0
        ops_sum = 0
        for i in range(n_data):
            r = frame.received[frame.n_pilots + i]
            u, pdf_dec, _, regressors, ops = _pdf_pass(r, states, c)
            ops += n_users
            reliable = np.empty(n_users, dtype=bool)
            dist_lists = []
            for k in range(n_users):
                verdict = check_reliability(complex(u[k]), c, d_th)
                reliable[k] = verdict.reliable
                dist_lists.append(build_candidate_list(complex(u[k]), verdict, c, config.tau_max))
            if iteration == 1:
                per_user = dist_lists
            else:
                table = symbol_prob_table(apriori[i], c)
                per_user = list(
                    build_idd_list(table, reliable, c, config.tau_max).per_user
                )
            per_user = _cap_lists(per_user, config.gamma_cap)
            lists = CandidateList(tuple(per_user))
            gamma_sum += lists.gamma
            cands, bits, prior_terms, base = _candidate_tensors(
                r, h_hat, lists, apriori[i], frame.sigma_v2, c
            )
            if lists.gamma > 1:
                ops += lists.gamma * metric_ops(n_rx, n_users)
            heads = np.array([lst[0] for lst in per_user])
            for k in range(n_users):
                for j in range(j_bits):
                    metric = base - prior_terms[:, k, j]
                    mask = bits[:, k, j] == 1
                    vals = [0.0, 0.0]
                    for b, sel in ((1, mask), (0, ~mask)):
                        if sel.any():
                            vals[b] = float(metric[sel].max())
                        else:
                            vals[b] = _backfill_metric(
                                r, h_hat, heads, apriori[i], frame.sigma_v2, c, k, j, b
                            )
                    extr[i, k, j] = vals[1] - vals[0]
            decisions = cands[int(np.argmax(base))]
            for k in range(n_users):
                rls_update(states[k], regressors[k], complex(decisions[k]))
            h_hat = channel_estimate_update(chan, r, decisions)
            ops_sum += ops
        extr = clamp_llrs(extr)

        row = {
            "iteration": iteration,
            "mean_gamma": gamma_sum / n_data,
            "detect_ops": ops_sum,
        }
        coded_errs = 0
        msg_errs = 0
        for k in range(n_users):
            stream = extr[:, k, :].reshape(-1)
            dec_in = frame.interleavers[k].deinterleave(stream)
            dec_extr, post_msg = bcjr_decode(dec_in, code=frame.code, max_log=True)
            apriori[:, k, :] = frame.interleavers[k].interleave(dec_extr).reshape(
                n_data, j_bits
            )
            msg_bits = (post_msg > 0).astype(np.int64)
            result.message_bits[k] = msg_bits
            if frame.true_coded is not None:
                coded_dec = ((dec_extr + dec_in) > 0).astype(np.int64)
                coded_errs += int(np.sum(coded_dec != frame.true_coded[k]))
            if frame.true_message is not None:
                msg_errs += int(np.sum(msg_bits != frame.true_message[k]))
        if frame.true_coded is not None:
            row["coded_errors"] = coded_errs
            row["coded_bits"] = n_users * coded_len
            row["coded_ber"] = coded_errs / (n_users * coded_len)
        if frame.true_message is not None:
            row["msg_errors"] = msg_errs
            row["msg_bits"] = n_users * frame.n_message_bits
            row["msg_ber"] = msg_errs / (n_users * frame.n_message_bits)
        result.telemetry.append(row)
    return result
