"""Channel-coding chain: rate-1/2 memory-2 convolutional code, random
interleaver, and a forward/backward (BCJR) decoder.

LLR convention: L = log P(bit = 1) / P(bit = 0), so positive values favor 1.
All exchanged LLRs are clamped to +/- LLR_CLAMP to keep exp/tanh paths finite.

The encoder is the non-systematic (7, 5) octal code.  State s packs the two
previous input bits as s = 2*u[i-1] + u[i-2]; each message is flushed back to
state zero by two zero tail bits, costing 4 extra code bits per block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvCode",
    "Interleaver",
    "LlrBlock",
    "conv_encode",
    "bcjr_decode",
    "clamp_llrs",
    "LLR_CLAMP",
]

LLR_CLAMP = 50.0
_NEG_INF = -1e30


def clamp_llrs(llrs: np.ndarray) -> np.ndarray:
    return np.clip(llrs, -LLR_CLAMP, LLR_CLAMP)


@dataclass(frozen=True)
class LlrBlock:
    """Per-bit LLRs indexed (time, user, bit label) with a role tag."""

    values: np.ndarray  # (n_vectors, n_users, bits_per_symbol)
    role: str  # "intrinsic" | "extrinsic" | "a-priori"

    def __post_init__(self):
        object.__setattr__(self, "values", clamp_llrs(np.asarray(self.values, dtype=float)))


class ConvCode:
    """Rate-1/2 binary convolutional code defined by two generator polynomials.

    The default (7, 5) octal pair has memory 2, a 4-state trellis, and two
    branches per state.  Transition tables are precomputed:

    * ``next_state[s, b]``: state after input bit ``b`` in state ``s``;
    * ``out_bits[s, b]``: the two output bits of that branch.
    """

    def __init__(self, generators: tuple[int, int] = (0o7, 0o5), memory: int = 2):
        self.generators = generators
        self.memory = memory
        self.rate = 0.5
        n_states = 1 << memory
        self.n_states = n_states
        self.next_state = np.zeros((n_states, 2), dtype=np.int64)
        self.out_bits = np.zeros((n_states, 2, 2), dtype=np.int64)
        for s in range(n_states):
            for b in (0, 1):
                reg = (b << memory) | s  # [u_i, u_{i-1}, u_{i-2}]
                self.next_state[s, b] = reg >> 1
                for n, g in enumerate(generators):
                    self.out_bits[s, b, n] = bin(reg & g).count("1") & 1
        # Predecessors for the vectorized forward recursion.
        self.prev_state = np.zeros((n_states, 2), dtype=np.int64)
        self.prev_bit = np.zeros((n_states, 2), dtype=np.int64)
        for s in range(n_states):
            found = 0
            for sp in range(n_states):
                for b in (0, 1):
                    if self.next_state[sp, b] == s:
                        self.prev_state[s, found] = sp
                        self.prev_bit[s, found] = b
                        found += 1

    def coded_length(self, n_message: int) -> int:
        return 2 * (n_message + self.memory)


def conv_encode(message, code: ConvCode | None = None) -> np.ndarray:
    """Encode a bit sequence, appending zero tail bits to flush the trellis."""
    if code is None:
        code = ConvCode()
    message = np.asarray(message, dtype=np.int64).ravel()
    bits = np.concatenate([message, np.zeros(code.memory, dtype=np.int64)])
    out = np.empty(2 * bits.size, dtype=np.int64)
    s = 0
    for i, b in enumerate(bits):
        out[2 * i : 2 * i + 2] = code.out_bits[s, b]
        s = code.next_state[s, b]
    return out


def _branch_metrics(code: ConvCode, coded_llrs, apriori, n_msg: int) -> np.ndarray:
    """gamma[t, s, b]: log-domain branch metric up to a per-step constant.

    Tail steps force the input bit to zero by pinning the b = 1 branches at
    -inf, which also terminates the backward recursion in state zero.
    """
    n_steps = coded_llrs.size // 2
    pairs = coded_llrs.reshape(n_steps, 2)
    gamma = np.einsum("sbn,tn->tsb", code.out_bits.astype(float), pairs)
    gamma[:n_msg, :, 1] += apriori[:, None]
    gamma[n_msg:, :, 1] = _NEG_INF
    return gamma


def _combine(a: np.ndarray, b: np.ndarray, max_log: bool) -> np.ndarray:
    if max_log:
        return np.maximum(a, b)
    return np.logaddexp(a, b)


def bcjr_decode(
    coded_llrs,
    apriori_msg_llrs=None,
    code: ConvCode | None = None,
    max_log: bool = True,
):
    """Forward/backward decoding of one zero-terminated block.

    Parameters
    ----------
    coded_llrs : array
        LLRs of all code bits (message and tail steps), length 2*(n_msg + memory).
    apriori_msg_llrs : array or None
        Prior LLRs on the message bits; zeros when None.
    max_log : bool
        Max-log approximation (default) or exact log-MAP combining.

    Returns
    -------
    extrinsic : np.ndarray
        Code-bit extrinsic LLRs (posterior minus input), clamped.
    posterior_msg : np.ndarray
        Message-bit posterior LLRs, clamped; sign > 0 decodes to 1.
    """
    if code is None:
        code = ConvCode()
    coded_llrs = np.asarray(coded_llrs, dtype=float).ravel()
    if coded_llrs.size % 2:
        raise ValueError("coded LLR length must be even")
    n_steps = coded_llrs.size // 2
    n_msg = n_steps - code.memory
    if n_msg < 1:
        raise ValueError("block too short for the trellis tail")
    if apriori_msg_llrs is None:
        apriori = np.zeros(n_msg)
    else:
        apriori = np.asarray(apriori_msg_llrs, dtype=float).ravel()
        if apriori.size != n_msg:
            raise ValueError(f"expected {n_msg} a-priori LLRs, got {apriori.size}")

    gamma = _branch_metrics(code, coded_llrs, apriori, n_msg)
    n_states = code.n_states

    alpha = np.full((n_steps + 1, n_states), _NEG_INF)
    alpha[0, 0] = 0.0
    for t in range(n_steps):
        incoming = alpha[t, code.prev_state] + gamma[t, code.prev_state, code.prev_bit]
        alpha[t + 1] = _combine(incoming[:, 0], incoming[:, 1], max_log)
        alpha[t + 1] -= alpha[t + 1].max()

    beta = np.full((n_steps + 1, n_states), _NEG_INF)
    beta[n_steps, 0] = 0.0
    for t in range(n_steps - 1, -1, -1):
        outgoing = gamma[t] + beta[t + 1, code.next_state]
        beta[t] = _combine(outgoing[:, 0], outgoing[:, 1], max_log)
        beta[t] -= beta[t].max()

    # Full branch scores alpha + gamma + beta', shape (n_steps, states, bits).
    scores = alpha[:-1, :, None] + gamma + beta[1:][:, code.next_state]
    flat = scores.reshape(n_steps, -1)

    posterior_msg = np.empty(n_msg)
    for t in range(n_msg):
        m1 = _reduce(scores[t, :, 1], max_log)
        m0 = _reduce(scores[t, :, 0], max_log)
        posterior_msg[t] = m1 - m0

    out0 = code.out_bits[:, :, 0].ravel().astype(bool)
    out1 = code.out_bits[:, :, 1].ravel().astype(bool)
    posterior_coded = np.empty(2 * n_steps)
    for t in range(n_steps):
        row = flat[t]
        posterior_coded[2 * t] = _reduce(row[out0], max_log) - _reduce(row[~out0], max_log)
        posterior_coded[2 * t + 1] = _reduce(row[out1], max_log) - _reduce(row[~out1], max_log)

    extrinsic = clamp_llrs(posterior_coded - coded_llrs)
    return extrinsic, clamp_llrs(posterior_msg)


def _reduce(vals: np.ndarray, max_log: bool) -> float:
    if vals.size == 0:
        return _NEG_INF
    if max_log:
        return float(vals.max())
    return float(np.logaddexp.reduce(vals))


@dataclass(frozen=True)
class Interleaver:
    """Bijective permutation of a bit block."""

    perm: np.ndarray

    @classmethod
    def random(cls, length: int, seed) -> "Interleaver":
        return cls(np.random.default_rng(seed).permutation(length))

    @classmethod
    def identity(cls, length: int) -> "Interleaver":
        return cls(np.arange(length))

    def interleave(self, block: np.ndarray) -> np.ndarray:
        block = np.asarray(block)
        if block.shape[0] != self.perm.size:
            raise ValueError(f"block length {block.shape[0]} != {self.perm.size}")
        return block[self.perm]

    def deinterleave(self, block: np.ndarray) -> np.ndarray:
        block = np.asarray(block)
        if block.shape[0] != self.perm.size:
            raise ValueError(f"block length {block.shape[0]} != {self.perm.size}")
        out = np.empty_like(block)
        out[self.perm] = block
        return out
