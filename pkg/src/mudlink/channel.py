"""Uplink signal model: Rayleigh fading generators, AWGN, and SNR calibration.

All generators are deterministic functions of their seed.  The Jakes process is
a randomized arrival-angle sum of sinusoids (16 oscillators by default) with
independent random phases per link, which keeps distinct links statistically
independent while matching the Bessel autocorrelation of the classical model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelRealization",
    "NoiseSpec",
    "gen_block_fading",
    "gen_jakes",
    "transmit",
    "sigma_v2_from_ebn0",
]

BLOCK_FADING = "block"
JAKES = "jakes"


@dataclass(frozen=True)
class ChannelRealization:
    """Time-indexed channel gains for one simulation segment.

    ``gains`` has shape (n_steps, n_rx, n_users).  For block fading one step is
    one frame; for the Jakes model one step is one symbol interval.
    """

    gains: np.ndarray
    model: str
    n_rx: int
    n_users: int


@dataclass(frozen=True)
class NoiseSpec:
    """Receiver noise level: v ~ CN(0, sigma_v2 * I)."""

    sigma_v2: float

    def __post_init__(self):
        if not self.sigma_v2 > 0:
            raise ValueError("sigma_v2 must be positive")


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def gen_block_fading(n_users: int, n_rx: int, n_frames: int, rng) -> ChannelRealization:
    """Draw one i.i.d. CN(0,1) channel matrix per frame."""
    if n_users > n_rx:
        raise ValueError(f"n_users={n_users} must not exceed n_rx={n_rx}")
    rng = _as_rng(rng)
    gains = (
        rng.standard_normal((n_frames, n_rx, n_users))
        + 1j * rng.standard_normal((n_frames, n_rx, n_users))
    ) / math.sqrt(2.0)
    return ChannelRealization(gains, BLOCK_FADING, n_rx, n_users)


def gen_jakes(
    n_users: int,
    n_rx: int,
    n_symbols: int,
    fdt: float,
    rng,
    n_oscillators: int = 16,
) -> ChannelRealization:
    """Time-correlated Rayleigh gains with normalized Doppler ``fdt`` per link.

    Each of the n_rx*n_users scalar links is an independent sum of
    ``n_oscillators`` complex sinusoids whose arrival angles tile the full
    circle with a random per-link rotation, so the Doppler spectrum is
    two-sided and the ensemble autocorrelation is J0(2*pi*fdt*lag); uniform
    per-oscillator phases make the links mutually independent with unit
    average power.
    """
    if n_users > n_rx:
        raise ValueError(f"n_users={n_users} must not exceed n_rx={n_rx}")
    if not 0.0 < fdt < 0.5:
        raise ValueError(f"fdt={fdt} out of range (0, 0.5)")
    rng = _as_rng(rng)
    n_links = n_rx * n_users
    m = n_oscillators
    rotation = rng.uniform(0.0, 1.0, size=(n_links, 1))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_links, m))
    angles = 2.0 * np.pi * (np.arange(m) + rotation) / m
    doppler = 2.0 * np.pi * fdt * np.cos(angles)  # (n_links, m)
    t = np.arange(n_symbols)
    links = np.exp(1j * (doppler[:, :, None] * t + phases[:, :, None])).sum(axis=1)
    links /= math.sqrt(m)
    gains = links.reshape(n_rx, n_users, n_symbols).transpose(2, 0, 1).copy()
    return ChannelRealization(gains, JAKES, n_rx, n_users)


def transmit(h: np.ndarray, s: np.ndarray, noise, rng=None) -> np.ndarray:
    """One channel use: r = H s + v with v ~ CN(0, sigma_v2 * I).

    ``noise`` may be a NoiseSpec, a plain variance, or 0/None for the
    noiseless limit.
    """
    h = np.asarray(h)
    s = np.asarray(s)
    if h.ndim != 2 or s.shape != (h.shape[1],):
        raise ValueError(f"dimension mismatch: H {h.shape} vs s {s.shape}")
    r = h @ s
    sigma_v2 = noise.sigma_v2 if isinstance(noise, NoiseSpec) else float(noise or 0.0)
    if sigma_v2 > 0:
        rng = _as_rng(rng)
        n_rx = h.shape[0]
        v = (
            rng.standard_normal(n_rx) + 1j * rng.standard_normal(n_rx)
        ) * math.sqrt(sigma_v2 / 2.0)
        r = r + v
    return r


def sigma_v2_from_ebn0(
    ebn0_db: float, n_rx: int, code_rate: float, const_size: int
) -> float:
    """Noise variance for a target per-information-bit SNR (unit symbol power)."""
    if not 0.0 < code_rate <= 1.0:
        raise ValueError("code_rate must be in (0, 1]")
    if const_size < 2:
        raise ValueError("const_size must be >= 2")
    return n_rx / (code_rate * math.log2(const_size) * 10.0 ** (ebn0_db / 10.0))
