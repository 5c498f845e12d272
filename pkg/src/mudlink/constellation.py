"""Modulation alphabets, bit mapping, slicing, and reliability-based candidate lists.

Bit labeling (Gray, fixed):

* QPSK (J=2): bit 0 selects the in-phase sign, bit 1 the quadrature sign,
  with 0 -> '+' and 1 -> '-'.  So (0,0) -> (+1+1j)/sqrt(2), (1,1) -> (-1-1j)/sqrt(2).
* 16-QAM (J=4): bits (0,1) select the in-phase level, bits (2,3) the quadrature
  level, via the 2-bit Gray map 00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3, scaled
  by 1/sqrt(10).  (0,0,0,0) -> (+3+3j)/sqrt(10).

Points are stored in label order (point ``i`` carries the bit pattern of the
integer ``i``); this is the canonical order used for every tie-break.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Constellation",
    "ReliabilityVerdict",
    "CandidateList",
    "make_constellation",
    "qpsk",
    "qam16",
    "map_bits",
    "slice_symbol",
    "nearest_distance",
    "check_reliability",
    "build_candidate_list",
    "CASE_INSIDE_SQUARE",
    "CASE_OUTSIDE_SQUARE",
    "CASE_INNER_TIER",
    "CASE_OUTER_TIER",
]

CASE_INSIDE_SQUARE = "inside_square"
CASE_OUTSIDE_SQUARE = "outside_square"
CASE_INNER_TIER = "inner_tier"
CASE_OUTER_TIER = "outer_tier"

_GRAY2 = {(0, 0): 3.0, (0, 1): 1.0, (1, 1): -1.0, (1, 0): -3.0}


@dataclass(frozen=True)
class Constellation:
    """A complex symbol alphabet with unit average energy and Gray labeling.

    Attributes
    ----------
    name : str
        ``"qpsk"`` or ``"16qam"``.
    points : np.ndarray
        Complex symbols in canonical (label) order, shape (2**J,).
    bits_per_symbol : int
        J, bits carried by one symbol.
    min_spacing : float
        Distance between the two nearest points (the CC geometry parameter).
    labels : np.ndarray
        Bit pattern of each point, shape (2**J, J), entries 0/1.
    """

    name: str
    points: np.ndarray
    bits_per_symbol: int
    min_spacing: float
    labels: np.ndarray

    @property
    def size(self) -> int:
        return self.points.size

    def index_of(self, symbol: complex) -> int:
        """Canonical index of an exact alphabet member."""
        idx = int(np.argmin(np.abs(self.points - symbol)))
        if abs(self.points[idx] - symbol) > 1e-12:
            raise ValueError(f"{symbol!r} is not a point of {self.name}")
        return idx

    def demap(self, symbol: complex) -> np.ndarray:
        """Bit label of an exact alphabet member."""
        return self.labels[self.index_of(symbol)].copy()


@dataclass(frozen=True)
class ReliabilityVerdict:
    """Outcome of the constellation-constraint check for one soft estimate."""

    reliable: bool
    case_tag: str
    nearest_distance: float


@dataclass(frozen=True)
class CandidateList:
    """Per-user ordered tentative-decision lists for one received vector."""

    per_user: tuple[np.ndarray, ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(lst) for lst in self.per_user)

    @property
    def gamma(self) -> int:
        return int(math.prod(self.sizes))


def _bit_patterns(j: int) -> np.ndarray:
    n = 1 << j
    return ((np.arange(n)[:, None] >> np.arange(j - 1, -1, -1)) & 1).astype(np.int8)


def qpsk() -> Constellation:
    labels = _bit_patterns(2)
    sign = 1.0 - 2.0 * labels
    points = (sign[:, 0] + 1j * sign[:, 1]) / math.sqrt(2.0)
    return Constellation("qpsk", points, 2, math.sqrt(2.0), labels)


def qam16() -> Constellation:
    labels = _bit_patterns(4)
    re = np.array([_GRAY2[(int(b[0]), int(b[1]))] for b in labels])
    im = np.array([_GRAY2[(int(b[2]), int(b[3]))] for b in labels])
    points = (re + 1j * im) / math.sqrt(10.0)
    return Constellation("16qam", points, 4, 2.0 / math.sqrt(10.0), labels)


@lru_cache(maxsize=None)
def make_constellation(name: str) -> Constellation:
    """Build a constellation from its CLI name (``qpsk`` or ``16qam``)."""
    if name == "qpsk":
        return qpsk()
    if name == "16qam":
        return qam16()
    raise ValueError(f"unknown constellation {name!r} (expected 'qpsk' or '16qam')")


def map_bits(bits, constellation: Constellation) -> complex:
    """Map a J-bit word to its labeled symbol."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape != (constellation.bits_per_symbol,):
        raise ValueError(
            f"expected {constellation.bits_per_symbol} bits, got shape {bits.shape}"
        )
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0/1")
    idx = 0
    for b in bits:
        idx = (idx << 1) | int(b)
    return complex(constellation.points[idx])


def slice_symbol(u: complex, constellation: Constellation) -> complex:
    """Nearest-point hard decision; exact ties go to the lowest canonical index."""
    return complex(constellation.points[_nearest_index(u, constellation)])


def _nearest_index(u: complex, constellation: Constellation) -> int:
    return int(np.argmin(np.abs(constellation.points - u)))


def nearest_distance(u: complex, constellation: Constellation) -> float:
    """Distance from a soft estimate to its closest alphabet point."""
    return float(np.min(np.abs(constellation.points - u)))


def _is_outer_tier(point: complex, constellation: Constellation) -> bool:
    top = np.max(np.abs(constellation.points.real))
    return max(abs(point.real), abs(point.imag)) >= top - 1e-12


def check_reliability(
    u: complex, constellation: Constellation, d_th: float
) -> ReliabilityVerdict:
    """Classify a soft estimate as reliable or not against the threshold d_th.

    QPSK uses the inside/outside-square rules; 16-QAM uses the inner/outer-tier
    rules, where the tier is that of the nearest constellation point.
    """
    if d_th < 0:
        raise ValueError("d_th must be non-negative")
    eps = constellation.min_spacing
    half = eps / 2.0
    d_k = nearest_distance(u, constellation)
    re, im = abs(u.real), abs(u.imag)

    if constellation.size == 4:
        if re <= half and im <= half:
            return ReliabilityVerdict(not (d_k > d_th), CASE_INSIDE_SQUARE, d_k)
        unreliable = re < half - d_th or im < half - d_th
        return ReliabilityVerdict(not unreliable, CASE_OUTSIDE_SQUARE, d_k)

    nearest = constellation.points[_nearest_index(u, constellation)]
    if _is_outer_tier(complex(nearest), constellation):
        margin = half - d_th
        unreliable = (
            re < margin
            or im < margin
            or min(abs(u.real - eps), abs(u.real + eps)) < margin
            or min(abs(u.imag - eps), abs(u.imag + eps)) < margin
        )
        return ReliabilityVerdict(not unreliable, CASE_OUTER_TIER, d_k)
    return ReliabilityVerdict(not (d_k >= d_th), CASE_INNER_TIER, d_k)


def build_candidate_list(
    u: complex,
    verdict: ReliabilityVerdict,
    constellation: Constellation,
    tau_max: int = 4,
) -> np.ndarray:
    """Tentative-decision list for one user, ordered by non-decreasing distance.

    Reliable estimates keep only the sliced point; unreliable ones list the
    min(tau_max, alphabet size) nearest points.  Equidistant points keep their
    canonical order (stable sort).
    """
    if tau_max < 1:
        raise ValueError("tau_max must be >= 1")
    if verdict.reliable:
        return constellation.points[[_nearest_index(u, constellation)]].copy()
    n = min(tau_max, constellation.size)
    order = np.argsort(np.abs(constellation.points - u), kind="stable")
    return constellation.points[order[:n]].copy()
