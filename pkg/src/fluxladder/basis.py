"""Occupation bases for fixed particle number on a two-leg hardcore-boson ladder.

Sites live on a ladder of ``L`` rungs and two legs.  Site ``(j, p)`` (rung
``j`` in ``1..L``, leg ``p`` in ``{1, 2}``, leg 1 being the driven one) maps to
the flat index ``k = 2*(j-1) + (p-1)``, so rung partners sit on adjacent bits.
A many-body configuration is a ``2L``-bit word with bit ``k`` set iff site
``k`` holds a boson; the hardcore constraint is structural (one bit per site).

A :class:`SectorBasis` enumerates all words of fixed population ``N`` in
increasing numeric order, which for fixed Hamming weight is the combinatorial
(colex) order; ranks are recovered by binary search on the sorted word array.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np


@dataclass(frozen=True)
class SiteIndex:
    """Rung/leg coordinates of one ladder site."""

    j: int
    p: int

    def __post_init__(self):
        if self.j < 1:
            raise ValueError(f"rung index must be >= 1, got {self.j}")
        if self.p not in (1, 2):
            raise ValueError(f"leg index must be 1 or 2, got {self.p}")

    @property
    def flat(self) -> int:
        return 2 * (self.j - 1) + (self.p - 1)

    @staticmethod
    def from_flat(k: int) -> "SiteIndex":
        if k < 0:
            raise ValueError(f"flat index must be >= 0, got {k}")
        return SiteIndex(j=k // 2 + 1, p=k % 2 + 1)


def popcount(words) -> np.ndarray:
    """Population count of integer occupation words (vectorized)."""
    w = np.asarray(words, dtype=np.uint64)
    count = np.zeros(w.shape, dtype=np.int64)
    while w.any():
        count += (w & np.uint64(1)).astype(np.int64)
        w = w >> np.uint64(1)
    return count


class SectorBasis:
    """All ``2L``-bit occupation words with population ``N``, sorted ascending.

    ``states[i]`` is the word of rank ``i``; ``rank_of`` inverts the map.
    Immutable after construction.
    """

    def __init__(self, L: int, N: int):
        if L < 1:
            raise ValueError(f"need at least one rung, got L={L}")
        n_sites = 2 * L
        if not 0 <= N <= n_sites:
            raise ValueError(f"particle number N={N} outside [0, {n_sites}]")
        self.L = L
        self.N = N
        self.n_sites = n_sites
        self.dimension = comb(n_sites, N)
        self.states = _enumerate_words(n_sites, N)
        self.states.flags.writeable = False

    def rank_of(self, word: int) -> int:
        """Index of ``word`` in the sector, or raise if it does not belong."""
        i = int(np.searchsorted(self.states, word))
        if i >= self.dimension or int(self.states[i]) != int(word):
            raise ValueError(f"word {word:#x} not in sector (L={self.L}, N={self.N})")
        return i

    def rank_many(self, words: np.ndarray) -> np.ndarray:
        """Vectorized rank lookup; caller guarantees membership."""
        return np.searchsorted(self.states, words)

    def occupations(self, flat_site: int) -> np.ndarray:
        """0/1 occupation of one site across the whole basis."""
        return ((self.states >> np.uint64(flat_site)) & np.uint64(1)).astype(np.float64)

    def __len__(self):
        return self.dimension

    def __repr__(self):
        return f"SectorBasis(L={self.L}, N={self.N}, dim={self.dimension})"


def _enumerate_words(n_sites: int, N: int) -> np.ndarray:
    """All n_sites-bit words of weight N in ascending numeric order.

    Uses Gosper's next-higher-same-weight walk; O(d) time, O(d) memory.
    """
    d = comb(n_sites, N)
    out = np.empty(d, dtype=np.uint64)
    if N == 0:
        out[0] = 0
        return out
    v = (1 << N) - 1
    for i in range(d):
        out[i] = v
        t = v | (v - 1)
        ctz = (v & -v).bit_length() - 1
        v = (t + 1) | ((~t & (t + 1)) - 1) >> (ctz + 1)
    return out


def enumerate_sector(L: int, N: int) -> SectorBasis:
    """Basis of the fixed-``N`` sector on an ``L``-rung ladder."""
    return SectorBasis(L, N)


def hop(word: int, source: SiteIndex, target: SiteIndex):
    """Move one boson; returns ``(new_word, allowed)``.

    Allowed iff the source bit is set and the target bit is clear.  Bosons on
    distinct sites commute, so no sign factor is ever produced.
    """
    u, v = source.flat, target.flat
    if u == v:
        raise ValueError("hop requires distinct sites")
    if not (word >> u) & 1 or (word >> v) & 1:
        return word, False
    return word - (1 << u) + (1 << v), True


def raise_lower(word: int, site: SiteIndex, direction: str):
    """Apply a creation or annihilation bit flip; returns ``(new_word, allowed)``."""
    k = site.flat
    occupied = (word >> k) & 1
    if direction == "create":
        if occupied:
            return word, False
        return word | (1 << k), True
    if direction == "annihilate":
        if not occupied:
            return word, False
        return word & ~(1 << k), True
    raise ValueError(f"direction must be 'create' or 'annihilate', got {direction!r}")
