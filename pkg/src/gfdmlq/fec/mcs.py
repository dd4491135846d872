"""Modulation and coding schemes and the coded block chain.

A packet is one GFDM block: the turbo codeword is rate matched to exactly
the active symbol capacity ``K_on * M * m`` of the block.  The information
length is the largest QPP block size not exceeding ``rate * capacity``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .constellation import get_constellation
from .qpp import QPP_SIZES
from .turbo import TurboCode

__all__ = ["McsMode", "CodedBlock", "MODULATION_NAMES", "parse_mcs", "info_length"]

MODULATION_NAMES = {2: "QPSK", 4: "16QAM", 6: "64QAM"}
_ORDERS = {v: k for k, v in MODULATION_NAMES.items()}
RATES = (Fraction(1, 3), Fraction(1, 2), Fraction(2, 3))

# fixed seed for the channel bit interleaver; part of the codec definition
_BIT_INTERLEAVER_SEED = 0x6FD3


@dataclass(frozen=True, order=True)
class McsMode:
    m: int
    rate: Fraction

    def __post_init__(self):
        if self.m not in MODULATION_NAMES:
            raise ValueError(f"modulation order must be one of 2, 4, 6; got {self.m}")
        object.__setattr__(self, "rate", Fraction(self.rate).limit_denominator(12))
        if self.rate not in RATES:
            raise ValueError(f"code rate must be one of 1/3, 1/2, 2/3; got {self.rate}")

    @property
    def name(self) -> str:
        return f"{MODULATION_NAMES[self.m]}-{self.rate.numerator}/{self.rate.denominator}"

    def __str__(self) -> str:
        return self.name


def parse_mcs(text: str) -> McsMode:
    """Parse names such as ``"QPSK-1/3"`` or ``"16QAM1/2"``."""
    t = text.strip().upper().replace(" ", "")
    for name, m in _ORDERS.items():
        if t.startswith(name):
            rate = t[len(name):].lstrip("-_")
            return McsMode(m, Fraction(rate))
    raise ValueError(f"cannot parse MCS {text!r}")


def info_length(capacity_bits: int, rate: Fraction) -> int:
    target = int(rate * capacity_bits)
    sizes = [k for k in QPP_SIZES if k <= target]
    if not sizes:
        raise ValueError(f"block capacity {capacity_bits} bits is too small for rate {rate}")
    return sizes[-1]


class CodedBlock:
    """Turbo code plus rate matching and bit interleaving for one MCS.

    ``E`` is the number of transmitted coded bits.  Systematic and tail bits
    are always sent; parity bits are punctured evenly, alternating between
    the two constituent encoders (``E < 3K + 12``), or
    the interlaced mother codeword is repeated cyclically (``E > 3K + 12``).
    """

    def __init__(self, mcs: McsMode, n_symbols: int):
        self.mcs = mcs
        self.n_symbols = n_symbols
        self.E = n_symbols * mcs.m
        self.K = info_length(self.E, mcs.rate)
        self.code = TurboCode(self.K)
        self.constellation = get_constellation(mcs.m)
        self.positions = self._positions()

    def _positions(self) -> np.ndarray:
        K, E = self.K, self.E
        L = 3 * K + 12
        t = np.arange(K)
        # transmission order: (sys, p1, p2) per step, then the 12 tail bits
        order = np.concatenate([np.stack([t, K + t, 2 * K + t], axis=1).ravel(), 3 * K + np.arange(12)])
        if E >= L:
            pos = order[np.arange(E) % L]
        else:
            n_par = E - K - 12
            if n_par < 0:
                raise ValueError(f"{E} coded bits cannot carry {K} information bits")
            # each encoder keeps about half the surviving parity, spread evenly
            # in time and staggered by half a step against the other encoder
            n1 = (n_par + 1) // 2
            n2 = n_par - n1
            t1 = (np.arange(n1) * K) // n1
            t2 = ((2 * np.arange(n2) + 1) * K) // (2 * n2) if n2 else np.zeros(0, int)
            keep = np.concatenate([K + t1, 2 * K + t2])
            kept = np.zeros(L, bool)
            kept[:K] = True
            kept[3 * K:] = True
            kept[keep] = True
            pos = order[kept[order]]
        perm = np.random.default_rng(_BIT_INTERLEAVER_SEED).permutation(E)
        return pos[perm]

    @cached_property
    def effective_rate(self) -> float:
        return self.K / self.E

    def encode(self, bits: np.ndarray) -> np.ndarray:
        """(batch, K) information bits -> (batch, E) transmitted coded bits."""
        return self.code.encode(bits)[:, self.positions]

    def soft_combine(self, llr: np.ndarray) -> np.ndarray:
        """(batch, E) channel LLRs -> (batch, 3K + 12) mother LLRs (0 where punctured)."""
        llr = np.atleast_2d(llr)
        out = np.zeros((llr.shape[0], self.code.mother_length))
        for b in range(llr.shape[0]):
            out[b] = np.bincount(self.positions, weights=llr[b], minlength=self.code.mother_length)
        return out

    def decode(self, llr: np.ndarray) -> np.ndarray:
        return self.code.decode(self.soft_combine(llr))

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        """Information bits -> (batch, n_symbols) constellation symbols."""
        return self.constellation.map(self.encode(bits))
