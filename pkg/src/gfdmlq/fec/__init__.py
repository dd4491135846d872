"""Turbo-coded QAM bit chain."""

from __future__ import annotations

import numpy as np

from .constellation import Constellation, get_constellation
from .mcs import MODULATION_NAMES, RATES, CodedBlock, McsMode, info_length, parse_mcs
from .turbo import LLR_CLIP, N_ITER, TurboCode, qpp_permutation

__all__ = [
    "LLR_CLIP",
    "MODULATION_NAMES",
    "N_ITER",
    "RATES",
    "CodedBlock",
    "Constellation",
    "McsMode",
    "TurboCode",
    "decode",
    "demap_llr",
    "encode",
    "get_constellation",
    "info_length",
    "map_bits",
    "parse_mcs",
    "qpp_permutation",
]


def encode(info_bits, block: CodedBlock) -> np.ndarray:
    """Information bits ``(..., K)`` to rate-matched coded bits ``(..., E)``."""
    bits = np.asarray(info_bits, dtype=np.uint8)
    if bits.shape[-1] != block.K:
        raise ValueError(f"expected {block.K} information bits, got {bits.shape[-1]}")
    return block.encode(bits.reshape(-1, block.K)).reshape(bits.shape[:-1] + (block.E,))


def decode(llr, block: CodedBlock, tx_bits=None):
    """Decode rate-matched LLRs; returns ``(bits, block_ok)``.

    There is no CRC: ``block_ok`` compares against the transmitted bits when
    they are given and is ``None`` otherwise.
    """
    llr = np.asarray(llr, dtype=float)
    if llr.shape[-1] != block.E:
        raise ValueError(f"expected {block.E} LLRs, got {llr.shape[-1]}")
    bits = block.decode(llr.reshape(-1, block.E)).reshape(llr.shape[:-1] + (block.K,))
    if tx_bits is None:
        return bits, None
    ok = np.all(bits == np.asarray(tx_bits), axis=-1)
    return bits, ok


def map_bits(bits, m: int) -> np.ndarray:
    return get_constellation(m).map(bits)


def demap_llr(symbols, noise_var, m: int) -> np.ndarray:
    return get_constellation(m).demap(symbols, noise_var)
