"""Gray-labelled square QAM constellations and soft demapping.

Labelling: the ``m`` bits of a symbol are split into in-phase bits
(``b[0], b[2], ...``) and quadrature bits (``b[1], b[3], ...``).  On each
axis the first bit selects the sign (0 = positive) and the remaining bits
the magnitude, Gray coded so that neighbouring amplitude levels differ in
one bit.  With this convention QPSK maps ``00 -> (1 + 1j)/sqrt(2)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .turbo import LLR_CLIP

__all__ = ["Constellation", "get_constellation"]


def _gray_pam(n_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes (most positive first) and their Gray labels as bit rows."""
    L = 1 << n_bits
    idx = np.arange(L)
    amplitude = (L - 1 - 2 * idx).astype(float)
    gray = idx ^ (idx >> 1)
    bits = (gray[:, None] >> np.arange(n_bits - 1, -1, -1)[None, :]) & 1
    return amplitude, bits.astype(np.uint8)


class Constellation:
    """Unit-energy Gray QAM with ``2**m`` points (m even)."""

    def __init__(self, m: int):
        if m not in (2, 4, 6):
            raise ValueError(f"unsupported modulation order {m}")
        self.m = m
        half = m // 2
        amp, labels = _gray_pam(half)
        self.scale = np.sqrt(2 * np.mean(amp**2))
        self.axis_levels = amp / self.scale
        self.axis_labels = labels  # (levels, half)
        n = 1 << m
        bits = ((np.arange(n)[:, None] >> np.arange(m - 1, -1, -1)[None, :]) & 1).astype(np.uint8)
        self.labels = bits  # label of point i is bits[i]
        self.points = self._map_rows(bits)

    def _axis_index(self, axis_bits: np.ndarray) -> np.ndarray:
        # Gray label -> level index
        half = axis_bits.shape[-1]
        g = np.zeros(axis_bits.shape[:-1], dtype=np.int64)
        for i in range(half):
            g = (g << 1) | axis_bits[..., i]
        idx = g.copy()
        shift = g >> 1
        while np.any(shift):
            idx ^= shift
            shift >>= 1
        return idx

    def _map_rows(self, bits: np.ndarray) -> np.ndarray:
        i_idx = self._axis_index(bits[..., 0::2])
        q_idx = self._axis_index(bits[..., 1::2])
        return self.axis_levels[i_idx] + 1j * self.axis_levels[q_idx]

    def map(self, bits: np.ndarray) -> np.ndarray:
        """Map ``(..., n*m)`` bits to ``(..., n)`` complex symbols."""
        bits = np.asarray(bits, dtype=np.int64)
        if bits.shape[-1] % self.m:
            raise ValueError(f"bit count {bits.shape[-1]} is not a multiple of m={self.m}")
        groups = bits.reshape(bits.shape[:-1] + (-1, self.m))
        return self._map_rows(groups)

    def demap(self, symbols: np.ndarray, noise_var) -> np.ndarray:
        """Max-log LLRs (positive favours bit 0), clipped to +-50.

        ``noise_var`` is the complex noise variance per symbol and broadcasts
        against ``symbols``.  Square QAM separates into two PAM axes, each
        with half the noise variance.
        """
        symbols = np.asarray(symbols)
        noise_var = np.broadcast_to(np.asarray(noise_var, dtype=float), symbols.shape)
        if np.any(noise_var <= 0):
            raise ValueError("noise variance must be positive")
        half = self.m // 2
        llr = np.empty(symbols.shape + (self.m,))
        for axis, comp in enumerate((symbols.real, symbols.imag)):
            d2 = (comp[..., None] - self.axis_levels) ** 2  # (..., levels)
            for j in range(half):
                one = self.axis_labels[:, j] == 1
                llr[..., 2 * j + axis] = (
                    d2[..., one].min(axis=-1) - d2[..., ~one].min(axis=-1)
                ) / noise_var
        np.clip(llr, -LLR_CLIP, LLR_CLIP, out=llr)
        return llr.reshape(symbols.shape[:-1] + (-1,))

    def demap_exact(self, symbols: np.ndarray, noise_var) -> np.ndarray:
        """Exact log-sum-exp LLRs over all 2**m points (reference, unclipped)."""
        symbols = np.asarray(symbols)
        noise_var = np.broadcast_to(np.asarray(noise_var, dtype=float), symbols.shape)
        metric = -np.abs(symbols[..., None] - self.points) ** 2 / noise_var[..., None]
        out = np.empty(symbols.shape + (self.m,))
        for j in range(self.m):
            one = self.labels[:, j] == 1
            out[..., j] = np.logaddexp.reduce(metric[..., ~one], axis=-1) - np.logaddexp.reduce(
                metric[..., one], axis=-1
            )
        return out.reshape(symbols.shape[:-1] + (-1,))


@lru_cache(maxsize=None)
def get_constellation(m: int) -> Constellation:
    return Constellation(m)
