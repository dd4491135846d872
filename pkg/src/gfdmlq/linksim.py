"""Bit-level GFDM link: the ground truth the abstraction is calibrated and judged against.

One packet is one GFDM block::

    bits -> turbo encode -> rate match -> QAM map -> GFDM modulate -> add CP
         -> channel + AWGN (+ Gaussian interference) -> remove CP
         -> ZF equalise -> ZF demodulate -> max-log demap -> turbo decode

Block errors are judged against the transmitted bits (no CRC).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import AWGN, ChannelRealization, apply_channel, draw_channel
from .fec.mcs import CodedBlock, McsMode
from .modem import (
    GfdmConfig,
    _modem,
    add_cp,
    demodulate_zf,
    equalize_zf,
    modulate_fast,
    remove_cp,
    zf_noise_weights,
)

__all__ = ["GRANULARITIES", "LinkSimulator", "PacketStats", "allocation_bins", "sinr_units", "snr_to_sigma2"]

GRANULARITIES = ("sample", "symbol")


def snr_to_sigma2(snr_db) -> np.ndarray:
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)


def allocation_bins(config: GfdmConfig) -> np.ndarray:
    """The K_on*M frequency samples whose SINR describes a coded block.

    These are the M bins of one subcarrier spacing around each active
    subcarrier (the band of the orthogonal pulse), whatever the filter.
    """
    M, N = config.M, config.N
    band = np.arange(-(M // 2), M - M // 2)  # matches the half-open [-1/2, 1/2)
    act = np.asarray(config.active)
    return np.sort(((band[None, :] - act[:, None] * M) % N).ravel())


@dataclass
class PacketStats:
    packets: int = 0
    block_errors: int = 0
    bit_errors: int = 0
    bits: int = 0

    @property
    def bler(self) -> float:
        return self.block_errors / self.packets if self.packets else float("nan")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")

    def __iadd__(self, other: "PacketStats"):
        self.packets += other.packets
        self.block_errors += other.block_errors
        self.bit_errors += other.bit_errors
        self.bits += other.bits
        return self


def sinr_units(sinr, config: GfdmConfig, granularity: str = "sample") -> np.ndarray:
    """SINR values handed to the effective-SINR mapping, from one value per frequency sample.

    ``sinr`` covers all N samples on its last axis.  ``"sample"`` keeps the
    allocated samples.  ``"symbol"`` returns the post-ZF SINR of each active
    subcarrier, which is what all M of its sub-symbols see at the demapper:
    the ZF receiver spreads every sample's noise over the whole subcarrier,
    so one deep null degrades M symbols rather than one.
    """
    sinr = np.asarray(sinr, dtype=float)
    if granularity == "sample":
        return sinr[..., allocation_bins(config)]
    if granularity != "symbol":
        raise ValueError(f"granularity must be one of {GRANULARITIES}, got {granularity!r}")
    W = zf_noise_weights(config)[np.asarray(config.active)]
    with np.errstate(divide="ignore"):
        return 1.0 / ((1.0 / sinr) @ W.T)


class LinkSimulator:
    """Packet-level simulator for one (waveform, MCS) pair."""

    batch = 50

    def __init__(self, config: GfdmConfig, mcs: McsMode):
        _modem(config).check_invertible()
        self.config = config
        self.mcs = mcs
        self.block = CodedBlock(mcs, config.n_symbols)
        self.active = np.asarray(config.active)
        self.weights = zf_noise_weights(config)[self.active]  # (K_on, N)

    @property
    def info_bits(self) -> int:
        return self.block.K

    def symbol_variance(self, H, noise_bin) -> np.ndarray:
        """Post-ZF noise variance of every data symbol, shape ``(..., K_on*M)``."""
        v = np.asarray(noise_bin, dtype=float) / np.abs(np.asarray(H)) ** 2
        return np.repeat(v @ self.weights.T, self.config.M, axis=-1)

    def run(self, n_packets: int, rng: np.random.Generator, sigma2: float,
            channel: ChannelRealization | None = None, interference=None,
            stop_errors: int | None = None) -> PacketStats:
        """Simulate ``n_packets`` packets through one static channel.

        ``interference`` is an optional per-frequency-sample variance
        (length N, same units as ``sigma2``) added as Gaussian noise.
        With ``stop_errors`` the run ends after the batch in which that many
        block errors have been collected.
        """
        cfg = self.config
        if channel is None:
            channel = draw_channel(AWGN, cfg.N, rng)
        channel = channel.with_sigma2(sigma2)
        noise_bin = np.full(cfg.N, float(sigma2))
        if interference is not None:
            interference = np.asarray(interference, dtype=float)
            noise_bin = noise_bin + interference
        sym_var = self.symbol_variance(channel.H, noise_bin)
        stats = PacketStats()
        while stats.packets < n_packets:
            B = min(self.batch, n_packets - stats.packets)
            bits = rng.integers(0, 2, (B, self.block.K), dtype=np.uint8)
            wrong = self._transmit(bits, rng, channel, interference, sym_var)
            stats += PacketStats(
                packets=B,
                block_errors=int(np.count_nonzero(wrong.any(axis=1))),
                bit_errors=int(np.count_nonzero(wrong)),
                bits=int(bits.size),
            )
            if stop_errors is not None and stats.block_errors >= stop_errors:
                break
        return stats

    def run_packets(self, rng: np.random.Generator, channels: ChannelRealization, sigma2,
                    interference=None) -> tuple[np.ndarray, np.ndarray]:
        """One packet per channel realisation in ``channels`` (taps/H batched).

        ``sigma2`` is a scalar or one value per packet; ``interference`` is
        ``None`` or a ``(packets, N)`` array of per-sample variances.
        Returns per-packet ``(block_error, bit_errors)``.
        """
        cfg = self.config
        H = np.atleast_2d(channels.H)
        P = H.shape[0]
        sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), (P,))
        noise_bin = np.repeat(sigma2[:, None], cfg.N, axis=1)
        if interference is not None:
            interference = np.asarray(interference, dtype=float).reshape(P, cfg.N)
            noise_bin = noise_bin + interference
        sym_var = self.symbol_variance(H, noise_bin)
        taps = np.asarray(channels.taps).reshape(P, -1)
        block_err = np.zeros(P, dtype=bool)
        bit_err = np.zeros(P, dtype=np.int64)
        for a in range(0, P, self.batch):
            sl = slice(a, min(a + self.batch, P))
            B = sl.stop - sl.start
            bits = rng.integers(0, 2, (B, self.block.K), dtype=np.uint8)
            ch = ChannelRealization(taps[sl], channels.delays, H[sl], sigma2[sl])
            inter = None if interference is None else interference[sl]
            wrong = self._transmit(bits, rng, ch, inter, sym_var[sl])
            block_err[sl] = wrong.any(axis=1)
            bit_err[sl] = wrong.sum(axis=1)
        return block_err, bit_err

    def _transmit(self, bits, rng, channel, interference, sym_var) -> np.ndarray:
        """Send ``bits`` (B, K_info) through the chain; returns the bit-error mask."""
        cfg = self.config
        K, M = cfg.K, cfg.M
        B = bits.shape[0]
        symbols = self.block.modulate(bits)
        grid = np.zeros((B, K, M), dtype=complex)
        grid[:, self.active, :] = symbols.reshape(B, cfg.K_on, M)
        tx = add_cp(modulate_fast(grid, cfg), cfg)
        rx = remove_cp(apply_channel(tx, channel, rng), cfg)
        if interference is not None:
            z = rng.standard_normal((B, cfg.N)) + 1j * rng.standard_normal((B, cfg.N))
            z *= np.sqrt(interference / 2)
            rx = rx + np.fft.ifft(z, axis=-1) * np.sqrt(cfg.N)
        eq = equalize_zf(rx, channel.H, cfg)
        d_hat = demodulate_zf(eq, cfg)[:, self.active, :].reshape(B, -1)
        llr = self.block.constellation.demap(d_hat, sym_var)
        return self.block.decode(llr) != bits
