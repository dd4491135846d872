"""Channel realisations and per-frequency-sample SINR.

Noise convention: ``sigma2`` is the complex noise variance per time sample;
with unit-energy symbols ``SNR_dB = 10*log10(1/sigma2)``.  Channel
frequency responses are N-point DFTs of the tap vector, so that
``mean(|H|**2) == sum(|h|**2)``.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "AWGN",
    "FLAT_RAYLEIGH",
    "ChannelRealization",
    "LinkGain",
    "TdlProfile",
    "apply_channel",
    "compute_sinr",
    "default_tdl_profile",
    "draw_channel",
    "draw_channels",
    "draw_taps",
    "frequency_response",
    "read_snapshots",
    "write_snapshots",
]


@dataclass(frozen=True)
class TdlProfile:
    """Tapped-delay-line power-delay profile (delays in samples)."""

    delays: tuple[int, ...]
    powers: tuple[float, ...]
    name: str = "tdl"

    def __post_init__(self):
        if len(self.delays) != len(self.powers) or not self.delays:
            raise ValueError("delays and powers must be non-empty and of equal length")
        if any(d < 0 for d in self.delays):
            raise ValueError("tap delays must be non-negative")
        if any(p < 0 for p in self.powers) or abs(sum(self.powers) - 1.0) > 1e-9:
            raise ValueError("tap powers must be non-negative and sum to 1")

    @property
    def max_delay(self) -> int:
        return max(self.delays)

    def rms_delay_spread(self, fs: float) -> float:
        d = np.asarray(self.delays) / fs
        p = np.asarray(self.powers)
        mean = np.sum(p * d)
        return float(np.sqrt(np.sum(p * d**2) - mean**2))


AWGN = "awgn"
FLAT_RAYLEIGH = "rayleigh"


def default_tdl_profile(fs: float = 30.72e6, rms_delay: float = 0.5e-6, n_taps: int = 6,
                        spacing: int = 12) -> TdlProfile:
    """Exponentially decaying profile with ``n_taps`` taps every ``spacing`` samples.

    The decay rate is solved so that the RMS delay spread equals
    ``rms_delay`` at sampling rate ``fs``.  The defaults (0.5 us at
    30.72 MHz) put the last tap at 60 samples.
    """
    idx = np.arange(n_taps)
    delays = spacing * idx

    def spread(decay):
        p = np.exp(-decay * idx)
        return TdlProfile(tuple(int(d) for d in delays), tuple(p / p.sum())).rms_delay_spread(fs)

    decay = brentq(lambda b: spread(b) - rms_delay, 1e-6, 50.0)
    p = np.exp(-decay * idx)
    p /= p.sum()
    return TdlProfile(delays=tuple(int(d) for d in delays), powers=tuple(float(x) for x in p),
                      name=f"exp{n_taps}")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One block-static channel: taps (for time-domain filtering) and H on N bins."""

    taps: np.ndarray
    delays: np.ndarray
    H: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        if not np.all(np.asarray(self.sigma2) > 0):
            raise ValueError("sigma2 must be positive")

    @property
    def N(self) -> int:
        return self.H.shape[-1]

    def with_sigma2(self, sigma2: float) -> "ChannelRealization":
        return ChannelRealization(self.taps, self.delays, self.H, sigma2)


def frequency_response(taps: np.ndarray, delays: np.ndarray, N: int, bins=None) -> np.ndarray:
    """N-point DFT of the tap vector(s), optionally only at ``bins``."""
    f = np.arange(N) if bins is None else np.asarray(bins)
    phase = np.exp(-2j * np.pi * np.outer(f, delays) / N)
    return np.asarray(taps) @ phase.T


def draw_channel(kind, N: int, rng: np.random.Generator, sigma2: float = 1.0,
                 n_cp: int | None = None) -> ChannelRealization:
    """Draw a channel of ``kind``: ``"awgn"``, ``"rayleigh"`` or a :class:`TdlProfile`."""
    if kind == AWGN:
        taps, delays = np.ones(1, complex), np.zeros(1, np.int64)
    elif kind == FLAT_RAYLEIGH:
        taps = (rng.standard_normal(1) + 1j * rng.standard_normal(1)) / np.sqrt(2)
        delays = np.zeros(1, np.int64)
    elif isinstance(kind, TdlProfile):
        if n_cp is not None and kind.max_delay >= n_cp:
            warnings.warn(
                f"tap delay {kind.max_delay} exceeds the cyclic prefix ({n_cp} samples)",
                stacklevel=2,
            )
        L = len(kind.delays)
        amp = np.sqrt(np.asarray(kind.powers) / 2)
        taps = amp * (rng.standard_normal(L) + 1j * rng.standard_normal(L))
        delays = np.asarray(kind.delays, np.int64)
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    H = np.full(N, taps[0], complex) if delays.max() == 0 else frequency_response(taps, delays, N)
    return ChannelRealization(taps=taps, delays=delays, H=H, sigma2=sigma2)


def draw_channels(kind, N: int, rng: np.random.Generator, count: int, sigma2=1.0) -> ChannelRealization:
    """``count`` independent realisations of ``kind`` stacked along a leading axis.

    Realisations are drawn row by row, so the first ``n`` of a larger batch
    equal a batch of ``n`` drawn from the same generator state.
    """
    taps, delays = draw_taps(kind, rng, count)
    return ChannelRealization(taps=taps, delays=delays, H=frequency_response(taps, delays, N), sigma2=sigma2)


def draw_taps(kind, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
    """``(count, L)`` complex tap gains and the ``L`` shared delays."""
    if kind == AWGN:
        return np.ones((count, 1), complex), np.zeros(1, np.int64)
    if kind == FLAT_RAYLEIGH:
        powers, delays = np.ones(1), np.zeros(1, np.int64)
    elif isinstance(kind, TdlProfile):
        powers, delays = np.asarray(kind.powers), np.asarray(kind.delays, np.int64)
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    z = rng.standard_normal((count, len(delays), 2))
    return np.sqrt(powers / 2) * (z[..., 0] + 1j * z[..., 1]), delays


def apply_channel(x: np.ndarray, ch: ChannelRealization, rng: np.random.Generator | None,
                  n_cp: int | None = None) -> np.ndarray:
    """Filter a CP-prefixed block with the channel taps and add AWGN.

    The linear convolution is truncated to the input length, so once the
    prefix is removed the block has seen a circular convolution as long as
    the largest delay does not exceed the prefix.  ``rng=None`` means
    noiseless.

    ``ch.taps`` may carry leading batch axes (one tap set per block, shared
    delays) and ``ch.sigma2`` may be an array broadcastable against the
    batch; both line up with the leading axes of ``x``.
    """
    x = np.asarray(x)
    if n_cp is not None and ch.delays.max() > n_cp:
        warnings.warn("channel delay spread exceeds the cyclic prefix", stacklevel=2)
    y = np.zeros(x.shape, dtype=complex)
    n = x.shape[-1]
    taps = np.asarray(ch.taps)
    for i, d in enumerate(ch.delays):
        h = taps[..., i, None]
        if d == 0:
            y += h * x
        else:
            y[..., d:] += h * x[..., : n - d]
    if rng is not None:
        scale = np.sqrt(np.asarray(ch.sigma2, dtype=float) / 2)
        if scale.ndim:
            scale = scale[..., None]
        y += scale * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    return y


@dataclass(frozen=True, eq=False)
class LinkGain:
    """Transmit power, path loss (linear gain) and frequency response of one link."""

    p_tx: float
    p_loss: float
    H: np.ndarray

    def __post_init__(self):
        if not self.p_tx > 0:
            raise ValueError("p_tx must be positive")
        if not 0 < self.p_loss <= 1:
            raise ValueError("p_loss must lie in (0, 1]")

    def power(self, allocation) -> np.ndarray:
        return self.p_tx * self.p_loss * np.abs(np.asarray(self.H)[..., allocation]) ** 2


def compute_sinr(serving: LinkGain, interferers, sigma2: float, allocation) -> np.ndarray:
    """Post-processing SINR per allocated frequency sample.

    ``gamma[n] = S[n] / (sigma2 + sum_q I_q[n])`` with ``S`` and ``I_q`` the
    received powers ``p_tx * p_loss * |H[n]|**2`` of the serving link and
    each interferer.
    """
    allocation = np.asarray(allocation)
    if allocation.size == 0:
        raise ValueError("empty allocation")
    denom = np.full(allocation.shape, float(sigma2))
    for q in interferers:
        denom = denom + q.power(allocation)
    return serving.power(allocation) / denom


_MAGIC = b"GFDMCHN1"


def write_snapshots(path, H: np.ndarray) -> None:
    """Write channel responses (count x N complex) in the binary snapshot format.

    Header: 8-byte magic, uint32 N, uint32 count (little-endian); then
    ``count`` records of N (re, im) little-endian float64 pairs.
    """
    H = np.atleast_2d(np.asarray(H, dtype=np.complex128))
    count, N = H.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<II", N, count))
        fh.write(H.astype("<c16").tobytes())


def read_snapshots(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != _MAGIC:
        raise ValueError(f"{path}: not a channel snapshot file")
    N, count = struct.unpack("<II", data[8:16])
    body = data[16:]
    if len(body) != 16 * N * count:
        raise ValueError(f"{path}: expected {count} records of {N} samples")
    return np.frombuffer(body, dtype="<c16").reshape(count, N).astype(np.complex128)
