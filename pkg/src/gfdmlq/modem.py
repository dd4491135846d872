"""GFDM modem: prototype filters, modulation, cyclic prefix and ZF reception.

A GFDM block carries ``K`` subcarriers times ``M`` sub-symbols in ``N = K*M``
samples::

    x[n] = sum_k sum_m g[(n - m*K) mod N] * exp(-2j*pi*k*n/K) * d[k, m]

Conventions used throughout the package:

* prototype filters have unit energy;
* DFTs are the numpy (non-unitary) ones, paired so that forward/inverse
  scalings cancel;
* subcarrier ``k`` occupies the frequency bins centred on ``-k*M mod N``
  (the sign follows the ``exp(-2j*pi*k*n/K)`` up-conversion above).

Two transmitter paths are provided.  :func:`modulate_direct` evaluates the
double sum literally and is kept as a test oracle; :func:`modulate_fast`
works in the frequency domain.  The zero-forcing receiver exploits the fact
that, for each bin residue ``r = f mod M``, the modulation matrix reduces to
a K x K circulant-like system which is diagonalised by a K-point DFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "GfdmConfig",
    "PrototypeFilter",
    "SingularChannel",
    "SingularModulation",
    "add_cp",
    "build_filter",
    "check_invertible",
    "demodulate_zf",
    "equalize_zf",
    "modulate_direct",
    "modulate_fast",
    "modulation_matrix",
    "remove_cp",
    "zf_noise_weights",
]

COND_LIMIT = 1e12
H_MIN = 1e-12


class SingularModulation(ValueError):
    """The modulation matrix of a configuration is (numerically) singular."""


class SingularChannel(ValueError):
    """A frequency sample needed by the receiver has a zero channel gain."""


def centered_active_set(K: int, K_on: int) -> tuple[int, ...]:
    # symmetric around DC: 0, 1, ..., and K-1, K-2, ...
    lo = K_on // 2
    return tuple(sorted(k % K for k in range(-lo, K_on - lo)))


@dataclass(frozen=True)
class GfdmConfig:
    """Waveform geometry.

    ``filter`` is ``"dirichlet"`` or ``"rc"``; ``rolloff`` only matters for
    ``"rc"``.  ``active`` defaults to all subcarriers, or to a DC-centred set
    of ``K_on`` subcarriers when ``K_on`` is given.
    """

    K: int = 64
    M: int = 9
    n_cp: int = 0
    filter: str = "dirichlet"
    rolloff: float = 0.0
    K_on: int | None = None
    active: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if not 0 <= self.n_cp <= self.K * self.M:
            raise ValueError(f"n_cp must lie in [0, N], got {self.n_cp}")
        if self.filter not in ("dirichlet", "rc"):
            raise ValueError(f"unknown filter {self.filter!r}")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError(f"roll-off must lie in [0, 1], got {self.rolloff}")
        if self.active is None:
            k_on = self.K if self.K_on is None else self.K_on
            if not 1 <= k_on <= self.K:
                raise ValueError(f"K_on must lie in [1, K], got {k_on}")
            object.__setattr__(self, "active", centered_active_set(self.K, k_on))
        else:
            act = tuple(sorted(int(k) for k in self.active))
            if len(set(act)) != len(act) or any(not 0 <= k < self.K for k in act):
                raise ValueError("active subcarriers must be distinct and < K")
            if not act:
                raise ValueError("active set is empty")
            object.__setattr__(self, "active", act)
        object.__setattr__(self, "K_on", len(self.active))

    @property
    def N(self) -> int:
        return self.K * self.M

    @property
    def filter_label(self) -> str:
        if self.filter == "dirichlet":
            return "Dirichlet"
        return f"RC-{self.rolloff:g}"

    @property
    def n_symbols(self) -> int:
        """Data symbols per block (active subcarriers times sub-symbols)."""
        return self.K_on * self.M

    def as_dict(self) -> dict:
        return {
            "K": self.K,
            "M": self.M,
            "n_cp": self.n_cp,
            "filter": self.filter,
            "rolloff": float(self.rolloff),
            "active": list(self.active),
        }


@dataclass(frozen=True, eq=False)
class PrototypeFilter:
    """Unit-energy prototype pulse ``g`` and its N-point DFT ``G``."""

    g: np.ndarray
    G: np.ndarray

    @property
    def support(self) -> np.ndarray:
        """Indices of the non-zero spectral coefficients."""
        return np.flatnonzero(np.abs(self.G) > 1e-12 * np.abs(self.G).max())


def _spectral_shape(config: GfdmConfig) -> np.ndarray:
    N, M = config.N, config.M
    nu = np.fft.fftfreq(N, d=1.0 / N) / M  # bin frequency in subcarrier spacings
    alpha = config.rolloff if config.filter == "rc" else 0.0
    if alpha == 0.0:
        # half-open band [-1/2, 1/2): exactly M bins for every M
        return ((nu >= -0.5) & (nu < 0.5)).astype(float)
    lo, hi = (1 - alpha) / 2, (1 + alpha) / 2
    a = np.abs(nu)
    shape = np.zeros(N)
    shape[a <= lo] = 1.0
    ramp = (a > lo) & (a <= hi)
    shape[ramp] = 0.5 * (1 + np.cos(np.pi / alpha * (a[ramp] - lo)))
    return shape


def build_filter(config: GfdmConfig) -> PrototypeFilter:
    """Construct the prototype filter of ``config``.

    Both filters are defined in the frequency domain over the M bins of one
    subcarrier spacing: Dirichlet is a rectangle of exactly M bins, the
    raised cosine tapers with roll-off ``alpha`` into the neighbouring
    subcarriers (at most one on each side).  ``alpha = 0`` reproduces the
    Dirichlet pulse.
    """
    shape = _spectral_shape(config)
    g = np.fft.ifft(shape)
    # symmetric spectra (odd M, or any roll-off > 0) give a real pulse; the
    # half-open Dirichlet band of even M does not
    if np.max(np.abs(g.imag)) < 1e-14 * np.max(np.abs(g.real)):
        g = g.real
    g /= np.sqrt(np.sum(np.abs(g) ** 2))
    return PrototypeFilter(g=g, G=np.fft.fft(g))


def _check_grid(grid: np.ndarray, config: GfdmConfig) -> np.ndarray:
    grid = np.asarray(grid)
    if grid.shape[-2:] != (config.K, config.M):
        raise ValueError(
            f"grid shape {grid.shape[-2:]} does not match (K, M) = ({config.K}, {config.M})"
        )
    return grid


def modulation_matrix(filt: PrototypeFilter, config: GfdmConfig) -> np.ndarray:
    """N x N matrix A with ``x = A @ d.reshape(-1)`` (column index k*M + m)."""
    K, M, N = config.K, config.M, config.N
    if filt.g.shape != (N,):
        raise ValueError("filter length does not match N")
    n = np.arange(N)
    A = np.empty((N, K * M), dtype=complex)
    for k in range(K):
        carrier = np.exp(-2j * np.pi * k * n / K)
        for m in range(M):
            A[:, k * M + m] = filt.g[(n - m * K) % N] * carrier
    return A


def modulate_direct(grid: np.ndarray, filt: PrototypeFilter, config: GfdmConfig) -> np.ndarray:
    """Evaluate the GFDM sum term by term (reference path, O(N*K*M^2))."""
    grid = _check_grid(grid, config)
    if filt.g.shape != (config.N,):
        raise ValueError("filter length does not match N")
    K, M, N = config.K, config.M, config.N
    n = np.arange(N)
    x = np.zeros(grid.shape[:-2] + (N,), dtype=complex)
    for k in range(K):
        carrier = np.exp(-2j * np.pi * k * n / K)
        for m in range(M):
            pulse = filt.g[(n - m * K) % N] * carrier
            x += grid[..., k, m, None] * pulse
    return x


class _FastModem:
    """Precomputed frequency-domain quantities for one configuration."""

    def __init__(self, config: GfdmConfig):
        self.config = config
        self.filter = build_filter(config)
        K, M, N = config.K, config.M, config.N
        G = self.filter.G
        s = self.filter.support
        self.support = s
        self.G_support = G[s]
        self.residue = s % M
        # bin of each (subcarrier, support coefficient) pair
        self.bins = (s[None, :] - (np.arange(K) * M)[:, None]) % N
        # c[r, q] = G[q*M + r]; its K-point DFT diagonalises each residue class
        self.C_hat = np.fft.fft(G.reshape(K, M).T, axis=-1)
        mag = np.abs(self.C_hat)
        self.cond = np.inf if mag.min() == 0 else mag.max() / mag.min()

    @cached_property
    def needed_bins(self) -> np.ndarray:
        """Frequency bins touched by at least one active subcarrier."""
        act = np.asarray(self.config.active)
        return np.unique(self.bins[act].ravel())

    def check_invertible(self):
        if not self.cond < COND_LIMIT:
            raise SingularModulation(
                f"modulation matrix for {self.config.filter_label}, K={self.config.K}, "
                f"M={self.config.M} has condition number {self.cond:.3g}"
            )


_MODEMS: dict[GfdmConfig, _FastModem] = {}


def _modem(config: GfdmConfig) -> _FastModem:
    modem = _MODEMS.get(config)
    if modem is None:
        modem = _MODEMS[config] = _FastModem(config)
    return modem


def check_invertible(config: GfdmConfig) -> float:
    """Condition number of the modulation matrix; raises :class:`SingularModulation` above 1e12."""
    modem = _modem(config)
    modem.check_invertible()
    return float(modem.cond)


def modulate_fast(grid: np.ndarray, config: GfdmConfig) -> np.ndarray:
    """Frequency-domain GFDM modulator.

    Each subcarrier's M sub-symbols go through an M-point DFT, are repeated
    periodically across the filter bandwidth, weighted by the filter's
    spectral coefficients and placed at the subcarrier position; one N-point
    inverse DFT then produces the time block.  Leading axes of ``grid`` are
    treated as a batch.
    """
    grid = _check_grid(grid, config)
    modem = _modem(config)
    D = np.fft.fft(grid, axis=-1)
    X = np.zeros(grid.shape[:-2] + (config.N,), dtype=complex)
    weights = modem.G_support
    for k in range(config.K):
        X[..., modem.bins[k]] += weights * D[..., k, modem.residue]
    return np.fft.ifft(X, axis=-1)


def demodulate_zf(block: np.ndarray, config: GfdmConfig) -> np.ndarray:
    """Zero-forcing GFDM demodulation: returns ``A^-1 x`` as a K x M grid.

    Raises :class:`SingularModulation` when the modulation matrix of
    ``config`` is not invertible.
    """
    block = np.asarray(block)
    K, M, N = config.K, config.M, config.N
    if block.shape[-1] != N:
        raise ValueError(f"expected {N} samples without CP, got {block.shape[-1]}")
    modem = _modem(config)
    modem.check_invertible()
    X = np.fft.fft(block, axis=-1).reshape(block.shape[:-1] + (K, M))  # [p, r]
    X_hat = np.fft.fft(X, axis=-2)  # [u, r]
    D_k = X_hat / modem.C_hat.T
    D = np.fft.fft(D_k, axis=-2) / K
    return np.fft.ifft(D, axis=-1)


def add_cp(block: np.ndarray, config: GfdmConfig) -> np.ndarray:
    """Prepend the last ``n_cp`` samples of the block."""
    block = np.asarray(block)
    if block.shape[-1] != config.N:
        raise ValueError(f"expected {config.N} samples, got {block.shape[-1]}")
    if config.n_cp == 0:
        return block.copy()
    return np.concatenate([block[..., -config.n_cp:], block], axis=-1)


def remove_cp(block: np.ndarray, config: GfdmConfig) -> np.ndarray:
    """Drop the cyclic prefix added by :func:`add_cp`."""
    block = np.asarray(block)
    if block.shape[-1] != config.N + config.n_cp:
        raise ValueError(
            f"expected {config.N + config.n_cp} samples with CP, got {block.shape[-1]}"
        )
    return block[..., config.n_cp:].copy()


def equalize_zf(received: np.ndarray, H: np.ndarray, config: GfdmConfig) -> np.ndarray:
    """One-tap frequency-domain ZF equaliser ``Y(f) = R(f) / H(f)``.

    Bins outside every active subcarrier's band whose gain is (numerically)
    zero are set to zero instead of raising.
    """
    received = np.asarray(received)
    H = np.asarray(H)
    if received.shape[-1] != config.N or H.shape[-1] != config.N:
        raise ValueError("received block and H must both have N samples")
    mag = np.abs(H)
    needed = _modem(config).needed_bins
    if np.any(mag[..., needed] < H_MIN):
        raise SingularChannel("channel gain below 1e-12 on an allocated frequency sample")
    R = np.fft.fft(received, axis=-1)
    safe = np.where(mag < H_MIN, 1.0, H)
    Y = np.where(mag < H_MIN, 0.0, R / safe)
    return np.fft.ifft(Y, axis=-1)


def zf_noise_weights(config: GfdmConfig) -> np.ndarray:
    """K x N weights ``W`` of the post-ZF noise variance.

    If frequency bin ``f`` carries independent noise of variance ``v[f]``
    after equalisation (``sigma2 / |H[f]|**2`` for white noise), every
    sub-symbol of subcarrier ``k`` ends up with variance ``W[k] @ v``.  For
    an orthogonal (Dirichlet) filter each row sums to one.
    """
    K, M, N = config.K, config.M, config.N
    modem = _modem(config)
    modem.check_invertible()
    # D_k[r] = sum_p X[p*M + r] * beta[r, (k + p) mod K]
    beta = np.fft.fft(1.0 / modem.C_hat, axis=-1) / K
    mag2 = np.abs(beta) ** 2
    q = (np.arange(K)[:, None] + np.arange(K)[None, :]) % K
    W = np.empty((K, K, M))
    for r in range(M):
        W[:, :, r] = mag2[r][q]
    return (N / M**2) * W.reshape(K, N)
