"""BER/BLER versus SNR sweeps over a channel ensemble, for both methods.

Both methods see the same ensemble of block-static channel realisations.
Curves are ensemble averages: at each SNR every realisation contributes
the same number of packets (bit-level) or one predicted BLER (abstraction).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .channel import AWGN, FLAT_RAYLEIGH, ChannelRealization, TdlProfile, default_tdl_profile, draw_channels
from .fec.mcs import McsMode
from .linkquality.esm import esinr_miesm
from .linkquality.lut import BlerLut, predict_ber, predict_bler
from .linkquality.si import SiTable
from .linksim import LinkSimulator, sinr_units, snr_to_sigma2
from .modem import GfdmConfig
from .parallel import parallel_map
from .rng import substream

__all__ = [
    "CHANNEL_KINDS",
    "SweepResult",
    "abstraction_sweep",
    "bitlevel_sweep",
    "channel_kind",
    "draw_ensemble",
    "ensemble_gains",
]

CHANNEL_KINDS = ("awgn", "rayleigh", "tdl")


def channel_kind(name: str, profile: TdlProfile | None = None):
    if name == "awgn":
        return AWGN
    if name == "rayleigh":
        return FLAT_RAYLEIGH
    if name == "tdl":
        return profile or default_tdl_profile()
    raise ValueError(f"unknown channel {name!r}; expected one of {CHANNEL_KINDS}")


def draw_ensemble(name: str, config: GfdmConfig, n_real: int, seed: int,
                  profile: TdlProfile | None = None) -> ChannelRealization:
    """``n_real`` realisations (one for AWGN), independent of filter and MCS."""
    if name == "awgn":
        n_real = 1
    rng = substream(seed, "ensemble", name, config.N)
    return draw_channels(channel_kind(name, profile), config.N, rng, n_real)


def ensemble_gains(ensemble: ChannelRealization, config: GfdmConfig, granularity: str = "sample") -> np.ndarray:
    """Per-realisation gains that scale linearly with SNR into MIESM inputs.

    ``|H|^2`` on the allocated samples, shape ``(R, K_on*M)``, or with
    ``granularity="symbol"`` the post-ZF gain per active subcarrier,
    shape ``(R, K_on)``.
    """
    return sinr_units(np.abs(np.atleast_2d(ensemble.H)) ** 2, config, granularity)


@dataclass
class SweepResult:
    method: str
    mcs: McsMode
    filter_label: str
    snr_db: np.ndarray
    bler: np.ndarray
    ber: np.ndarray
    packets: np.ndarray | None = None  # per SNR point, summed over realisations

    def rows(self):
        for s, b, bl in zip(self.snr_db, self.ber, self.bler):
            yield (float(s), self.method, self.mcs.name, self.filter_label, float(b), float(bl))


def _bit_point(snr, config, mcs, ensemble, packets, seed, stop_errors):
    sim = LinkSimulator(config, mcs)
    sigma2 = float(snr_to_sigma2(snr))
    taps = np.atleast_2d(ensemble.taps)
    H = np.atleast_2d(ensemble.H)
    bler, ber, n = [], [], 0
    for r in range(H.shape[0]):
        ch = ChannelRealization(taps[r], ensemble.delays, H[r])
        rng = substream(seed, "bitlevel", mcs.name, config.filter_label, f"{snr:.4f}", r)
        st = sim.run(packets, rng, sigma2, channel=ch, stop_errors=stop_errors)
        bler.append(st.bler)
        ber.append(st.ber)
        n += st.packets
    return float(np.mean(bler)), float(np.mean(ber)), n


def bitlevel_sweep(config: GfdmConfig, mcs: McsMode, snr_db, ensemble: ChannelRealization,
                   packets: int, seed: int, jobs: int = 1, stop_errors: int | None = None) -> SweepResult:
    """Monte-Carlo BLER/BER with ``packets`` packets per realisation and SNR point."""
    snr_db = np.asarray(snr_db, dtype=float)
    fn = partial(_bit_point, config=config, mcs=mcs, ensemble=ensemble, packets=packets, seed=seed,
                 stop_errors=stop_errors)
    out = parallel_map(fn, [float(s) for s in snr_db], jobs)
    bler, ber, n = (np.array(v) for v in zip(*out))
    return SweepResult("bitlevel", mcs, config.filter_label, snr_db, bler, ber, n.astype(int))


def abstraction_sweep(config: GfdmConfig, mcs: McsMode, snr_db, ensemble: ChannelRealization,
                      lut: BlerLut, table: SiTable, gamma_code: float = 1.0,
                      mode: str = "snr", granularity: str = "sample") -> SweepResult:
    """Predicted BLER/BER: MIESM per realisation, LUT lookup, ensemble mean."""
    snr_db = np.asarray(snr_db, dtype=float)
    gains = ensemble_gains(ensemble, config, granularity)
    bler = np.empty(snr_db.size)
    ber = np.empty(snr_db.size)
    for i, s in enumerate(snr_db):
        esinr = esinr_miesm(gains * 10 ** (s / 10), table, gamma_code, mode)
        bler[i] = predict_bler(esinr, lut).mean()
        ber[i] = predict_ber(esinr, lut).mean()
    return SweepResult("abstraction", mcs, config.filter_label, snr_db, bler, ber)
