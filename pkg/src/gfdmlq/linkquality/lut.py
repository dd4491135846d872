"""AWGN SNR -> BLER lookup tables calibrated on the bit-level chain."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import isotonic_regression

from ..fec.mcs import McsMode, parse_mcs
from ..linksim import LinkSimulator, snr_to_sigma2
from ..modem import GfdmConfig
from ..rng import substream
from ..textio import config_hash, read_table, write_table
from .si import build_si_table

log = logging.getLogger(__name__)

__all__ = [
    "BlerLut",
    "calibrate_bler_lut",
    "crossing_snr",
    "load_or_calibrate",
    "lut_key",
    "predict_ber",
    "predict_bler",
]

STEP_DB = 0.25
MAX_PACKETS = 2000
MIN_ERRORS = 100
SNR_WINDOW = (-10.0, 40.0)


class WaterfallNotFound(RuntimeError):
    """The SNR search left the allowed window without bracketing the waterfall."""


def lut_key(mcs: McsMode, config: GfdmConfig, seed: int = 1, max_packets: int = MAX_PACKETS,
            min_errors: int = MIN_ERRORS, step_db: float = STEP_DB) -> dict:
    """Everything the AWGN curve depends on."""
    return {
        "mcs": mcs.name,
        "seed": seed,
        "waveform": config.as_dict(),
        "max_packets": max_packets,
        "min_errors": min_errors,
        "step_db": step_db,
        "codec": "pccc-13-15-qpp-maxlogmap-8it-earlystop-stagger",
    }


@dataclass(frozen=True, eq=False)
class BlerLut:
    mcs: McsMode
    filter_label: str
    info_bits: int
    snr_db: np.ndarray
    bler: np.ndarray  # isotonic (non-increasing) fit
    raw_bler: np.ndarray
    packets: np.ndarray
    errors: np.ndarray
    ber: np.ndarray | None = None  # isotonic fit of the information-bit error rate
    bit_errors: np.ndarray | None = None
    config_hash: str = ""

    @property
    def floor(self) -> float:
        return 1.0 / (10 * int(self.packets.max()))

    @property
    def ber_floor(self) -> float:
        return 1.0 / (10 * int(self.packets.max()) * self.info_bits)

    def save(self, path) -> None:
        meta = {
            "kind": "bler_lut",
            "config_hash": self.config_hash,
            "mcs": self.mcs.name,
            "filter": self.filter_label,
            "info_bits": self.info_bits,
            "packets": int(self.packets.sum()),
        }
        rows = np.column_stack(
            [self.snr_db, self.bler, self.raw_bler, self.packets, self.errors, self.ber, self.bit_errors]
        )
        cols = ("snr_db", "bler", "raw_bler", "packets", "errors", "ber", "bit_errors")
        write_table(path, meta, cols, rows)

    @classmethod
    def load(cls, path) -> "BlerLut":
        meta, c = read_table(path)
        return cls(
            mcs=parse_mcs(meta["mcs"]),
            filter_label=meta["filter"],
            info_bits=int(meta["info_bits"]),
            snr_db=c["snr_db"],
            bler=c["bler"],
            raw_bler=c["raw_bler"],
            packets=c["packets"].astype(int),
            errors=c["errors"].astype(int),
            ber=c["ber"],
            bit_errors=c["bit_errors"].astype(int),
            config_hash=meta.get("config_hash", ""),
        )

    def snr_at(self, target: float) -> float:
        """SNR (dB) where the smoothed curve crosses ``target`` (log-linear)."""
        return crossing_snr(self.snr_db, self.bler, target, self.floor)


def crossing_snr(snr_db, bler, target: float, floor: float = 1e-6) -> float:
    """First SNR where a non-increasing BLER curve drops to ``target``.

    Interpolates linearly in ``(snr_db, log bler)``; NaN if never crossed.
    """
    snr_db = np.asarray(snr_db, float)
    lb = np.log(np.maximum(np.asarray(bler, float), floor))
    lt = np.log(target)
    below = np.flatnonzero(lb <= lt)
    if below.size == 0:
        return float("nan")
    i = below[0]
    if i == 0:
        return float(snr_db[0]) if lb[0] == lt else float("nan")
    x0, x1, y0, y1 = snr_db[i - 1], snr_db[i], lb[i - 1], lb[i]
    if y1 == y0:
        return float(x1)
    return float(x0 + (lt - y0) * (x1 - x0) / (y1 - y0))


def predict_bler(esinr_db, lut: BlerLut) -> np.ndarray:
    """BLER at effective SINR ``esinr_db``: log-linear interpolation of the LUT.

    Below the table the BLER is 1, above it the floor ``1/(10*packets)``.
    """
    esinr_db = np.asarray(esinr_db, dtype=float)
    floor = lut.floor
    lb = np.log(np.clip(lut.bler, floor, 1.0))
    out = np.exp(np.interp(esinr_db, lut.snr_db, lb))
    out = np.where(esinr_db < lut.snr_db[0], 1.0, out)
    out = np.where(esinr_db > lut.snr_db[-1], floor, out)
    return np.clip(out, floor, 1.0)


def predict_ber(esinr_db, lut: BlerLut) -> np.ndarray:
    """Information-bit error rate at ``esinr_db``, interpolated like :func:`predict_bler`."""
    esinr_db = np.asarray(esinr_db, dtype=float)
    floor = lut.ber_floor
    lb = np.log(np.clip(lut.ber, floor, 0.5))
    out = np.exp(np.interp(esinr_db, lut.snr_db, lb))
    out = np.where(esinr_db < lut.snr_db[0], lut.ber[0], out)
    out = np.where(esinr_db > lut.snr_db[-1], floor, out)
    return np.clip(out, floor, 0.5)


def _threshold_snr(mcs: McsMode, sim: LinkSimulator) -> float:
    # SNR where the constellation's symbol information equals the code rate
    table = build_si_table(mcs.m)
    target = sim.block.effective_rate * mcs.m
    return float(table.inverse_db(target))


def calibrate_bler_lut(mcs: McsMode, config: GfdmConfig, seed: int = 1,
                       max_packets: int = MAX_PACKETS, min_errors: int = MIN_ERRORS,
                       step_db: float = STEP_DB) -> BlerLut:
    """Run the bit-level chain over AWGN on a 0.25 dB grid spanning the waterfall.

    Each point simulates until ``min_errors`` block errors or ``max_packets``
    packets.  The grid is extended downwards until the BLER reaches 0.99 and
    upwards until a point shows no error in ``max_packets`` packets.
    """
    sim = LinkSimulator(config, mcs)
    key = lut_key(mcs, config, seed, max_packets, min_errors, step_db)
    results: dict[int, tuple[int, int, int]] = {}

    def point(i: int) -> float:
        if i not in results:
            snr = i * step_db
            if not SNR_WINDOW[0] <= snr <= SNR_WINDOW[1]:
                raise WaterfallNotFound(f"{mcs} / {config.filter_label}: SNR window exhausted at {snr} dB")
            rng = substream(seed, "lut", config_hash(key), f"{snr:.4f}")
            st = sim.run(max_packets, rng, float(snr_to_sigma2(snr)), stop_errors=min_errors)
            results[i] = (st.packets, st.block_errors, st.bit_errors)
            log.debug("%s %s %.2f dB: %d/%d", mcs, config.filter_label, snr, st.block_errors, st.packets)
        n, e, _ = results[i]
        return e / n

    i = int(round(_threshold_snr(mcs, sim) / step_db))
    # coarse search for the first point with BLER < 0.5, in 1 dB strides
    stride = int(round(1.0 / step_db))
    while point(i) >= 0.5:
        i += stride
    while point(i - stride) < 0.5:
        i -= stride
    lo = i
    while point(lo) < 0.99:
        lo -= 1
    hi = i
    while point(hi) > 0:
        hi += 1
    idx = np.arange(lo, hi + 1)
    for j in idx:
        point(int(j))
    packets = np.array([results[j][0] for j in idx])
    errors = np.array([results[j][1] for j in idx])
    bit_errors = np.array([results[j][2] for j in idx])
    raw = errors / packets
    fit = isotonic_regression(raw, weights=packets, increasing=False).x
    ber = isotonic_regression(bit_errors / (packets * sim.info_bits), weights=packets, increasing=False).x
    return BlerLut(
        mcs=mcs,
        filter_label=config.filter_label,
        info_bits=sim.info_bits,
        snr_db=idx * step_db,
        bler=np.clip(fit, 0.0, 1.0),
        raw_bler=raw,
        packets=packets,
        errors=errors,
        ber=ber,
        bit_errors=bit_errors,
        config_hash=config_hash(key),
    )


def lut_path(cache_dir, mcs: McsMode, config: GfdmConfig, seed: int = 1) -> Path:
    h = config_hash(lut_key(mcs, config, seed))
    name = mcs.name.replace("/", "_")
    return Path(cache_dir) / f"lut_{name}_{config.filter_label}_K{config.K}M{config.M}_{h}.csv"


def load_or_calibrate(mcs: McsMode, config: GfdmConfig, cache_dir, seed: int = 1) -> tuple[BlerLut, bool]:
    """Return ``(lut, cache_hit)``; a cached file is reused only if its hash matches."""
    path = lut_path(cache_dir, mcs, config, seed)
    if path.exists():
        lut = BlerLut.load(path)
        if lut.config_hash == config_hash(lut_key(mcs, config, seed)):
            return lut, True
        log.warning("stale LUT %s (hash mismatch); recalibrating", path)
    lut = calibrate_bler_lut(mcs, config, seed=seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    lut.save(path)
    return lut, False
