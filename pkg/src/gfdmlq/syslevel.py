"""System-level Monte Carlo: one serving cell, six co-channel interferers.

Each UE has seven links (serving BS plus six interferers).  Every link has
a large-scale gain (antenna pattern, urban-macro path loss, log-normal
shadowing) and a stream of block-static TDL snapshots.  Per snapshot the
per-frequency-sample SINR feeds MIESM and the AWGN LUT (abstraction); the
bit-level path pushes packets through the full chain over the same
snapshots, with interference injected as Gaussian noise of the same
per-sample power.

All quantities are normalised to the serving link's mean received power,
so the bit-level chain keeps unit-energy symbols.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .channel import ChannelRealization, TdlProfile, default_tdl_profile, draw_taps, frequency_response
from .fec.mcs import CodedBlock, McsMode, parse_mcs
from .linkquality.esm import esinr_miesm
from .linkquality.lut import predict_bler
from .linksim import LinkSimulator, allocation_bins, sinr_units
from .modem import GfdmConfig
from .parallel import parallel_map
from .rng import substream

__all__ = [
    "CASES",
    "Deployment",
    "DropResult",
    "SystemParams",
    "UeDrop",
    "adaptive_mcs",
    "aggregate_cdfs",
    "cdf_distance",
    "drop_ues",
    "evaluate_link_abstraction",
    "evaluate_link_bitlevel",
    "generate_deployment",
    "run_system",
]

CASES = ("snr", "sinr")  # interference off / on
QUANTILES = np.round(np.arange(0, 101) / 100, 2)
SYSTEM_MCS = tuple(parse_mcs(s) for s in ("QPSK-1/3", "16QAM-1/2", "64QAM-2/3"))


@dataclass(frozen=True)
class SystemParams:
    cell_radius: float = 500.0
    tx_power_dbm: float = 43.0
    carrier_mhz: float = 2600.0
    subcarrier_spacing_hz: float = 240e3
    noise_figure_db: float = 9.0
    bs_height: float = 25.0
    ue_height: float = 1.5
    bs_above_rooftop: float = 15.0
    downtilt_deg: float = 10.0
    antenna_gain_dbi: float = 15.0
    h_beamwidth_deg: float = 65.0
    v_beamwidth_deg: float = 10.0
    front_back_db: float = 20.0
    side_lobe_db: float = 20.0
    sector_azimuths_deg: tuple[float, ...] = (30.0, 150.0, 270.0)
    shadowing_db: float = 6.0
    min_distance: float = 50.0
    max_distance: float = 1000.0
    sensitivity_dbm: float = -120.0

    def __post_init__(self):
        if not self.cell_radius > 0:
            raise ValueError("cell radius must be positive")
        if not 0 < self.min_distance < self.max_distance:
            raise ValueError("need 0 < min_distance < max_distance")


@dataclass(frozen=True, eq=False)
class Deployment:
    params: SystemParams
    bs_xy: np.ndarray  # (7, 2); row 0 is the serving BS

    @property
    def n_interferers(self) -> int:
        return len(self.bs_xy) - 1


def generate_deployment(params: SystemParams = SystemParams()) -> Deployment:
    """Serving BS at the origin, six interferers at distance 3R every 60 degrees."""
    ang = np.deg2rad(np.arange(0, 360, 60))
    isd = 3 * params.cell_radius
    ring = isd * np.column_stack([np.cos(ang), np.sin(ang)])
    return Deployment(params, np.vstack([np.zeros((1, 2)), ring]))


def path_loss_db(d, params: SystemParams) -> np.ndarray:
    """Urban-macro log-distance path loss (distance in metres)."""
    d_km = np.asarray(d, dtype=float) / 1000.0
    h = params.bs_above_rooftop
    return (40 * (1 - 4e-3 * h) * np.log10(d_km) - 18 * np.log10(h)
            + 21 * np.log10(params.carrier_mhz) + 80)


def antenna_gain_db(bs_xy, ue_xy, params: SystemParams) -> np.ndarray:
    """Gain of the best-facing sector of a 3-sector site towards the UE.

    Parabolic horizontal and vertical patterns, combined and capped at the
    front-to-back ratio, plus the boresight gain.
    """
    delta = np.asarray(ue_xy, float) - np.asarray(bs_xy, float)
    d = np.hypot(delta[..., 0], delta[..., 1])
    phi = np.degrees(np.arctan2(delta[..., 1], delta[..., 0]))
    rel = (phi[..., None] - np.asarray(params.sector_azimuths_deg) + 180) % 360 - 180
    a_h = -np.minimum(12 * (rel / params.h_beamwidth_deg) ** 2, params.front_back_db)
    theta = np.degrees(np.arctan2(params.bs_height - params.ue_height, d))
    a_v = -np.minimum(12 * ((theta - params.downtilt_deg) / params.v_beamwidth_deg) ** 2, params.side_lobe_db)
    a = -np.minimum(-(a_h + a_v[..., None]), params.front_back_db)
    return params.antenna_gain_dbi + a.max(axis=-1)


@dataclass(frozen=True, eq=False)
class UeDrop:
    ue: int
    xy: np.ndarray
    distance: np.ndarray  # (7,) metres to each BS
    shadowing_db: np.ndarray  # (7,)
    gain_db: np.ndarray  # (7,) antenna gain - path loss - shadowing

    def rx_power_dbm(self, params: SystemParams) -> np.ndarray:
        return params.tx_power_dbm + self.gain_db


def drop_ues(n: int, deployment: Deployment, rng: np.random.Generator) -> list[UeDrop]:
    """Area-uniform drops in the annulus around the serving BS, with shadowing."""
    p = deployment.params
    r = np.sqrt(rng.uniform(p.min_distance**2, p.max_distance**2, n))
    ang = rng.uniform(0, 2 * np.pi, n)
    shadow = p.shadowing_db * rng.standard_normal((n, len(deployment.bs_xy)))
    xy = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
    out = []
    for i in range(n):
        delta = xy[i] - deployment.bs_xy
        dist = np.maximum(np.hypot(delta[:, 0], delta[:, 1]), p.min_distance)
        gain = antenna_gain_db(deployment.bs_xy, xy[i], p) - path_loss_db(dist, p) - shadow[i]
        out.append(UeDrop(i, xy[i], dist, shadow[i], gain))
    return out


def noise_dbm(config: GfdmConfig, params: SystemParams) -> float:
    """Thermal noise over the occupied band (K_on subcarriers)."""
    bw = config.K_on * params.subcarrier_spacing_hz
    return -174.0 + 10 * np.log10(bw) + params.noise_figure_db


def rate_mbps(mcs: McsMode, config: GfdmConfig, params: SystemParams) -> float:
    """Information rate with one coded block per GFDM symbol (CP included)."""
    info_bits = CodedBlock(mcs, config.n_symbols).K
    fs = config.K * params.subcarrier_spacing_hz
    return info_bits * fs / (config.N + config.n_cp) / 1e6


@dataclass(frozen=True, eq=False)
class LinkBudget:
    """Powers normalised to the serving link: noise and the six interferer gains."""

    sigma2: float
    interferer_gain: np.ndarray  # (6,)
    covered: bool


def link_budget(ue: UeDrop, config: GfdmConfig, params: SystemParams) -> LinkBudget:
    rx = ue.rx_power_dbm(params)
    sigma2 = 10 ** ((noise_dbm(config, params) - rx[0]) / 10)
    return LinkBudget(float(sigma2), 10 ** ((rx[1:] - rx[0]) / 10), bool(rx[0] >= params.sensitivity_dbm))


def snapshot_taps(seed: int, ue: int, link: int, count: int, profile) -> tuple[np.ndarray, np.ndarray]:
    """Tap gains of the first ``count`` snapshots of one link (shared by both methods)."""
    return draw_taps(profile, substream(seed, "ue", ue, "link", link), count)


def snapshot_sinr(ue: UeDrop, budget: LinkBudget, config: GfdmConfig, seed: int, count: int, profile,
                  bins=None, granularity: str = "sample") -> tuple[np.ndarray, np.ndarray]:
    """Per-sample SNR and SINR for ``count`` snapshots, each ``(count, len(bins))``.

    With ``granularity="symbol"`` they are computed on all N samples and
    mapped to per-subcarrier post-ZF values instead (``bins`` is ignored).
    """
    per_symbol = granularity != "sample"
    if per_symbol:
        bins = np.arange(config.N)
    bins = allocation_bins(config) if bins is None else bins
    taps, delays = snapshot_taps(seed, ue.ue, 0, count, profile)
    s = np.abs(frequency_response(taps, delays, config.N, bins)) ** 2
    interference = np.zeros_like(s)
    for q, g in enumerate(budget.interferer_gain, start=1):
        taps, delays = snapshot_taps(seed, ue.ue, q, count, profile)
        interference += g * np.abs(frequency_response(taps, delays, config.N, bins)) ** 2
    snr, sinr = s / budget.sigma2, s / (budget.sigma2 + interference)
    if not per_symbol:
        return snr, sinr
    return sinr_units(snr, config, granularity), sinr_units(sinr, config, granularity)


def adaptive_mcs(per, rates, mcs_list) -> int:
    """Index of the MCS with the largest goodput ``rate * (1 - PER)``.

    Ties go to the lower modulation order, then the lower rate.
    """
    goodput = np.asarray(rates, float) * (1 - np.asarray(per, float))
    best = goodput.max()
    tied = [i for i in range(len(goodput)) if goodput[i] >= best - 1e-12 * max(best, 1.0)]
    return min(tied, key=lambda i: (mcs_list[i].m, mcs_list[i].rate))


def evaluate_link_abstraction(sinr: np.ndarray, luts, tables, gamma_code: float = 1.0,
                              mode: str = "snr") -> tuple[np.ndarray, np.ndarray]:
    """Mean predicted BLER and mean ESINR (dB) per MCS over the snapshot rows of ``sinr``."""
    per = np.empty(len(luts))
    esinr_db = np.empty(len(luts))
    for i, (lut, table) in enumerate(zip(luts, tables)):
        e = esinr_miesm(sinr, table, gamma_code, mode)
        per[i] = predict_bler(e, lut).mean()
        esinr_db[i] = e.mean()
    return per, esinr_db


def evaluate_link_bitlevel(ue: UeDrop, budget: LinkBudget, config: GfdmConfig, mcs: McsMode, seed: int,
                           count: int, profile, interference: bool,
                           packets_per_snapshot: int = 1) -> tuple[int, int]:
    """Bit-level block errors and packets over the first ``count`` snapshots."""
    if not budget.covered:
        n = count * packets_per_snapshot
        return n, n
    taps, delays = snapshot_taps(seed, ue.ue, 0, count, profile)
    H = frequency_response(taps, delays, config.N)
    inter = None
    if interference:
        inter = np.zeros((count, config.N))
        for q, g in enumerate(budget.interferer_gain, start=1):
            t, d = snapshot_taps(seed, ue.ue, q, count, profile)
            inter += g * np.abs(frequency_response(t, d, config.N)) ** 2
    rep = np.repeat(np.arange(count), packets_per_snapshot)
    ch = ChannelRealization(taps[rep], delays, H[rep], budget.sigma2)
    sim = LinkSimulator(config, mcs)
    # both cases use the same bits and noise draws
    rng = substream(seed, "bitlevel", ue.ue, mcs.name)
    block_err, _ = sim.run_packets(rng, ch, budget.sigma2, None if inter is None else inter[rep])
    return int(block_err.sum()), int(block_err.size)


@dataclass
class DropResult:
    ue: int
    case: str
    per_by_mcs: np.ndarray
    esinr_by_mcs: np.ndarray
    mcs_index: int
    mcs: McsMode
    per: float
    throughput_mbps: float
    esinr_db: float
    per_bitlevel: float = float("nan")
    throughput_bitlevel: float = float("nan")


@dataclass
class SystemResult:
    results: dict[str, list[DropResult]]
    mcs_list: tuple[McsMode, ...]
    rates: np.ndarray
    abstraction_seconds: float
    bitlevel_seconds: float
    bitlevel_ues: int
    drops: list[UeDrop] = field(default_factory=list)


def _evaluate_ue(ue: UeDrop, *, config, params, mcs_list, rates, luts, tables, seed, n_snapshots, profile,
                 gamma_code, gamma_mode, granularity, bitlevel, packets_per_snapshot):
    budget = link_budget(ue, config, params)
    t0 = time.perf_counter()
    sinr = dict(zip(CASES, snapshot_sinr(ue, budget, config, seed, n_snapshots, profile,
                                         granularity=granularity)))
    out = {}
    for case in CASES:
        if budget.covered:
            per, esinr = evaluate_link_abstraction(sinr[case], luts, tables, gamma_code, gamma_mode)
        else:
            per, esinr = np.ones(len(luts)), np.full(len(luts), -np.inf)
        i = adaptive_mcs(per, rates, mcs_list)
        out[case] = DropResult(ue.ue, case, per, esinr, i, mcs_list[i], float(per[i]),
                               float(rates[i] * (1 - per[i])), float(esinr[i]))
    t_abs = time.perf_counter() - t0
    t_bit = 0.0
    if bitlevel:
        t0 = time.perf_counter()
        for case in CASES:
            r = out[case]
            err, n = evaluate_link_bitlevel(ue, budget, config, r.mcs, seed, n_snapshots, profile,
                                            case == "sinr", packets_per_snapshot)
            r.per_bitlevel = err / n
            r.throughput_bitlevel = float(rates[r.mcs_index] * (1 - r.per_bitlevel))
        t_bit = time.perf_counter() - t0
    return out, t_abs, t_bit


def run_system(config: GfdmConfig, luts, tables, seed: int, n_ues: int, n_snapshots: int,
               params: SystemParams = SystemParams(), mcs_list=SYSTEM_MCS, profile: TdlProfile | None = None,
               gamma_code: float = 1.0, gamma_mode: str = "snr", bitlevel: bool = False,
               packets_per_snapshot: int = 1, jobs: int = 1, granularity: str = "sample") -> SystemResult:
    """Drop ``n_ues`` UEs and evaluate both interference cases.

    ``luts`` and ``tables`` are aligned with ``mcs_list``.  ``granularity``
    picks the SINR values fed to MIESM (see :func:`sinr_units`).  With
    ``bitlevel`` every UE is also simulated at the abstraction's chosen
    MCS over the same snapshots.
    """
    mcs_list = tuple(mcs_list)
    profile = profile or default_tdl_profile()
    deployment = generate_deployment(params)
    drops = drop_ues(n_ues, deployment, substream(seed, "drops"))
    rates = np.array([rate_mbps(m, config, params) for m in mcs_list])
    fn = partial(_evaluate_ue, config=config, params=params, mcs_list=mcs_list, rates=rates, luts=list(luts),
                 tables=list(tables), seed=seed, n_snapshots=n_snapshots, profile=profile,
                 gamma_code=gamma_code, gamma_mode=gamma_mode, granularity=granularity, bitlevel=bitlevel,
                 packets_per_snapshot=packets_per_snapshot)
    out = parallel_map(fn, drops, jobs)
    results = {case: [o[0][case] for o in out] for case in CASES}
    return SystemResult(
        results=results,
        mcs_list=mcs_list,
        rates=rates,
        abstraction_seconds=float(sum(o[1] for o in out)),
        bitlevel_seconds=float(sum(o[2] for o in out)),
        bitlevel_ues=n_ues if bitlevel else 0,
        drops=drops,
    )


def aggregate_cdfs(values) -> tuple[np.ndarray, np.ndarray]:
    """Empirical quantile function at 1 % resolution: ``(quantiles, values)``."""
    v = np.asarray(values, dtype=float)
    return QUANTILES, np.quantile(v, QUANTILES, method="inverted_cdf")


def cdf_distance(a, b, scale: float = 1.0) -> float:
    """Largest horizontal gap between two empirical CDFs, in units of ``scale``.

    Quantile functions are compared at the 1 % levels 0.01..1.
    """
    qa = aggregate_cdfs(a)[1][1:]
    qb = aggregate_cdfs(b)[1][1:]
    return float(np.max(np.abs(qa - qb)) / scale)
