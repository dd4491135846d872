"""Command-line driver: ``gfdmlq {calibrate,link,syslevel,report}``.

Experiments are described by a YAML file whose keys mirror
:class:`ExperimentConfig`; unknown keys are rejected.  Every CSV written
carries the hash of the resolved configuration in its header.  Wall-clock
timings go to ``timing.csv`` only, so all other outputs are byte-for-byte
reproducible from (config, seed).

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .channel import default_tdl_profile
from .fec.mcs import McsMode, parse_mcs
from .linkexp import CHANNEL_KINDS, abstraction_sweep, bitlevel_sweep, draw_ensemble, ensemble_gains
from .linkquality.calibration import ReferenceOutOfBand, accuracy_gap, calibrate_gamma_code
from .linkquality.esm import GAMMA_CODE_MODES
from .linkquality.lut import load_or_calibrate
from .linkquality.si import build_si_table
from .linksim import GRANULARITIES
from .modem import GfdmConfig, check_invertible
from .syslevel import CASES, SystemParams, aggregate_cdfs, cdf_distance, run_system
from .textio import config_hash, read_table, write_table

log = logging.getLogger("gfdmlq")

SCENARIOS = CHANNEL_KINDS + ("syslevel",)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WaveformSection:
    K: int = 64
    M: int = 9
    K_on: int | None = None
    n_cp: int = 16
    filters: tuple[str, ...] = ("dirichlet",)


@dataclass(frozen=True)
class SweepSection:
    start: float = -4.0
    stop: float = 4.0
    step: float = 0.25


@dataclass(frozen=True)
class TdlSection:
    rms_delay_us: float = 0.5
    n_taps: int = 6
    spacing: int = 12


@dataclass(frozen=True)
class SyslevelSection:
    n_ues: int = 50
    n_snapshots: int = 200
    packets_per_snapshot: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "awgn"
    waveform: WaveformSection = WaveformSection()
    mcs: tuple[str, ...] = ("QPSK-1/3",)
    snr: SweepSection = SweepSection()
    packets: int = 2000
    realizations: int = 1
    gamma_code: float | str = 1.0
    gamma_mode: str = "snr"
    granularity: str = "sample"
    bitlevel: bool = True
    tdl: TdlSection = TdlSection()
    syslevel: SyslevelSection = SyslevelSection()
    seed: int = 1
    output: str = "out"
    cache_dir: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if not self.snr.step > 0 or self.snr.stop < self.snr.start:
            raise ConfigError("snr sweep needs step > 0 and stop >= start")
        for name in ("packets", "realizations"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        sl = self.syslevel
        if min(sl.n_ues, sl.n_snapshots, sl.packets_per_snapshot) <= 0:
            raise ConfigError("syslevel counts must be positive")
        if self.gamma_code != "calibrate" and not (
            isinstance(self.gamma_code, (int, float)) and self.gamma_code > 0
        ):
            raise ConfigError("gamma_code must be a positive number or 'calibrate'")
        if self.gamma_mode not in GAMMA_CODE_MODES:
            raise ConfigError(f"gamma_mode must be one of {GAMMA_CODE_MODES}")
        if self.granularity not in GRANULARITIES:
            raise ConfigError(f"granularity must be one of {GRANULARITIES}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        try:
            self.mcs_modes()
            for g in self.gfdm_configs():
                check_invertible(g)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def mcs_modes(self) -> list[McsMode]:
        return [parse_mcs(s) for s in self.mcs]

    def gfdm_configs(self) -> list[GfdmConfig]:
        w = self.waveform
        out = []
        for name in w.filters:
            text = name.strip().lower()
            if text == "dirichlet":
                filt, alpha = "dirichlet", 0.0
            elif text.startswith("rc-"):
                filt, alpha = "rc", float(text[3:])
            else:
                raise ValueError(f"unknown filter {name!r}; use 'dirichlet' or 'rc-<rolloff>'")
            out.append(GfdmConfig(K=w.K, M=w.M, n_cp=w.n_cp, filter=filt, rolloff=alpha, K_on=w.K_on))
        return out

    def snr_grid(self) -> np.ndarray:
        s = self.snr
        n = int(np.floor((s.stop - s.start) / s.step + 1e-9)) + 1
        return np.round(s.start + s.step * np.arange(n), 6)

    def tdl_profile(self):
        t = self.tdl
        return default_tdl_profile(rms_delay=t.rms_delay_us * 1e-6, n_taps=t.n_taps, spacing=t.spacing)

    def cache_path(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else Path(self.output) / "tables"

    def digest(self) -> str:
        """Hash of everything that affects results (not where they are written)."""
        d = asdict(self)
        d.pop("output")
        d.pop("cache_dir")
        return config_hash(d)


_SECTIONS = {
    "waveform": WaveformSection,
    "snr": SweepSection,
    "tdl": TdlSection,
    "syslevel": SyslevelSection,
}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is ExperimentConfig:
            value = _build(_SECTIONS[key], value, f"{where}.{key}")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_config(path=None, seed: int | None = None, output: str | None = None) -> ExperimentConfig:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = _build(ExperimentConfig, data, "config")
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if output is not None:
        cfg = replace(cfg, output=output)
    return cfg.validate()


def _meta(cfg: ExperimentConfig, kind: str, **extra) -> dict:
    meta = {"kind": kind, "config_hash": cfg.digest(), "scenario": cfg.scenario, "seed": cfg.seed}
    meta.update(extra)
    return meta


def _luts(cfg: ExperimentConfig, gcfg: GfdmConfig, modes):
    cache = cfg.cache_path()
    out = []
    for mcs in modes:
        lut, hit = load_or_calibrate(mcs, gcfg, cache, seed=cfg.seed)
        log.info("LUT %s %s: %s", mcs, gcfg.filter_label, "cache hit" if hit else "calibrated")
        out.append(lut)
    return out


def cmd_calibrate(cfg: ExperimentConfig, jobs: int = 1) -> int:
    modes = cfg.mcs_modes()
    for m in sorted({mcs.m for mcs in modes}):
        build_si_table(m, cfg.cache_path())
    for gcfg in cfg.gfdm_configs():
        _luts(cfg, gcfg, modes)
    return 0


def _append_timing(cfg: ExperimentConfig, **entries):
    path = Path(cfg.output) / "timing.csv"
    meta, rows = {"kind": "timing", "config_hash": cfg.digest()}, []
    if path.exists():
        old_meta, cols = read_table(path, numeric=False)
        if old_meta.get("config_hash") == cfg.digest():
            rows = [r for r in zip(cols["name"], cols["seconds"]) if r[0] not in entries]
    rows += [(k, repr(float(v))) for k, v in entries.items()]
    write_table(path, meta, ("name", "seconds"), sorted(rows))


def cmd_link(cfg: ExperimentConfig, jobs: int = 1) -> int:
    if cfg.scenario == "syslevel":
        raise ConfigError("the link command needs scenario awgn, rayleigh or tdl")
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    snr = cfg.snr_grid()
    modes = cfg.mcs_modes()
    rows, acc_rows = [], []
    t_bit = t_abs = 0.0
    for gcfg in cfg.gfdm_configs():
        ensemble = draw_ensemble(cfg.scenario, gcfg, cfg.realizations, cfg.seed, cfg.tdl_profile())
        for mcs, lut in zip(modes, _luts(cfg, gcfg, modes)):
            table = build_si_table(mcs.m, cfg.cache_path())
            bit = None
            if cfg.bitlevel:
                t0 = time.perf_counter()
                bit = bitlevel_sweep(gcfg, mcs, snr, ensemble, cfg.packets, cfg.seed, jobs)
                t_bit += time.perf_counter() - t0
                rows.extend(bit.rows())
            gamma = cfg.gamma_code
            if gamma == "calibrate":
                if bit is None:
                    raise ConfigError("gamma_code: calibrate needs the bit-level sweep")
                gains = ensemble_gains(ensemble, gcfg, cfg.granularity)
                fit = calibrate_gamma_code(gains, snr, bit.bler, table, lut, mode=cfg.gamma_mode)
                gamma = fit.gamma_code
            t0 = time.perf_counter()
            ab = abstraction_sweep(gcfg, mcs, snr, ensemble, lut, table, float(gamma), cfg.gamma_mode,
                                   cfg.granularity)
            t_abs += time.perf_counter() - t0
            rows.extend(ab.rows())
            if bit is not None:
                try:
                    gap = accuracy_gap(snr, bit.bler, ab.bler)
                except ReferenceOutOfBand:
                    gap = float("nan")
                acc_rows.append((mcs.name, gcfg.filter_label, float(gamma), gap))
    write_table(out / "link.csv", _meta(cfg, "link"), ("snr_db", "method", "mcs", "filter", "ber", "bler"), rows)
    if acc_rows:
        write_table(out / "link_accuracy.csv", _meta(cfg, "link_accuracy"),
                    ("mcs", "filter", "gamma_code", "accuracy_db"), acc_rows)
    _append_timing(cfg, link_bitlevel=t_bit, link_abstraction=t_abs)
    return 0


def write_system_outputs(cfg: ExperimentConfig, result, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    names = [m.name for m in result.mcs_list]
    peak = float(np.max(result.rates))
    bitlevel = result.bitlevel_ues > 0
    for case in CASES:
        drops = result.results[case]
        rows = []
        for r in drops:
            rows.append((r.ue, "abstraction", r.mcs.name, r.per, r.throughput_mbps, r.esinr_db))
            if bitlevel:
                rows.append((r.ue, "bitlevel", r.mcs.name, r.per_bitlevel, r.throughput_bitlevel, r.esinr_db))
        meta = _meta(cfg, "syslevel_results", case=case, peak_rate_mbps=peak)
        write_table(out / f"results_{case}.csv", meta,
                    ("ue", "method", "mcs", "per", "throughput_mbps", "esinr_db"), rows)
        write_table(out / f"per_by_mcs_{case}.csv", _meta(cfg, "per_by_mcs", case=case),
                    ("ue",) + tuple(names), [(r.ue, *r.per_by_mcs) for r in drops])
        methods = {"abstraction": (lambda r: r.per, lambda r: r.throughput_mbps)}
        if bitlevel:
            methods["bitlevel"] = (lambda r: r.per_bitlevel, lambda r: r.throughput_bitlevel)
        for method, (get_per, get_thr) in methods.items():
            for metric, get in (("per", get_per), ("throughput", get_thr)):
                q, v = aggregate_cdfs([get(r) for r in drops])
                meta = _meta(cfg, "cdf", case=case, method=method, metric=metric)
                write_table(out / f"cdf_{case}_{metric}_{method}.csv", meta, ("quantile", "value"), zip(q, v))


def cmd_syslevel(cfg: ExperimentConfig, jobs: int = 1) -> int:
    gcfg = cfg.gfdm_configs()[0]
    modes = cfg.mcs_modes()
    luts = _luts(cfg, gcfg, modes)
    tables = [build_si_table(m.m, cfg.cache_path()) for m in modes]
    gamma = cfg.gamma_code
    if gamma == "calibrate":
        raise ConfigError("syslevel needs a fixed gamma_code; calibrate it with the link command")
    sl = cfg.syslevel
    result = run_system(gcfg, luts, tables, cfg.seed, sl.n_ues, sl.n_snapshots, SystemParams(), modes,
                        cfg.tdl_profile(), float(gamma), cfg.gamma_mode, cfg.bitlevel,
                        sl.packets_per_snapshot, jobs, cfg.granularity)
    write_system_outputs(cfg, result, Path(cfg.output))
    _append_timing(cfg, syslevel_abstraction=result.abstraction_seconds,
                   syslevel_bitlevel=result.bitlevel_seconds)
    return 0


def summarize(out: Path) -> list[tuple[str, str, str, float]]:
    """Accuracy and agreement figures recomputed from the CSVs in ``out``."""
    rows = []
    link = out / "link.csv"
    if link.exists():
        _, c = read_table(link, numeric=False)
        snr = np.array(c["snr_db"], float)
        bler = np.array(c["bler"], float)
        keys = sorted({(m, f) for m, f in zip(c["mcs"], c["filter"])})
        for mcs, filt in keys:
            sel = {meth: np.array([i for i in range(len(snr)) if c["mcs"][i] == mcs and c["filter"][i] == filt
                                   and c["method"][i] == meth]) for meth in ("bitlevel", "abstraction")}
            if sel["bitlevel"].size == 0:
                continue
            try:
                gap = accuracy_gap(snr[sel["bitlevel"]], bler[sel["bitlevel"]], bler[sel["abstraction"]])
            except ReferenceOutOfBand:
                gap = float("nan")
            rows.append(("accuracy_db", mcs, filt, gap))
    for case in CASES:
        res = out / f"results_{case}.csv"
        if not res.exists():
            continue
        meta, c = read_table(res, numeric=False)
        peak = float(meta["peak_rate_mbps"])
        method = np.array(c["method"])
        if not np.any(method == "bitlevel"):
            continue
        for metric, col, scale in (("per", "per", 1.0), ("throughput", "throughput_mbps", peak)):
            v = np.array(c[col], float)
            d = cdf_distance(v[method == "abstraction"], v[method == "bitlevel"], scale)
            rows.append(("cdf_distance", case, metric, d))
    timing = out / "timing.csv"
    if timing.exists():
        _, c = read_table(timing, numeric=False)
        t = {k: float(v) for k, v in zip(c["name"], c["seconds"])}
        for name, value in sorted(t.items()):
            rows.append(("wall_clock_s", name, "", value))
        if t.get("syslevel_abstraction", 0) > 0 and t.get("syslevel_bitlevel", 0) > 0:
            rows.append(("time_ratio", "syslevel", "bitlevel/abstraction",
                         t["syslevel_bitlevel"] / t["syslevel_abstraction"]))
        if t.get("link_abstraction", 0) > 0 and t.get("link_bitlevel", 0) > 0:
            rows.append(("time_ratio", "link", "bitlevel/abstraction",
                         t["link_bitlevel"] / t["link_abstraction"]))
    return rows


def cmd_report(out: Path) -> int:
    if not out.is_dir():
        raise ConfigError(f"no such output directory: {out}")
    rows = summarize(out)
    meta = {"kind": "report"}
    for f in ("link.csv", "results_snr.csv"):
        if (out / f).exists():
            meta["config_hash"] = read_table(out / f, numeric=False)[0].get("config_hash", "")
            break
    write_table(out / "report.csv", meta, ("metric", "key", "detail", "value"), rows)
    for metric, key, detail, value in rows:
        print(f"{metric:14s} {key:12s} {detail:22s} {value:.4g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gfdmlq", description="GFDM link simulator and PHY abstraction")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (("calibrate", "build SI tables and AWGN BLER LUTs"),
                       ("link", "BER/BLER versus SNR for both methods"),
                       ("syslevel", "system-level PER and throughput CDFs")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", type=Path)
        s.add_argument("--seed", type=int)
        s.add_argument("--out")
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--bitlevel", action=argparse.BooleanOptionalAction, default=None)
    r = sub.add_parser("report", help="accuracy summary of an output directory")
    r.add_argument("dir", nargs="?", type=Path)
    r.add_argument("--out", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            target = args.dir or args.out
            if target is None:
                raise ConfigError("report needs an output directory")
            return cmd_report(Path(target))
        cfg = load_config(args.config, args.seed, args.out)
        if args.bitlevel is not None:
            cfg = replace(cfg, bitlevel=args.bitlevel)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        return {"calibrate": cmd_calibrate, "link": cmd_link, "syslevel": cmd_syslevel}[args.command](
            cfg, args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
