import csv

import numpy as np
import pytest
import yaml

from gfdmlq.cli import ConfigError, load_config, main
from gfdmlq.linkquality import accuracy_gap

BASE = {
    "scenario": "awgn",
    "waveform": {"K": 16, "M": 5, "n_cp": 4, "filters": ["dirichlet"]},
    "mcs": ["QPSK-1/3"],
    "snr": {"start": -3.0, "stop": 2.0, "step": 0.5},
    "packets": 300,
    "seed": 7,
}


@pytest.fixture(scope="module")
def cache(tmp_path_factory):
    return tmp_path_factory.mktemp("cache")


def write_config(path, cache_dir, **over):
    data = {**BASE, "cache_dir": str(cache_dir), **over}
    path.write_text(yaml.safe_dump(data))
    return path


def read_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_unknown_key_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", tmp_path, pakcets=10)
    assert main(["link", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "pakcets" in capsys.readouterr().err
    cfg.write_text(yaml.safe_dump({**BASE, "waveform": {"K": 16, "M": 5, "Kon": 3}}))
    assert main(["calibrate", "--config", str(cfg)]) == 1


def test_bad_yaml_and_values(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: [awgn\n")
    assert main(["calibrate", "--config", str(bad)]) == 1
    assert main(["calibrate", "--config", str(tmp_path / "missing.yaml")]) == 1
    for over in ({"snr": {"start": 0, "stop": 1, "step": 0}}, {"packets": 0}, {"mcs": ["8PSK-1/2"]},
                 {"scenario": "indoor"}, {"gamma_code": -1}, {"granularity": "bin"},
                 {"waveform": {"K": 8, "M": 4, "n_cp": 4, "filters": ["rc-0.5"]}}):
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path / "c.yaml", tmp_path, **over))


def test_runtime_error_exit_code(tmp_path, monkeypatch):
    import gfdmlq.cli as cli

    def boom(*a, **k):
        raise RuntimeError("simulated failure")

    monkeypatch.setattr(cli, "cmd_link", boom)
    cfg = write_config(tmp_path / "c.yaml", tmp_path)
    assert main(["link", "--config", str(cfg)]) == 2
    assert main(["report", str(tmp_path / "nowhere")]) == 1


def test_calibrate_is_idempotent(tmp_path, cache):
    cfg = write_config(tmp_path / "c.yaml", cache)
    assert main(["calibrate", "--config", str(cfg)]) == 0
    luts = sorted(cache.glob("lut_*.csv"))
    assert len(luts) == 1
    before = luts[0].read_bytes()
    assert main(["-v", "calibrate", "--config", str(cfg)]) == 0
    assert luts[0].read_bytes() == before
    assert (cache / "si_m2.csv").exists()


def test_calibrate_second_run_hits_cache(tmp_path, cache, monkeypatch):
    import gfdmlq.linkquality.lut as lut_mod

    cfg = write_config(tmp_path / "c.yaml", cache)
    assert main(["calibrate", "--config", str(cfg)]) == 0

    def fail(*a, **k):
        raise AssertionError("LUT recalibrated despite a valid cache")

    monkeypatch.setattr(lut_mod, "calibrate_bler_lut", fail)
    assert main(["calibrate", "--config", str(cfg)]) == 0


def test_link_outputs_deterministic(tmp_path, cache):
    cfg = write_config(tmp_path / "c.yaml", cache)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["link", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["link", "--config", str(cfg), "--out", str(b), "--jobs", "2"]) == 0
    for name in ("link.csv", "link_accuracy.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
        assert "config_hash" in (a / name).read_text().splitlines()[1]
    rows = read_rows(a / "link.csv")
    assert {r["method"] for r in rows} == {"bitlevel", "abstraction"}
    assert len(rows) == 2 * 11
    for r in rows:
        assert 0 <= float(r["bler"]) <= 1
    # a different seed changes the simulated rows
    c = tmp_path / "c"
    assert main(["link", "--config", str(cfg), "--out", str(c), "--seed", "8"]) == 0
    assert (c / "link.csv").read_bytes() != (a / "link.csv").read_bytes()


def test_report_double_entry(tmp_path, cache):
    cfg = write_config(tmp_path / "c.yaml", cache)
    out = tmp_path / "o"
    assert main(["link", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["report", str(out)]) == 0
    report = read_rows(out / "report.csv")
    acc = [r for r in report if r["metric"] == "accuracy_db"]
    assert len(acc) == 1
    # independent re-read of the raw sweep
    rows = read_rows(out / "link.csv")
    snr = np.array([float(r["snr_db"]) for r in rows if r["method"] == "bitlevel"])
    ref = np.array([float(r["bler"]) for r in rows if r["method"] == "bitlevel"])
    pred = np.array([float(r["bler"]) for r in rows if r["method"] == "abstraction"])
    assert float(acc[0]["value"]) == pytest.approx(accuracy_gap(snr, ref, pred), rel=1e-9)
    assert any(r["metric"] == "wall_clock_s" for r in report)


def test_link_without_bitlevel(tmp_path, cache):
    cfg = write_config(tmp_path / "c.yaml", cache)
    out = tmp_path / "o"
    assert main(["link", "--config", str(cfg), "--out", str(out), "--no-bitlevel"]) == 0
    assert {r["method"] for r in read_rows(out / "link.csv")} == {"abstraction"}
    assert not (out / "link_accuracy.csv").exists()


def test_syslevel_small_run(tmp_path, cache):
    cfg = write_config(tmp_path / "c.yaml", cache, scenario="syslevel", mcs=["QPSK-1/3", "16QAM-1/2"],
                       syslevel={"n_ues": 6, "n_snapshots": 8, "packets_per_snapshot": 1})
    out = tmp_path / "s"
    assert main(["syslevel", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["report", str(out)]) == 0
    res = read_rows(out / "results_sinr.csv")
    assert len(res) == 12
    for r in res:
        assert 0 <= float(r["per"]) <= 1 and float(r["throughput_mbps"]) >= 0
    q = read_rows(out / "cdf_snr_per_abstraction.csv")
    v = [float(r["value"]) for r in q]
    assert len(q) == 101 and v == sorted(v)
    report = read_rows(out / "report.csv")
    dist = [float(r["value"]) for r in report if r["metric"] == "cdf_distance"]
    assert len(dist) == 4 and all(0 <= d <= 1 for d in dist)
    assert any(r["metric"] == "time_ratio" for r in report)
    # outputs other than timing are reproducible
    again = tmp_path / "s2"
    assert main(["syslevel", "--config", str(cfg), "--out", str(again)]) == 0
    for f in out.glob("*.csv"):
        if f.name not in ("timing.csv", "report.csv"):
            assert f.read_bytes() == (again / f.name).read_bytes(), f.name


def test_syslevel_rejects_gamma_calibrate(tmp_path, cache):
    cfg = write_config(tmp_path / "c.yaml", cache, scenario="syslevel", gamma_code="calibrate")
    assert main(["syslevel", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
