import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfdmlq.channel import (
    AWGN,
    FLAT_RAYLEIGH,
    ChannelRealization,
    LinkGain,
    TdlProfile,
    apply_channel,
    compute_sinr,
    default_tdl_profile,
    draw_channel,
    draw_channels,
    read_snapshots,
    write_snapshots,
)
from gfdmlq.modem import GfdmConfig, add_cp, modulate_fast, remove_cp
from gfdmlq.rng import substream


def test_awgn_is_unit_response():
    ch = draw_channel(AWGN, 64, substream(1, "c"))
    assert np.array_equal(ch.H, np.ones(64))


def test_flat_rayleigh_second_moment():
    ch = draw_channels(FLAT_RAYLEIGH, 8, substream(2, "ray"), 100_000)
    p = np.abs(ch.H[:, 0]) ** 2
    assert abs(p.mean() - 1) < 0.02
    # flat: every bin carries the same value
    assert np.allclose(ch.H, ch.H[:, :1])


def test_single_tap_tdl_equals_rayleigh():
    prof = TdlProfile(delays=(0,), powers=(1.0,))
    a = draw_channels(prof, 16, substream(3, "x"), 500)
    b = draw_channels(FLAT_RAYLEIGH, 16, substream(3, "x"), 500)
    assert np.array_equal(a.H, b.H)


def test_profile_validation():
    with pytest.raises(ValueError):
        TdlProfile(delays=(0, 1), powers=(0.5, 0.4))
    with pytest.raises(ValueError):
        TdlProfile(delays=(0,), powers=(0.5, 0.5))
    with pytest.raises(ValueError):
        draw_channel("nakagami", 8, substream(0))


def test_default_profile_delay_spread():
    prof = default_tdl_profile()
    assert len(prof.delays) == 6
    assert abs(prof.rms_delay_spread(30.72e6) - 0.5e-6) < 1e-9
    assert prof.max_delay < 128
    assert abs(sum(prof.powers) - 1) < 1e-12


def test_tdl_cp_violation_warns():
    prof = TdlProfile(delays=(0, 20), powers=(0.5, 0.5))
    with pytest.warns(UserWarning):
        draw_channel(prof, 64, substream(4), n_cp=16)


def test_parseval():
    prof = default_tdl_profile()
    ch = draw_channels(prof, 256, substream(5, "p"), 20)
    lhs = np.mean(np.abs(ch.H) ** 2, axis=1)
    rhs = np.sum(np.abs(ch.taps) ** 2, axis=1)
    assert np.allclose(lhs, rhs, rtol=1e-12)


def test_reproducible_stream():
    prof = default_tdl_profile()
    a = draw_channels(prof, 128, substream(6, "r"), 4).H
    b = draw_channels(prof, 128, substream(6, "r"), 4).H
    c = draw_channels(prof, 128, substream(7, "r"), 4).H
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_noiseless_identity():
    x = np.exp(1j * np.arange(50))
    ch = draw_channel(AWGN, 50, substream(8))
    assert np.array_equal(apply_channel(x, ch, None), x)


def test_noise_power():
    ch = draw_channel(AWGN, 100_000, substream(9), sigma2=0.3)
    y = apply_channel(np.zeros(100_000, complex), ch, substream(9, "noise"))
    assert abs(np.mean(np.abs(y) ** 2) / 0.3 - 1) < 0.02


def test_convolution_theorem():
    cfg = GfdmConfig(K=16, M=5, n_cp=16)
    rng = np.random.default_rng(10)
    grid = rng.standard_normal((16, 5)) + 1j * rng.standard_normal((16, 5))
    x = modulate_fast(grid, cfg)
    prof = TdlProfile(delays=(0, 3, 11), powers=(0.5, 0.3, 0.2))
    ch = draw_channel(prof, cfg.N, substream(10, "tdl"), n_cp=cfg.n_cp)
    y = remove_cp(apply_channel(add_cp(x, cfg), ch, None, n_cp=cfg.n_cp), cfg)
    assert np.max(np.abs(np.fft.fft(y) - ch.H * np.fft.fft(x))) < 1e-9


def test_apply_channel_cp_warning():
    ch = ChannelRealization(np.ones(2, complex), np.array([0, 9]), np.ones(8, complex))
    with pytest.warns(UserWarning):
        apply_channel(np.ones(20, complex), ch, None, n_cp=4)


def test_batched_apply_matches_loop():
    prof = default_tdl_profile()
    ch = draw_channels(prof, 256, substream(11), 3)
    x = np.random.default_rng(11).standard_normal((3, 256)) + 0j
    y = apply_channel(x, ch, None)
    for i in range(3):
        one = ChannelRealization(ch.taps[i], ch.delays, ch.H[i])
        assert np.allclose(y[i], apply_channel(x[i], one, None))


# ---- SINR ----

def test_sinr_collapses_to_snr():
    s = LinkGain(2.0, 1.0, np.ones(10))
    assert np.allclose(compute_sinr(s, [], 0.5, np.arange(10)), 4.0)


def test_symmetric_interferer():
    H = np.exp(1j * np.arange(10))
    s = LinkGain(1.0, 0.5, H)
    g = compute_sinr(s, [LinkGain(1.0, 0.5, H)], 0.1, np.arange(10))
    assert np.allclose(g, 0.5 / 0.6) and np.all(g < 1)


def test_sinr_errors():
    with pytest.raises(ValueError):
        compute_sinr(LinkGain(1.0, 1.0, np.ones(4)), [], 1.0, [])
    with pytest.raises(ValueError):
        LinkGain(1.0, 1.5, np.ones(4))
    with pytest.raises(ValueError):
        LinkGain(0.0, 0.5, np.ones(4))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_int=st.integers(1, 5))
def test_adding_interferer_lowers_sinr(seed, n_int):
    rng = np.random.default_rng(seed)
    J = 12

    def link():
        H = rng.standard_normal(J) + 1j * rng.standard_normal(J) + 0.1
        return LinkGain(float(rng.uniform(0.1, 10)), float(rng.uniform(1e-6, 1)), H)

    serving = link()
    interferers = [link() for _ in range(n_int)]
    alloc = np.arange(J)
    with_all = compute_sinr(serving, interferers, 0.01, alloc)
    fewer = compute_sinr(serving, interferers[:-1], 0.01, alloc)
    assert np.all(with_all < fewer)
    assert np.all(with_all > 0)


def test_snapshot_round_trip(tmp_path):
    H = draw_channels(default_tdl_profile(), 64, substream(12), 5).H
    path = tmp_path / "snap.bin"
    write_snapshots(path, H)
    data = path.read_bytes()
    assert data[:8] == b"GFDMCHN1" and len(data) == 16 + 5 * 64 * 16
    assert np.array_equal(read_snapshots(path), H)
    path.write_bytes(data[:-3])
    with pytest.raises(ValueError):
        read_snapshots(path)
