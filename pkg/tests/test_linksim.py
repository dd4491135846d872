import numpy as np
import pytest

from gfdmlq.channel import default_tdl_profile, draw_channels
from gfdmlq.fec import parse_mcs
from gfdmlq.linkexp import draw_ensemble, ensemble_gains
from gfdmlq.linksim import LinkSimulator, allocation_bins, sinr_units, snr_to_sigma2
from gfdmlq.modem import GfdmConfig, zf_noise_weights
from gfdmlq.rng import substream

SMALL = GfdmConfig(K=16, M=5, K_on=12, n_cp=8)


def test_allocation_bins_cover_active_band():
    b = allocation_bins(SMALL)
    assert len(b) == len(np.unique(b)) == 12 * 5
    full = allocation_bins(GfdmConfig(K=16, M=5))
    assert np.array_equal(full, np.arange(80))


def test_sample_units_are_allocated_bins():
    s = np.random.default_rng(0).uniform(0.1, 10, (3, SMALL.N))
    assert np.array_equal(sinr_units(s, SMALL), s[:, allocation_bins(SMALL)])


@pytest.mark.parametrize("filt,alpha", [("dirichlet", 0.0), ("rc", 0.5)])
def test_symbol_units_match_receiver_noise(filt, alpha):
    cfg = GfdmConfig(K=16, M=5, K_on=12, n_cp=8, filter=filt, rolloff=alpha)
    sim = LinkSimulator(cfg, parse_mcs("QPSK-1/3"))
    H = draw_channels(default_tdl_profile(), cfg.N, substream(1, "h"), 4).H
    sigma2 = 0.2
    units = sinr_units(np.abs(H) ** 2 / sigma2, cfg, "symbol")
    assert units.shape == (4, 12)
    var = sim.symbol_variance(H, np.full(cfg.N, sigma2))
    assert np.allclose(1 / units, var[:, ::cfg.M])


def test_symbol_units_flat_and_harmonic():
    # orthogonal filter: a flat channel maps to itself
    assert np.allclose(sinr_units(np.full(SMALL.N, 3.0), SMALL, "symbol"), 3.0)
    # a subcarrier sees the harmonic mean of its samples, never more than the arithmetic one
    s = np.random.default_rng(1).uniform(0.1, 10, SMALL.N)
    sym = sinr_units(s, SMALL, "symbol")
    W = zf_noise_weights(SMALL)[np.asarray(SMALL.active)]
    assert np.all((W > 1e-12).sum(axis=1) == SMALL.M)
    arith = np.array([s[w > 1e-12].mean() for w in W])
    assert np.all(sym <= arith + 1e-12) and np.all(sym >= s.min())
    with pytest.raises(ValueError):
        sinr_units(s, SMALL, "bin")


def test_ensemble_gains_scale_with_snr():
    ens = draw_ensemble("tdl", SMALL, 3, 2)
    for g in ("sample", "symbol"):
        gains = ensemble_gains(ens, SMALL, g)
        assert np.allclose(sinr_units(np.abs(ens.H) ** 2 * 7.0, SMALL, g), 7.0 * gains)


def test_noiseless_link_is_error_free():
    sim = LinkSimulator(SMALL, parse_mcs("16QAM-1/2"))
    st = sim.run(20, substream(3, "p"), 1e-6)
    assert st.packets == 20 and st.block_errors == 0 and st.bit_errors == 0
    assert float(snr_to_sigma2(10.0)) == pytest.approx(0.1)


def test_run_reproducible():
    sim = LinkSimulator(SMALL, parse_mcs("QPSK-1/3"))
    a = sim.run(30, substream(4, "p"), float(snr_to_sigma2(-2.0)))
    b = sim.run(30, substream(4, "p"), float(snr_to_sigma2(-2.0)))
    assert (a.block_errors, a.bit_errors) == (b.block_errors, b.bit_errors)
