import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfdmlq.modem import (
    GfdmConfig,
    SingularChannel,
    SingularModulation,
    add_cp,
    build_filter,
    check_invertible,
    demodulate_zf,
    equalize_zf,
    modulate_direct,
    modulate_fast,
    modulation_matrix,
    remove_cp,
    zf_noise_weights,
)


def qpsk_grid(rng, shape):
    return ((2 * rng.integers(0, 2, shape) - 1) + 1j * (2 * rng.integers(0, 2, shape) - 1)) / np.sqrt(2)


def triple_loop(grid, g, K, M):
    # independent evaluation of the GFDM sum, one sample at a time
    N = K * M
    x = np.zeros(N, dtype=complex)
    for n in range(N):
        acc = 0j
        for k in range(K):
            for m in range(M):
                acc += g[(n - m * K) % N] * np.exp(-2j * np.pi * k * n / K) * grid[k, m]
        x[n] = acc
    return x


# ---- configuration and filters ----

def test_config_invariants():
    cfg = GfdmConfig(K=128, M=15, K_on=75, n_cp=128)
    assert cfg.N == 1920 and cfg.K_on == 75 and len(set(cfg.active)) == 75
    assert all(0 <= k < 128 for k in cfg.active)
    with pytest.raises(ValueError):
        GfdmConfig(filter="rc", rolloff=1.5)
    with pytest.raises(ValueError):
        GfdmConfig(filter="rc", rolloff=-0.1)
    with pytest.raises(ValueError):
        GfdmConfig(K=4, M=2, active=(0, 0))
    with pytest.raises(ValueError):
        GfdmConfig(K=4, M=2, active=(4,))
    with pytest.raises(ValueError):
        GfdmConfig(K=4, M=2, n_cp=9)


def test_dirichlet_m1_is_flat():
    g = build_filter(GfdmConfig(K=4, M=1)).g
    assert np.allclose(g, 0.5, atol=1e-15)


def test_rc_zero_rolloff_equals_dirichlet():
    a = build_filter(GfdmConfig(K=16, M=5, filter="rc", rolloff=0.0)).g
    b = build_filter(GfdmConfig(K=16, M=5)).g
    assert np.array_equal(a, b)


@pytest.mark.parametrize("filt,alpha", [("dirichlet", 0.0), ("rc", 0.1), ("rc", 0.9)])
def test_filter_unit_energy(filt, alpha):
    f = build_filter(GfdmConfig(K=64, M=9, filter=filt, rolloff=alpha))
    assert f.g.shape == (576,)
    assert abs(np.sum(np.abs(f.g) ** 2) - 1) < 1e-12


def test_dirichlet_spectrum_covers_exactly_m_bins():
    for M in (3, 4, 9):
        f = build_filter(GfdmConfig(K=8, M=M))
        assert f.support.size == M


def test_rc_overlaps_only_adjacent_subcarriers():
    cfg = GfdmConfig(K=16, M=9, filter="rc", rolloff=0.9)
    f = build_filter(cfg)
    nu = np.fft.fftfreq(cfg.N, d=1.0 / cfg.N) / cfg.M
    assert np.max(np.abs(nu[f.support])) <= 1.0


# ---- modulation ----

def test_zero_grid_gives_zero_block():
    cfg = GfdmConfig(K=8, M=5)
    f = build_filter(cfg)
    z = np.zeros((8, 5), complex)
    assert np.all(modulate_direct(z, f, cfg) == 0)
    assert np.all(modulate_fast(z, cfg) == 0)


def test_single_symbol_reproduces_filter():
    cfg = GfdmConfig(K=8, M=5, filter="rc", rolloff=0.5)
    f = build_filter(cfg)
    d = np.zeros((8, 5), complex)
    d[0, 0] = 1
    assert np.array_equal(modulate_direct(d, f, cfg), f.g.astype(complex))
    assert np.allclose(modulate_fast(d, cfg), f.g, atol=1e-14)


def test_direct_matches_triple_loop():
    rng = np.random.default_rng(3)
    cfg = GfdmConfig(K=4, M=3)
    f = build_filter(cfg)
    d = qpsk_grid(rng, (4, 3))
    assert np.max(np.abs(modulate_direct(d, f, cfg) - triple_loop(d, f.g, 4, 3))) < 1e-12


def test_matrix_form_matches_direct():
    rng = np.random.default_rng(4)
    cfg = GfdmConfig(K=8, M=3, filter="rc", rolloff=0.9)
    f = build_filter(cfg)
    d = qpsk_grid(rng, (8, 3))
    assert np.allclose(modulation_matrix(f, cfg) @ d.ravel(), modulate_direct(d, f, cfg), atol=1e-12)


@pytest.mark.parametrize("K", [4, 8, 16])
@pytest.mark.parametrize("M", [1, 3, 5])
@pytest.mark.parametrize("filt,alpha", [("dirichlet", 0.0), ("rc", 0.9)])
def test_fast_matches_direct(K, M, filt, alpha):
    rng = np.random.default_rng(K * 10 + M)
    cfg = GfdmConfig(K=K, M=M, filter=filt, rolloff=alpha)
    f = build_filter(cfg)
    grids = rng.standard_normal((100, K, M)) + 1j * rng.standard_normal((100, K, M))
    ref = modulate_direct(grids, f, cfg)
    err = np.max(np.abs(modulate_fast(grids, cfg) - ref), axis=-1) / np.max(np.abs(ref), axis=-1)
    assert err.max() < 1e-9


def test_m1_reduces_to_ofdm():
    rng = np.random.default_rng(5)
    K = 16
    cfg = GfdmConfig(K=K, M=1)
    d = qpsk_grid(rng, (K, 1))
    x = modulate_fast(d, cfg)
    # subcarrier k sits at bin -k: an inverse DFT of the index-reversed symbols
    ofdm = np.fft.ifft(d[(-np.arange(K)) % K, 0])
    ratio = x / ofdm
    assert np.allclose(ratio, ratio[0], atol=1e-12)
    assert np.isclose(abs(ratio[0]), np.sqrt(K))


def test_frequency_shift_preserves_magnitude():
    cfg = GfdmConfig(K=8, M=5, filter="rc", rolloff=0.5)
    d = np.zeros((8, 5), complex)
    d[2, 0] = 1
    assert np.allclose(np.abs(modulate_fast(d, cfg)), np.abs(build_filter(cfg).g), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.complex_numbers(max_magnitude=10, allow_nan=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    cfg = GfdmConfig(K=8, M=5, filter="rc", rolloff=0.9)
    d1, d2 = qpsk_grid(rng, (8, 5)), qpsk_grid(rng, (8, 5))
    lhs = modulate_fast(a * d1 + b * d2, cfg)
    rhs = a * modulate_fast(d1, cfg) + b * modulate_fast(d2, cfg)
    assert np.max(np.abs(lhs - rhs)) < 1e-10 * max(1.0, abs(a) + abs(b))


@pytest.mark.parametrize("filt,alpha", [("dirichlet", 0.0), ("rc", 0.9)])
def test_average_energy_preserved(filt, alpha):
    rng = np.random.default_rng(6)
    cfg = GfdmConfig(K=16, M=5, filter=filt, rolloff=alpha)
    d = qpsk_grid(rng, (1000, 16, 5))
    e_x = np.mean(np.sum(np.abs(modulate_fast(d, cfg)) ** 2, axis=-1))
    e_d = np.mean(np.sum(np.abs(d) ** 2, axis=(-2, -1)))
    assert abs(e_x / e_d - 1) < 0.01


def test_inactive_subcarriers_do_not_radiate_outside_their_band():
    cfg = GfdmConfig(K=16, M=5, K_on=4)
    d = np.zeros((16, 5), complex)
    d[list(cfg.active)] = 1
    X = np.fft.fft(modulate_fast(d, cfg))
    used = np.zeros(cfg.N, bool)
    for k in cfg.active:
        used[(np.arange(-2, 3) - k * 5) % cfg.N] = True
    assert np.allclose(X[~used], 0, atol=1e-12)


# ---- cyclic prefix ----

def test_cp_example():
    cfg = GfdmConfig(K=4, M=2, n_cp=2)
    x = np.arange(8) + 0j
    assert np.array_equal(add_cp(x, cfg), np.array([6, 7, 0, 1, 2, 3, 4, 5, 6, 7]))
    assert np.array_equal(remove_cp(add_cp(x, cfg), cfg), x)


def test_cp_round_trip_and_noop():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((3, 40)) + 1j * rng.standard_normal((3, 40))
    cfg = GfdmConfig(K=8, M=5, n_cp=7)
    assert np.array_equal(remove_cp(add_cp(x, cfg), cfg), x)
    cfg0 = GfdmConfig(K=8, M=5, n_cp=0)
    assert np.array_equal(add_cp(x, cfg0), x)
    with pytest.raises(ValueError):
        remove_cp(x, cfg)
    with pytest.raises(ValueError):
        add_cp(x[:, :10], cfg)


# ---- equaliser ----

def test_equalize_identity_and_flat():
    rng = np.random.default_rng(8)
    cfg = GfdmConfig(K=8, M=5)
    x = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    assert np.allclose(equalize_zf(x, np.ones(40), cfg), x, atol=1e-14)
    c = 0.3 - 0.7j
    assert np.allclose(equalize_zf(x, np.full(40, c), cfg), x / c, atol=1e-13)


def test_equalize_inverts_random_channel():
    rng = np.random.default_rng(9)
    cfg = GfdmConfig(K=8, M=5)
    x = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    H = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    H = H / np.abs(H) * (0.1 + rng.random(40))
    r = np.fft.ifft(np.fft.fft(x) * H)
    assert np.max(np.abs(equalize_zf(r, H, cfg) - x)) < 1e-9


def test_equalize_singular_channel():
    cfg = GfdmConfig(K=8, M=5, K_on=2)
    H = np.ones(40, complex)
    H[0] = 0  # bin 0 belongs to the DC subcarrier, which is active
    with pytest.raises(SingularChannel):
        equalize_zf(np.ones(40), H, cfg)
    # a null on an unused bin is tolerated
    H = np.ones(40, complex)
    H[20] = 0
    assert np.all(np.isfinite(equalize_zf(np.ones(40), H, cfg)))


# ---- demodulation ----

@pytest.mark.parametrize("filt,alpha", [("dirichlet", 0.0), ("rc", 0.1), ("rc", 0.9)])
def test_perfect_reconstruction_table1(filt, alpha):
    rng = np.random.default_rng(10)
    cfg = GfdmConfig(K=64, M=9, filter=filt, rolloff=alpha)
    d = qpsk_grid(rng, (5, 64, 9))
    assert np.max(np.abs(demodulate_zf(modulate_fast(d, cfg), cfg) - d)) < 1e-9


def test_demodulate_zero():
    cfg = GfdmConfig(K=8, M=5)
    assert np.all(demodulate_zf(np.zeros(40, complex), cfg) == 0)


def test_demodulate_matches_matrix_inverse():
    rng = np.random.default_rng(11)
    cfg = GfdmConfig(K=16, M=9, filter="rc", rolloff=0.9)
    A = modulation_matrix(build_filter(cfg), cfg)
    x = rng.standard_normal(cfg.N) + 1j * rng.standard_normal(cfg.N)
    ref = np.linalg.solve(A, x).reshape(16, 9)
    assert np.max(np.abs(demodulate_zf(x, cfg) - ref)) < 1e-9


def test_singular_modulation_detected():
    cfg = GfdmConfig(K=8, M=4, filter="rc", rolloff=0.5)
    with pytest.raises(SingularModulation):
        check_invertible(cfg)
    with pytest.raises(SingularModulation):
        demodulate_zf(np.zeros(32, complex), cfg)
    assert check_invertible(GfdmConfig(K=8, M=5, filter="rc", rolloff=0.5)) < 1e12


@pytest.mark.parametrize("filt,alpha", [("dirichlet", 0.0), ("rc", 0.9)])
def test_zf_noise_weights_match_dense_covariance(filt, alpha):
    rng = np.random.default_rng(12)
    cfg = GfdmConfig(K=8, M=5, filter=filt, rolloff=alpha)
    N = cfg.N
    A = modulation_matrix(build_filter(cfg), cfg)
    F = np.fft.fft(np.eye(N)) / np.sqrt(N)  # unitary DFT
    v = rng.random(N) + 0.1
    cov_t = F.conj().T @ np.diag(v) @ F
    Ainv = np.linalg.inv(A)
    dense = np.real(np.diag(Ainv @ cov_t @ Ainv.conj().T)).reshape(8, 5)
    W = zf_noise_weights(cfg)
    assert np.allclose(dense, (W @ v)[:, None], rtol=1e-10)
    if filt == "dirichlet":
        assert np.allclose(W.sum(axis=1), 1.0)
