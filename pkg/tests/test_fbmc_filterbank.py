import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import fftconvolve

from uwbnbi.envgen import IQCapture
from uwbnbi.fbmcss.filterbank import FbmcConfig, analyze, bits_to_streams, despread, filter_bank, modulate, qpsk_map
from uwbnbi.fbmcss.prototype import (composite, design_prototype, nyquist_residual_db, stopband_db,
                                     symbol_spacing)
from uwbnbi.specgram import compute_spectrogram


@pytest.fixture(scope="module")
def proto(cfg):
    return design_prototype(cfg.n_fft, cfg.overlap_factor, cfg.rolloff)


def test_prototype_shape(cfg, proto):
    m = symbol_spacing(cfg.n_fft, cfg.rolloff)
    assert m == 768
    assert proto.size == m * cfg.overlap_factor
    # even length: symmetric about the half-sample point before the centre tap
    np.testing.assert_allclose(proto[1:], proto[1:][::-1], atol=1e-15)
    assert proto.sum() == pytest.approx(1.0, abs=1e-12)


def test_prototype_nyquist_by_direct_lags(cfg, proto):
    # evaluate the composite at symbol-spaced lags straight from the definition
    m = symbol_spacing(cfg.n_fft, cfg.rolloff)
    full = np.correlate(proto, proto, mode="full") * m
    centre = proto.size - 1
    lags = full[centre::m]
    assert lags[0] == pytest.approx(1.0, abs=2e-3)
    assert np.max(np.abs(lags[1:])) < 10 ** (-50 / 20) * lags[0]
    np.testing.assert_allclose(composite(proto, m), lags, atol=1e-12)
    assert nyquist_residual_db(proto, m) < -50


def test_prototype_stopband(cfg, proto):
    assert stopband_db(proto, cfg.n_fft) >= 50
    # independent zero-padded check beyond the adjacent-subcarrier edge
    h = np.abs(np.fft.rfft(proto, 1 << 20))
    f = np.fft.rfftfreq(1 << 20)
    assert 20 * np.log10(h[f >= 1 / (2 * cfg.n_fft)].max() / h[0]) <= -50


@pytest.mark.parametrize("n_fft, overlap", [(3, 12), (96, 12), (512, 3)])
def test_prototype_rejects_bad_arguments(n_fft, overlap):
    with pytest.raises(ValueError):
        design_prototype(n_fft, overlap)


def test_prototype_reports_missed_target():
    with pytest.raises(ValueError, match=r"reaches a Nyquist residual of .* dB and stopband of .* dB"):
        design_prototype(512, 4, 0.5, order=1)


def test_config_rates(cfg):
    assert cfg.sample_rate_hz == pytest.approx(998.4e6)
    assert cfg.coded_rate_bps == pytest.approx(83.2e6, rel=0.01)
    assert cfg.coded_bits == 7680 == cfg.coded_bits_per_block
    assert cfg.spreading_factor == 8
    assert cfg.frame_len == cfg.n_slots * cfg.spacing


@pytest.mark.parametrize("kwargs", [dict(n_subcarriers=192), dict(n_streams=48), dict(symbols_per_block=100),
                                    dict(target_coded_rate_bps=100e6), dict(modulation="16QAM")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        FbmcConfig(**kwargs)


def test_stream_partition(cfg):
    sets = [set(cfg.stream_subcarriers(s)) for s in range(cfg.n_streams)]
    assert set().union(*sets) == set(range(cfg.n_subcarriers))
    assert sum(len(s) for s in sets) == cfg.n_subcarriers
    owner = filter_bank(cfg).stream_of
    assert np.all(owner[1:] != owner[:-1])
    for s in range(cfg.n_streams):
        assert np.all(owner[cfg.stream_subcarriers(s)] == s)


def test_qpsk_gray_mapping():
    np.testing.assert_allclose(qpsk_map([0, 0, 0, 1, 1, 0, 1, 1]) * np.sqrt(2), [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])


def test_symbol_order(cfg):
    bits = np.random.default_rng(0).integers(0, 2, cfg.coded_bits)
    streams = bits_to_streams(bits, cfg)[0]
    sym = qpsk_map(bits)
    q = 77
    assert streams[q % cfg.n_streams, q // cfg.n_streams] == sym[q]


@pytest.fixture(scope="module")
def loopback(cfg):
    bits = np.random.default_rng(5).integers(0, 2, 2 * cfg.coded_bits)
    return bits, modulate(bits, cfg)


def test_loopback_evm(cfg, loopback):
    bits, y = loopback
    streams = bits_to_streams(bits, cfg)
    r = despread(analyze(y, cfg), cfg)
    fb = filter_bank(cfg)
    ref = streams[:, fb.stream_of, :]
    evm = np.sum(np.abs(r - ref) ** 2) / np.sum(np.abs(ref) ** 2)
    assert 10 * np.log10(evm) < -40


def test_synthesis_matches_time_domain_route(cfg):
    # per-subcarrier upsample, filter and mix, circular over one frame
    fb = filter_bank(cfg)
    bits = np.random.default_rng(9).integers(0, 2, cfg.coded_bits)
    y = modulate(bits, cfg)
    slots = fb.subcarrier_slots(bits_to_streams(bits, cfg)[0])
    g = design_prototype(cfg.n_fft, cfg.overlap_factor, cfg.rolloff)
    g = g / np.linalg.norm(g)
    half = g.size // 2
    # prototype centre tap on sample 0, tails wrapped
    gc = np.zeros(fb.Nf)
    gc[:half], gc[fb.Nf - half:] = g[half:], g[:half]
    n = np.arange(fb.Nf)
    c = fb.Nf // cfg.n_fft
    x = np.zeros(fb.Nf, complex)
    for k in range(cfg.n_subcarriers):
        up = np.zeros(2 * fb.Nf, complex)
        up[:fb.Nf:cfg.spacing] = slots[k]
        lin = fftconvolve(up[:fb.Nf], gc)
        base = lin[:fb.Nf].copy()
        base[:lin.size - fb.Nf] += lin[fb.Nf:]
        centre = (k - cfg.n_subcarriers // 2) * c + c // 2
        x += base * np.exp(2j * np.pi * centre * n / fb.Nf)
    err = np.sum(np.abs(y - x) ** 2) / np.sum(np.abs(x) ** 2)
    assert 10 * np.log10(err) < -50


def test_occupied_bandwidth_and_stopband(cfg, loopback):
    _, y = loopback
    scale = 0.5 / np.max(np.abs(y))
    cap = IQCapture((y * scale).astype(np.complex64), cfg.sample_rate_hz, 0.0)
    g = compute_spectrogram(cap, 4096)
    psd = 10 * np.log10(g.linear().mean(axis=0))
    f = g.freqs_hz
    inband = np.median(psd[np.abs(f) < 200e6])
    above = f[psd > inband - 30]
    occupied = above.max() - above.min() + g.df_hz
    assert abs(occupied - cfg.bandwidth_hz) / cfg.bandwidth_hz < 0.05
    assert np.max(psd[np.abs(f) > cfg.bandwidth_hz / 2 + 2 * cfg.subcarrier_spacing_hz]) < inband - 50


def test_modulate_deterministic_and_zero_bits(cfg):
    z = np.zeros(cfg.coded_bits, dtype=np.uint8)
    a, b = modulate(z, cfg), modulate(z, cfg)
    np.testing.assert_array_equal(a, b)
    assert a.size == filter_bank(cfg).Nf


def test_partial_block_rejected(cfg):
    with pytest.raises(ValueError, match="whole number"):
        modulate(np.zeros(cfg.coded_bits - 2), cfg)
    with pytest.raises(ValueError, match="whole number"):
        analyze(np.zeros(1000), cfg)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reconstruction_any_bits(seed):
    cfg = FbmcConfig()
    bits = np.random.default_rng(seed).integers(0, 2, cfg.coded_bits)
    r = despread(analyze(modulate(bits, cfg), cfg), cfg)[0]
    ref = bits_to_streams(bits, cfg)[0][filter_bank(cfg).stream_of]
    assert 10 * np.log10(np.sum(np.abs(r - ref) ** 2) / np.sum(np.abs(ref) ** 2)) < -40
