import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beltloc.dsp import (MultichannelClip, analysis_window, frame_count,
                         inverse_transform_correlation, stft, stft_array)
from beltloc.errors import InsufficientSamplesError

from conftest import naive_dft, naive_idft


def test_clip_validation():
    with pytest.raises(ValueError):
        MultichannelClip(np.zeros(10), 44100)
    with pytest.raises(ValueError):
        MultichannelClip(np.zeros((1, 10)), 44100)
    clip = MultichannelClip(np.zeros((8, 10)), 44100)
    assert clip.channel_count == 8 and clip.length == 10


def test_half_overlap_framing():
    clip = MultichannelClip(np.zeros((2, 4096)), 44100)
    specs = stft(clip, 1024, 512)
    assert len(specs) == 2
    assert specs[0].frame_count == (4096 - 1024) // 512 + 1 == 7
    assert specs[0].bins.shape == (7, 513)
    # 1024 samples at the default rate is the ~23 ms window
    assert 1024 / 44100 == pytest.approx(0.0232, abs=1e-4)


def test_frame_t_covers_its_samples():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 3000))
    bins = stft_array(x, 256, 100, window="rect")
    for t in range(bins.shape[1]):
        np.testing.assert_allclose(bins[0, t], np.fft.rfft(x[0, t * 100:t * 100 + 256]))


def test_zero_signal_gives_zero_bins():
    specs = stft(MultichannelClip(np.zeros((8, 5000)), 44100))
    assert all(np.all(s.bins == 0) for s in specs)


def test_cosine_at_exact_bin_rect_window():
    n, k = 1024, 37
    t = np.arange(n)
    x = np.cos(2 * np.pi * k * t / n)
    clip = MultichannelClip(np.stack([x, x]), 44100)
    row = stft(clip, n, n, window="rect")[0].bins[0]
    oracle = naive_dft(x)[: n // 2 + 1]
    np.testing.assert_allclose(row, oracle, atol=1e-8)
    power = np.abs(row) ** 2
    others = np.delete(power, k)
    assert np.argmax(power) == k
    assert 10 * np.log10(others.max() / power[k]) < -60


def test_insufficient_samples():
    clip = MultichannelClip(np.zeros((2, 1023)), 44100)
    with pytest.raises(InsufficientSamplesError, match="insufficient samples"):
        stft(clip, 1024, 512)


def test_trailing_partial_frame_dropped():
    assert frame_count(1024 + 511, 1024, 512) == 1
    assert frame_count(1024 + 512, 1024, 512) == 2
    assert frame_count(1000, 1024, 512) == 0


@settings(max_examples=50, deadline=None)
@given(length=st.integers(64, 3000), log_n=st.integers(4, 6), hop_frac=st.sampled_from([1, 2, 4]))
def test_frame_count_property(length, log_n, hop_frac):
    n = 2 ** log_n
    hop = n // hop_frac
    x = np.zeros((2, length))
    if length < n:
        with pytest.raises(InsufficientSamplesError):
            stft_array(x, n, hop)
    else:
        assert stft_array(x, n, hop).shape[1] == (length - n) // hop + 1


def test_periodic_hann():
    w = analysis_window(8)
    np.testing.assert_allclose(w, [0, 0.14644661, 0.5, 0.85355339, 1, 0.85355339, 0.5, 0.14644661],
                               atol=1e-8)


def test_round_trip_and_parseval():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2, 4096))
    n = 1024
    bins = stft_array(x, n, 512)
    w = analysis_window(n)
    for t in range(bins.shape[1]):
        frame = x[0, t * 512:t * 512 + n] * w
        back = np.fft.irfft(bins[0, t], n=n)
        assert np.max(np.abs(back - frame)) / np.max(np.abs(frame)) < 1e-9
        full = np.fft.fft(frame)
        energy_t = np.sum(frame ** 2)
        energy_f = np.sum(np.abs(full) ** 2) / n
        assert abs(energy_t - energy_f) / energy_t < 1e-9


def test_inverse_of_all_ones_is_unit_impulse():
    r = inverse_transform_correlation(np.ones(64, dtype=complex))
    expected = np.zeros(64)
    expected[0] = 1.0
    np.testing.assert_allclose(r, expected, atol=1e-15)


@pytest.mark.parametrize("d", [0, 3, 17, -5, -31])
def test_inverse_shift_theorem(d):
    n = 64
    f = np.arange(n)
    r = inverse_transform_correlation(np.exp(-2j * np.pi * f * d / n))
    assert np.argmax(r) == d % n
    assert r[d % n] == pytest.approx(1.0)
    # circular lag convention
    lag = np.argmax(r) if np.argmax(r) < n // 2 else np.argmax(r) - n
    assert lag == d


def test_inverse_matches_naive_idft():
    rng = np.random.default_rng(2)
    n = 256
    half = rng.standard_normal(n // 2 + 1) + 1j * rng.standard_normal(n // 2 + 1)
    half[0] = half[0].real
    half[-1] = half[-1].real
    full = np.concatenate([half, np.conj(half[1:-1][::-1])])
    r = inverse_transform_correlation(full)
    oracle = naive_idft(full)
    assert np.max(np.abs(oracle.imag)) < 1e-9
    assert np.max(np.abs(r - oracle.real)) / np.max(np.abs(oracle.real)) < 1e-9


def test_inverse_rejects_non_power_of_two():
    with pytest.raises(ValueError, match="power of two"):
        inverse_transform_correlation(np.ones(100))
