import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beltloc.dsp import MultichannelClip, Spectrogram, analysis_window, stft
from beltloc.masking import BinaryMask, NoiseProfile, compute_mask, estimate_noise


def _clip(x):
    return MultichannelClip(x, 44100)


def _noise_clip(rng, frames, channels=8, n=1024, hop=512, scale=1.0):
    length = (frames - 1) * hop + n
    return _clip(scale * rng.standard_normal((channels, length)))


def test_silent_input_gives_zero_psd():
    prof = estimate_noise(stft(_clip(np.zeros((8, 4096)))))
    assert np.all(prof.psd == 0)
    assert prof.frames_observed == 7


def test_single_frame_single_channel_is_exact():
    rng = np.random.default_rng(0)
    bins = rng.standard_normal((1, 513)) + 1j * rng.standard_normal((1, 513))
    prof = estimate_noise([Spectrogram(bins, 1024, 512, 44100)])
    np.testing.assert_array_equal(prof.psd, np.abs(bins[0]) ** 2)
    assert prof.frames_observed == 1


def test_white_noise_psd_matches_window_energy():
    rng = np.random.default_rng(1)
    prof = estimate_noise(stft(_noise_clip(rng, 200)))
    expected = np.sum(analysis_window(1024) ** 2)
    assert prof.frames_observed == 200
    assert np.max(np.abs(prof.psd / expected - 1)) < 0.2


def test_zero_frames_rejected():
    with pytest.raises(ValueError):
        estimate_noise([Spectrogram(np.zeros((0, 513), complex), 1024, 512, 44100)])
    with pytest.raises(ValueError):
        NoiseProfile(np.zeros(513), 0)
    with pytest.raises(ValueError):
        NoiseProfile(-np.ones(513), 3)


def test_zero_noise_keeps_every_bin_with_power():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 2048))
    x[:, 1024:] = 0.0
    specs = stft(_clip(x), 1024, 512)
    mask = compute_mask(specs, NoiseProfile(np.zeros(513), 1))
    power = np.mean([s.power for s in specs], axis=0)
    np.testing.assert_array_equal(mask.values, (power > 0).astype(np.uint8))
    assert mask.values[0].all() and not mask.values[2].any()


def test_noise_like_signal_mostly_masked():
    rng = np.random.default_rng(3)
    noise = estimate_noise(stft(_noise_clip(rng, 200)))
    mask = compute_mask(stft(_noise_clip(rng, 100)), noise, beta=2.0)
    density = mask.values.mean()
    print(f"noise-only mask density: {density:.4f}")
    assert density < 0.1


def test_loud_burst_passes_mask():
    rng = np.random.default_rng(4)
    noise = estimate_noise(stft(_noise_clip(rng, 200)))
    burst = _noise_clip(rng, 50, scale=10.0)  # 20 dB over the floor
    mask = compute_mask(stft(burst), noise, beta=2.0)
    assert mask.density.min() > 0.9
    assert mask.reliable().all()


def test_all_zero_mask_is_unreliable():
    m = BinaryMask(np.zeros((3, 513), dtype=np.uint8))
    assert not m.reliable().any()
    m = BinaryMask(np.zeros((1, 100), dtype=np.uint8))
    m.values[0, :4] = 1
    assert not m.reliable(0.05)[0]
    m.values[0, :5] = 1
    assert m.reliable(0.05)[0]


def test_shape_mismatch():
    rng = np.random.default_rng(5)
    specs = stft(_noise_clip(rng, 3))
    with pytest.raises(ValueError):
        compute_mask(specs, NoiseProfile(np.ones(257), 1))
    with pytest.raises(ValueError):
        compute_mask(specs, NoiseProfile(np.ones(513), 1), beta=0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), b1=st.floats(0.1, 10), b2=st.floats(0.1, 10),
       scale=st.floats(1e-3, 1e3))
def test_mask_monotone_scale_covariant_deterministic(seed, b1, b2, scale):
    rng = np.random.default_rng(seed)
    specs = stft(_noise_clip(rng, 4, channels=2, n=64, hop=32), 64, 32)
    noise = NoiseProfile(rng.uniform(0, 20, 33), 5)
    lo, hi = sorted([b1, b2])
    m_lo = compute_mask(specs, noise, lo).values
    m_hi = compute_mask(specs, noise, hi).values
    assert np.all(m_hi <= m_lo)
    # scaling amplitude by s scales power by s^2; use a power of two so it is exact
    s = 2.0 ** np.round(np.log2(scale))
    scaled = [Spectrogram(sp.bins * s, sp.frame_size, sp.hop, sp.sample_rate) for sp in specs]
    noise_scaled = NoiseProfile(noise.psd * s * s, 5)
    np.testing.assert_array_equal(compute_mask(scaled, noise_scaled, lo).values, m_lo)
    np.testing.assert_array_equal(compute_mask(specs, noise, lo).values, m_lo)
    assert set(np.unique(m_lo)) <= {0, 1}
