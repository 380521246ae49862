import numpy as np
import pytest
from scipy import integrate, signal as sps

from beltloc import sim
from beltloc.dsp import stft
from beltloc.errors import ConfigurationError
from beltloc.masking import estimate_noise
from beltloc.tdoa import estimate_tdoas, pair_list


def _arc_length(a, b, t0, t1):
    f = lambda t: np.hypot(a * np.sin(t), b * np.cos(t))
    return integrate.quad(f, t0, t1, limit=200)[0]


def test_default_layout(geometry):
    assert geometry.mic_count == 8 and geometry.motor_count == 15
    az = geometry.motor_azimuths()
    np.testing.assert_allclose(az, np.arange(40, 321, 20), atol=1e-6)
    np.testing.assert_allclose(np.diff(az), 20, atol=1e-6)
    # mic k sits on motor 2k - 1
    np.testing.assert_array_equal(geometry.mic_positions, geometry.motor_positions[::2])
    np.testing.assert_allclose(np.linalg.norm(geometry.motor_positions, axis=1), 0.15)


def test_ellipse_spacing_matches_quadrature():
    a, b = 0.17, 0.12
    g = sim.make_geometry("ellipse", semi_axes=(a, b))
    x, y = g.motor_positions.T
    np.testing.assert_allclose((x / a) ** 2 + (y / b) ** 2, 1.0, atol=1e-12)
    t = np.unwrap(np.arctan2(y / b, x / a))
    gaps = [_arc_length(a, b, t[i], t[i + 1]) for i in range(len(t) - 1)]
    np.testing.assert_allclose(gaps, gaps[0], rtol=1e-5)
    total = _arc_length(a, b, 0, 2 * np.pi)
    assert sum(gaps) == pytest.approx(total * 280 / 360, rel=1e-5)


def test_ellipse_symmetric_about_gap_axis():
    g = sim.make_geometry("ellipse", semi_axes=(0.17, 0.12))
    p = g.motor_positions
    # gap centred at 0 deg: motors mirror across the x axis
    np.testing.assert_allclose(p[::-1] * [1, -1], p, atol=1e-6)


def test_geometry_errors():
    with pytest.raises(ConfigurationError):
        sim.make_geometry(arc_span=10)
    with pytest.raises(ConfigurationError):
        sim.make_geometry(arc_span=360)
    with pytest.raises(ConfigurationError):
        sim.make_geometry("ellipse")
    with pytest.raises(ConfigurationError):
        sim.make_geometry(motor_count=14)
    with pytest.raises(ConfigurationError):
        sim.make_geometry("square")


# -- geometric delays -------------------------------------------------------------------

def test_true_tdoa_properties(geometry):
    az = geometry.motor_azimuths()
    # equidistant from mics 3 and 4 when facing motor 6 between them
    assert sim.true_tdoa(geometry, az[5], 2.0, (3, 4)) == pytest.approx(0, abs=1e-9)
    for a in (0, 77.5, 200):
        assert sim.true_tdoa(geometry, a, 2.0, (2, 5)) == -sim.true_tdoa(geometry, a, 2.0, (5, 2))
    d = sim.true_tdoas(geometry, 33.0, 2.0)
    assert d.shape == (28,)
    assert np.all(np.abs(d) <= 2 * 0.15 * 44100 / 343 + 1e-9)


def test_far_field_limit(geometry):
    # plane-wave delay is the projection of the mic baseline on the arrival direction
    for a in (0, 45, 123, 300):
        u = np.array([np.cos(np.radians(a)), np.sin(np.radians(a))])
        for (i, j) in [(1, 2), (1, 8), (3, 6)]:
            far = -(geometry.mic_positions[i - 1] - geometry.mic_positions[j - 1]) @ u
            far *= 44100 / 343
            assert sim.true_tdoa(geometry, a, 100.0, (i, j)) == pytest.approx(far, abs=0.1)


def test_source_inside_belt(geometry):
    with pytest.raises(ConfigurationError):
        sim.BeltScenario(geometry, 0.0, 0.1)
    with pytest.raises(ConfigurationError):
        sim.propagation_delays(geometry, 0.0, 0.05, 44100)


# -- rendering ----------------------------------------------------------------------------

def test_fractional_delay_group_delay():
    w = np.linspace(0.01, 0.8 * np.pi, 200)
    worst = 0.0
    for frac in (0.0, 0.1, 0.25, 0.5, 0.73, 0.99):
        h = sim.fractional_delay_filter(frac)
        _, gd = sps.group_delay((h, [1.0]), w)
        worst = max(worst, np.max(np.abs(gd - (32 - frac))))
    print(f"worst group delay error {worst:.4f} samples")
    assert worst < 0.01


def test_integer_delay_filter_is_impulse():
    h = sim.fractional_delay_filter(0.0)
    expected = np.zeros(64)
    expected[32] = 1.0
    np.testing.assert_allclose(h, expected, atol=1e-15)


def test_seeded_determinism(geometry):
    sc = sim.BeltScenario(geometry, 45.0, seed=7, duration=0.5)
    a, ta = sim.synthesize(sc)
    b, tb = sim.synthesize(sc)
    np.testing.assert_array_equal(a.samples, b.samples)
    assert ta.to_dict() == tb.to_dict()
    c, _ = sim.synthesize(sim.BeltScenario(geometry, 45.0, seed=8, duration=0.5))
    assert not np.array_equal(a.samples, c.samples)


def test_noise_free_recovers_rounded_delays(geometry):
    sc = sim.BeltScenario(geometry, 250.0, snr_db=np.inf, seed=1)
    clip, truth = sim.synthesize(sc)
    assert truth.noise_std == 0
    est = estimate_tdoas(clip)
    assert np.max(np.abs(est.delays - truth.tdoas)) <= 1.0


def test_exact_recovery_for_integer_delays(geometry):
    # a source where mics 2 and 7 are mirror images has delay(2, 7) exactly 0
    sc = sim.BeltScenario(geometry, 180.0, snr_db=np.inf, seed=2)
    clip, truth = sim.synthesize(sc)
    assert truth.tdoas[pair_list(8).index((2, 7))] == pytest.approx(0, abs=1e-9)
    np.testing.assert_allclose(clip.samples[1], clip.samples[6], atol=1e-9)
    assert estimate_tdoas(clip).get(2, 7) == 0


def test_spherical_attenuation(geometry):
    sc = sim.BeltScenario(geometry, 90.0, snr_db=np.inf, seed=3, duration=1.0)
    clean, delays = sim.render_source(sc)
    dist = delays * 343 / 44100
    rms = np.sqrt(np.mean(clean ** 2, axis=1))
    np.testing.assert_allclose(rms * dist, 0.1, rtol=0.03)


def test_snr_sets_noise_level(geometry):
    sc = sim.BeltScenario(geometry, 90.0, snr_db=10.0, seed=4, duration=1.0)
    clip, truth = sim.synthesize(sc)
    clean, _ = sim.render_source(sc)
    i = truth.nearest_mic - 1
    noise = clip.samples - clean
    snr = 10 * np.log10(np.mean(clean[i] ** 2) / np.mean(noise ** 2))
    assert snr == pytest.approx(10.0, abs=0.2)
    silence = sim.synthesize_silence(sc)
    assert np.std(silence.samples) == pytest.approx(truth.noise_std, rel=0.02)


@pytest.mark.parametrize("spec", [
    sim.SignalSpec("band-limited-noise", f_lo=100, f_hi=500),
    sim.SignalSpec("tone-complex", f0=440, harmonics=8),
])
def test_signal_kinds(spec, geometry):
    clip, _ = sim.synthesize(sim.BeltScenario(geometry, 0.0, signal=spec, snr_db=np.inf,
                                              seed=5, duration=1.0))
    spectrum = np.abs(np.fft.rfft(clip.samples[0])) ** 2
    f = np.fft.rfftfreq(clip.length, 1 / 44100)
    if spec.kind == "band-limited-noise":
        inside = spectrum[(f >= 100) & (f <= 500)].sum()
        assert inside / spectrum.sum() > 0.99
    else:
        assert abs(f[np.argmax(spectrum)] - 440) < 2


def test_signal_spec_validation():
    with pytest.raises(ConfigurationError):
        sim.SignalSpec("pink-noise")
    with pytest.raises(ConfigurationError):
        sim.SignalSpec("band-limited-noise", f_lo=500, f_hi=100)
    with pytest.raises(ConfigurationError):
        sim.SignalSpec("wav-file")
    spec = sim.SignalSpec("tone-complex", f0=220.0, harmonics=4)
    assert sim.SignalSpec.from_dict(spec.to_dict()) == spec


def test_wav_file_source(tmp_path, geometry):
    from beltloc.wavio import write_wav
    rng = np.random.default_rng(6)
    write_wav(rng.standard_normal((1, 8000)) * 0.1, tmp_path / "src.wav", sample_rate=44100)
    spec = sim.SignalSpec("wav-file", path=str(tmp_path / "src.wav"))
    clip, _ = sim.synthesize(sim.BeltScenario(geometry, 10.0, signal=spec, duration=0.5))
    assert clip.length == 22050
    with pytest.raises(ConfigurationError):
        sim.synthesize(sim.BeltScenario(
            geometry, 10.0, signal=sim.SignalSpec("wav-file", path=str(tmp_path / "no.wav"))))


def test_ground_truth_round_trip(geometry):
    _, truth = sim.synthesize(sim.BeltScenario(geometry, 12.5, snr_db=np.inf, duration=0.2))
    back = sim.GroundTruth.from_dict(truth.to_dict())
    assert back.to_dict() == truth.to_dict()
    assert truth.to_dict()["snr_db"] is None


def test_run_sweep(geometry):
    sweep = sim.run_sweep(geometry, "white-noise", sim.SWEEP_ANGLES, duration=0.1, seed=9)
    assert len(sweep) == 40
    assert [t.source_angle for _, t in sweep] == list(range(0, 360, 9))
    assert len({t.seed for _, t in sweep}) == 40
    again = sim.run_sweep(geometry, "white-noise", [0, 9], duration=0.1, seed=9)
    np.testing.assert_array_equal(again[1][0].samples, sweep[1][0].samples)
    with pytest.raises(ConfigurationError):
        sim.run_sweep(geometry, "white-noise", [])
    with pytest.raises(ConfigurationError):
        sim.run_sweep(geometry, "brown-noise", [0])


def test_simulated_noise_floor_is_flat(geometry):
    sc = sim.BeltScenario(geometry, 0.0, seed=10)
    psd = estimate_noise(stft(sim.synthesize_silence(sc))).psd
    assert np.std(psd[10:-10]) / np.mean(psd[10:-10]) < 0.2
