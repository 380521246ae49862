"""Belt acoustic simulator.

Places microphones and haptic motors along a circular or elliptical belt,
propagates a point source spherically (fractional delay plus 1/r
attenuation) and adds independent white noise per channel. There is no
room, torso or diffraction model.

Azimuth is measured counter-clockwise from the +x axis, in degrees. Motor
``i`` (1-based) sits at the ``i``-th of ``motor_count`` evenly spaced points
along the belt arc; microphone ``k`` sits on motor ``2k - 1``, so motor
``2k`` is the perimeter midpoint of microphones ``k`` and ``k + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import MultichannelClip
from .errors import ConfigurationError
from .tdoa import pair_list

FD_TAPS = 64
_FD_CENTER = FD_TAPS // 2
_ARC_GRID = 20001


class SimulationError(ConfigurationError):
    """Invalid geometry, scenario or source description."""


@dataclass(frozen=True, eq=False)
class BeltGeometry:
    mic_positions: np.ndarray     # (mics, 2), meters
    motor_positions: np.ndarray   # (motors, 2), meters
    semi_axes: tuple[float, float]
    arc_span: float
    gap_center: float = 0.0
    speed_of_sound: float = 343.0

    @property
    def shape(self) -> str:
        a, b = self.semi_axes
        return "circle" if a == b else "ellipse"

    @property
    def mic_count(self) -> int:
        return len(self.mic_positions)

    @property
    def motor_count(self) -> int:
        return len(self.motor_positions)

    @property
    def max_radius(self) -> float:
        return float(max(self.semi_axes))

    def motor_azimuths(self) -> np.ndarray:
        """Polar angle of each motor position, degrees in [0, 360)."""
        x, y = self.motor_positions.T
        return np.degrees(np.arctan2(y, x)) % 360.0

    def contains(self, point) -> bool:
        a, b = self.semi_axes
        x, y = point
        return (x / a) ** 2 + (y / b) ** 2 <= 1.0

    def to_dict(self) -> dict:
        a, b = self.semi_axes
        d = {"shape": self.shape, "arc_span": self.arc_span,
             "gap_center": self.gap_center, "speed_of_sound": self.speed_of_sound,
             "mic_count": self.mic_count}
        if a == b:
            d["radius"] = a
        else:
            d["semi_axes"] = [a, b]
        return d


def _perimeter_table(a: float, b: float):
    """Cumulative arc length of the ellipse against its parameter angle."""
    t = np.linspace(0.0, 2 * np.pi, _ARC_GRID)
    speed = np.hypot(a * np.sin(t), b * np.cos(t))
    s = np.concatenate([[0.0], np.cumsum((speed[1:] + speed[:-1]) / 2 * np.diff(t))])
    return t, s


def make_geometry(shape: str = "circle", radius: float = 0.15,
                  semi_axes: tuple[float, float] | None = None,
                  arc_span: float = 280.0, gap_center: float = 0.0,
                  mic_count: int = 8, motor_count: int | None = None,
                  speed_of_sound: float = 343.0) -> BeltGeometry:
    """Lay out a belt.

    Motors are evenly spaced by arc length over ``arc_span`` degrees worth of
    perimeter (``arc_span / 360`` of the full length), leaving a gap centred
    on azimuth ``gap_center``.
    """
    if shape == "circle":
        a = b = float(radius)
    elif shape == "ellipse":
        if semi_axes is None:
            raise SimulationError("an ellipse needs semi_axes")
        a, b = map(float, semi_axes)
    else:
        raise SimulationError(f"unknown belt shape {shape!r}")
    if a <= 0 or b <= 0:
        raise SimulationError("belt dimensions must be positive")
    if mic_count < 2:
        raise SimulationError("need at least two microphones")
    if motor_count is None:
        motor_count = 2 * mic_count - 1
    if motor_count != 2 * mic_count - 1:
        raise SimulationError("motor_count must be 2 * mic_count - 1")
    if not (motor_count - 1) <= arc_span < 360:
        raise SimulationError(
            f"arc_span must be in [{motor_count - 1}, 360) degrees, got {arc_span}")
    if speed_of_sound <= 0:
        raise SimulationError("speed_of_sound must be positive")

    t_grid, s_grid = _perimeter_table(a, b)
    total = s_grid[-1]
    # arc starts half a span after the gap centre (counter-clockwise)
    t0 = np.radians(gap_center + 180.0) % (2 * np.pi)
    t0 = _ellipse_param_for_azimuth(a, b, t0)
    s0 = np.interp(t0, t_grid, s_grid) - total * arc_span / 720.0
    s = s0 + np.linspace(0.0, total * arc_span / 360.0, motor_count)
    t = np.interp(s % total, s_grid, t_grid)
    motors = np.column_stack([a * np.cos(t), b * np.sin(t)])
    mics = motors[::2].copy()
    return BeltGeometry(mics, motors, (a, b), float(arc_span), float(gap_center),
                        float(speed_of_sound))


def _ellipse_param_for_azimuth(a: float, b: float, phi: float) -> float:
    """Parameter angle of the ellipse point lying at polar angle ``phi``."""
    return float(np.arctan2(a * np.sin(phi), b * np.cos(phi)) % (2 * np.pi))


def source_position(angle: float, distance: float) -> np.ndarray:
    rad = np.radians(angle)
    return distance * np.array([np.cos(rad), np.sin(rad)])


def propagation_delays(geometry: BeltGeometry, angle: float, distance: float,
                       sample_rate: float) -> np.ndarray:
    """Source-to-microphone travel time of every mic, in samples."""
    src = source_position(angle, distance)
    if geometry.contains(src):
        raise SimulationError("source lies inside the belt perimeter")
    dist = np.linalg.norm(geometry.mic_positions - src, axis=1)
    return dist * sample_rate / geometry.speed_of_sound


def true_tdoa(geometry: BeltGeometry, angle: float, distance: float,
              pair: tuple[int, int], sample_rate: float = 44100) -> float:
    """Geometric delay ``t_u - t_v`` in samples for 1-based mic pair ``(u, v)``."""
    u, v = pair
    d = propagation_delays(geometry, angle, distance, sample_rate)
    return float(d[u - 1] - d[v - 1])


def true_tdoas(geometry: BeltGeometry, angle: float, distance: float,
               sample_rate: float = 44100) -> np.ndarray:
    d = propagation_delays(geometry, angle, distance, sample_rate)
    return np.array([d[u - 1] - d[v - 1] for u, v in pair_list(geometry.mic_count)])


def fractional_delay_filter(frac: float, taps: int = FD_TAPS) -> np.ndarray:
    """Blackman-windowed sinc delaying by ``taps // 2 - frac`` samples.

    ``np.convolve(x, h)[n]`` approximates ``x(n - taps//2 + frac)``. The
    window is centred on the sinc peak.
    """
    k = np.arange(taps)
    center = taps // 2 - frac
    x = (k - center) / taps + 0.5
    w = 0.42 - 0.5 * np.cos(2 * np.pi * x) + 0.08 * np.cos(4 * np.pi * x)
    w[(x < 0) | (x > 1)] = 0.0
    return np.sinc(k - center) * w


@dataclass(frozen=True)
class SignalSpec:
    """Source waveform description.

    ``kind`` is one of ``white-noise``, ``band-limited-noise`` (uses
    ``f_lo``/``f_hi``), ``tone-complex`` (``f0`` and ``harmonics``) or
    ``wav-file`` (``path``).
    """

    kind: str = "white-noise"
    f_lo: float | None = None
    f_hi: float | None = None
    f0: float = 440.0
    harmonics: int = 8
    path: str | None = None
    rms: float = 0.1

    KINDS = ("white-noise", "band-limited-noise", "tone-complex", "wav-file")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise SimulationError(f"unsupported signal kind {self.kind!r}")
        if self.kind == "band-limited-noise":
            if self.f_lo is None or self.f_hi is None or not 0 <= self.f_lo < self.f_hi:
                raise SimulationError("band-limited noise needs 0 <= f_lo < f_hi")
        if self.kind == "wav-file" and not self.path:
            raise SimulationError("wav-file signal needs a path")

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "band-limited-noise":
            d.update(f_lo=self.f_lo, f_hi=self.f_hi)
        elif self.kind == "tone-complex":
            d.update(f0=self.f0, harmonics=self.harmonics)
        elif self.kind == "wav-file":
            d["path"] = self.path
        if self.rms != 0.1:
            d["rms"] = self.rms
        return d

    @classmethod
    def from_dict(cls, d) -> "SignalSpec":
        if isinstance(d, str):
            return cls(kind=d)
        try:
            return cls(**d)
        except TypeError as exc:
            raise SimulationError(f"bad signal description {d!r}: {exc}") from None


def source_waveform(signal: SignalSpec, length: int, sample_rate: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Mono source signal of ``length`` samples scaled to ``signal.rms``."""
    if signal.kind == "white-noise":
        s = rng.standard_normal(length)
    elif signal.kind == "band-limited-noise":
        spec = np.fft.rfft(rng.standard_normal(length))
        f = np.fft.rfftfreq(length, 1.0 / sample_rate)
        spec[(f < signal.f_lo) | (f > signal.f_hi)] = 0.0
        s = np.fft.irfft(spec, n=length)
    elif signal.kind == "tone-complex":
        t = np.arange(length) / sample_rate
        s = np.zeros(length)
        for h in range(1, signal.harmonics + 1):
            fh = h * signal.f0
            if fh >= sample_rate / 2:
                break
            s += np.sin(2 * np.pi * fh * t + rng.uniform(0, 2 * np.pi)) / h
    else:
        mono, rate = _read_mono(signal.path)
        if rate != sample_rate:
            raise SimulationError(
                f"{signal.path}: sample rate {rate} differs from {sample_rate}")
        if mono.size == 0:
            raise SimulationError(f"{signal.path}: no samples")
        s = np.resize(mono, length)
    rms = np.sqrt(np.mean(s ** 2))
    if rms == 0:
        return s
    return s * (signal.rms / rms)


def _read_mono(path):
    from .wavio import WavError, read_wav_array

    try:
        samples, rate, _ = read_wav_array(path)
    except WavError as exc:
        raise SimulationError(f"cannot read source wav {path}: {exc}") from None
    return samples.mean(axis=0), rate


@dataclass(frozen=True)
class BeltScenario:
    geometry: BeltGeometry
    source_angle: float
    source_distance: float = 2.0
    signal: SignalSpec = field(default_factory=SignalSpec)
    duration: float = 2.0
    snr_db: float = 20.0
    seed: int = 0
    sample_rate: int = 44100

    def __post_init__(self):
        if not self.duration > 0:
            raise SimulationError("duration must be positive")
        if not self.source_distance > self.geometry.max_radius:
            raise SimulationError("source must lie outside the belt")
        if int(round(self.duration * self.sample_rate)) < 1:
            raise SimulationError("duration shorter than one sample")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    source_angle: float
    source_distance: float
    tdoas: np.ndarray
    nearest_mic: int
    noise_std: float
    snr_db: float
    seed: int
    signal: dict

    def to_dict(self) -> dict:
        return {
            "source_angle": float(self.source_angle),
            "source_distance": float(self.source_distance),
            "tdoas": [float(x) for x in self.tdoas],
            "nearest_mic": int(self.nearest_mic),
            "noise_std": float(self.noise_std),
            "snr_db": _json_float(self.snr_db),
            "seed": int(self.seed),
            "signal": self.signal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        snr = d["snr_db"]
        return cls(float(d["source_angle"]), float(d["source_distance"]),
                   np.array(d["tdoas"], dtype=float), int(d["nearest_mic"]),
                   float(d["noise_std"]), float("inf") if snr is None else float(snr),
                   int(d["seed"]), d["signal"])


def _json_float(x: float):
    return None if np.isinf(x) else float(x)


def _noise_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 1]))


def render_source(scenario: BeltScenario) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free microphone signals and per-mic delays (samples)."""
    fs = scenario.sample_rate
    n_out = int(round(scenario.duration * fs))
    delays = propagation_delays(scenario.geometry, scenario.source_angle,
                                scenario.source_distance, fs)
    base = int(np.ceil(delays.max())) + 1
    rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, 0]))
    s = source_waveform(scenario.signal, n_out + base + 2 * FD_TAPS, fs, rng)
    mic_dist = delays * scenario.geometry.speed_of_sound / fs
    out = np.empty((len(delays), n_out))
    for m, d in enumerate(delays):
        # y[n] = s(n + base - d)
        shift = base - d
        whole = int(np.floor(shift))
        frac = shift - whole
        z = np.convolve(s, fractional_delay_filter(frac))
        start = whole + _FD_CENTER
        out[m] = z[start:start + n_out] / mic_dist[m]
    return out, delays


def synthesize(scenario: BeltScenario) -> tuple[MultichannelClip, GroundTruth]:
    """Render a scenario into a multichannel clip plus its ground truth.

    Noise power is set relative to the signal power at the microphone nearest
    the source; ``snr_db = inf`` disables noise.
    """
    clean, delays = render_source(scenario)
    nearest = int(np.argmin(delays))
    p_sig = float(np.mean(clean[nearest] ** 2))
    if np.isinf(scenario.snr_db) and scenario.snr_db > 0:
        noise_std = 0.0
        noisy = clean
    else:
        noise_std = float(np.sqrt(p_sig / 10 ** (scenario.snr_db / 10)))
        noisy = clean + noise_std * _noise_rng(scenario.seed).standard_normal(clean.shape)
    truth = GroundTruth(
        source_angle=float(scenario.source_angle),
        source_distance=float(scenario.source_distance),
        tdoas=np.array([delays[u - 1] - delays[v - 1]
                        for u, v in pair_list(len(delays))]),
        nearest_mic=nearest + 1,
        noise_std=noise_std,
        snr_db=float(scenario.snr_db),
        seed=int(scenario.seed),
        signal=scenario.signal.to_dict(),
    )
    return MultichannelClip(noisy, scenario.sample_rate), truth


def synthesize_silence(scenario: BeltScenario, duration: float | None = None,
                       noise_std: float | None = None) -> MultichannelClip:
    """Background noise alone, at the level ``scenario`` would add to its source."""
    if noise_std is None:
        noise_std = synthesize(scenario)[1].noise_std
    fs = scenario.sample_rate
    n = int(round((duration or scenario.duration) * fs))
    rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, 2]))
    x = noise_std * rng.standard_normal((scenario.geometry.mic_count, n))
    return MultichannelClip(x, fs)


def derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def run_sweep(geometry: BeltGeometry, signal: SignalSpec | str, angles,
              snr_db: float = 20.0, seed: int = 0, duration: float = 2.0,
              source_distance: float = 2.0, sample_rate: int = 44100):
    """One synthesized clip per angle; seeds derived from ``seed`` and the index.

    Returns a list of ``(clip, truth)`` tuples in the order of ``angles``.
    """
    if isinstance(signal, str):
        signal = SignalSpec(signal)
    angles = list(angles)
    if not angles:
        raise SimulationError("angle list is empty")
    scenarios = [BeltScenario(geometry, float(a), source_distance, signal, duration,
                              snr_db, derive_seed(seed, i), sample_rate)
                 for i, a in enumerate(angles)]
    return [synthesize(s) for s in scenarios]


SWEEP_ANGLES = tuple(range(0, 360, 9))
ANCHOR_ANGLES = tuple(range(0, 360, 45))
