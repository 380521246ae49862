"""Kernel-scored direction of arrival and haptic motor selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import CalibrationProfile
from .config import Config, KernelParams
from .dsp import MultichannelClip
from .errors import ConfigurationError
from .masking import NoiseProfile
from .tdoa import TdoaVector, estimate_tdoas


@dataclass(frozen=True, eq=False)
class DoaEstimate:
    best_angle: int
    score_curve: np.ndarray
    motor_index: int
    motor_angle: float
    tdoas: TdoaVector | None = None

    @property
    def best_score(self) -> float:
        return float(self.score_curve[self.best_angle])

    def __eq__(self, other):
        if not isinstance(other, DoaEstimate):
            return NotImplemented
        return (self.best_angle == other.best_angle
                and self.motor_index == other.motor_index
                and self.motor_angle == other.motor_angle
                and np.array_equal(self.score_curve, other.score_curve))


def _delays(x) -> np.ndarray:
    return np.asarray(x.delays if isinstance(x, TdoaVector) else x, dtype=np.float64)


def score(measured, table_row, params: KernelParams = KernelParams()) -> float:
    """Sum over pairs of ``sigma^2 exp(-(d_meas - d_row)^2 / (2 l^2))``."""
    m, r = _delays(measured), _delays(table_row)
    if m.shape != r.shape:
        raise ValueError(f"delay vectors differ in length: {m.shape} vs {r.shape}")
    return float(score_table(m, r[None, :], params)[0])


def score_table(measured, table, params: KernelParams = KernelParams()) -> np.ndarray:
    """Kernel score of ``measured`` against every row of ``table``."""
    m = _delays(measured)
    table = np.asarray(table, dtype=np.float64)
    if table.shape[-1] != m.shape[-1]:
        raise ValueError("table width does not match the delay vector")
    d = m - table
    return params.sigma ** 2 * np.sum(np.exp(-(d * d) / (2 * params.length_scale ** 2)), axis=-1)


def best_doa(measured, profile: CalibrationProfile | np.ndarray,
             params: KernelParams = KernelParams()) -> tuple[int, np.ndarray]:
    """Highest-scoring integer azimuth (ties to the smallest) and the score curve."""
    table = profile.table if isinstance(profile, CalibrationProfile) else profile
    curve = score_table(measured, table, params)
    return int(np.argmax(curve)), curve


def circular_distance(a, b):
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 360.0
    return np.minimum(d, 360.0 - d)


def select_motor(angle: float, motor_angles) -> tuple[int, float]:
    """1-based index and angle of the motor circularly closest to ``angle``.

    Ties go to the lower index. ``motor_angles`` may be a profile.
    """
    if isinstance(motor_angles, CalibrationProfile):
        motor_angles = motor_angles.motor_angles
    theta = np.asarray(motor_angles, dtype=float)
    i = int(np.argmin(circular_distance(theta, angle)))
    return i + 1, float(theta[i])


def check_compatible(profile: CalibrationProfile, config: Config) -> None:
    for name in ("sample_rate", "frame_size", "hop", "tau_max"):
        if getattr(profile, name) != getattr(config, name):
            raise ConfigurationError(
                f"profile {name}={getattr(profile, name)} does not match "
                f"configured {getattr(config, name)}")


def config_for_profile(profile: CalibrationProfile, base: Config | None = None) -> Config:
    """A config whose framing and kernel follow what the profile was built with."""
    base = base or Config()
    return base.replace(sample_rate=profile.sample_rate, frame_size=profile.frame_size,
                        hop=profile.hop, tau_max=profile.tau_max,
                        kernel=KernelParams(profile.sigma, profile.length_scale))


def localize_tdoas(tdoas: TdoaVector, profile: CalibrationProfile,
                   params: KernelParams = KernelParams()) -> DoaEstimate:
    angle, curve = best_doa(tdoas, profile, params)
    motor, motor_angle = select_motor(angle, profile.motor_angles)
    curve.setflags(write=False)
    return DoaEstimate(angle, curve, motor, motor_angle, tdoas)


def localize(clip: MultichannelClip, profile: CalibrationProfile,
             noise: NoiseProfile | None = None, config: Config | None = None) -> DoaEstimate:
    """Delay estimation, kernel DoA search and motor selection for one clip.

    Raises:
        ConfigurationError: profile framing differs from ``config``.
        NoReliableFramesError: nothing above the noise floor.
    """
    config = config or config_for_profile(profile)
    check_compatible(profile, config)
    tdoas = estimate_tdoas(clip, noise, config)
    return localize_tdoas(tdoas, profile, config.kernel)
