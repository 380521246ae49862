"""Sweep metrics: circular mean absolute error and motor match rate.

A clip that cannot be localized counts as a miss: 180 degrees of error, no
motor match, and the failure reason is kept on its row.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calibration import CalibrationProfile
from .config import Config
from .errors import BeltlocError
from .localization import config_for_profile, localize, select_motor
from .masking import NoiseProfile

FAILED_ERROR = 180.0


def circular_error(a, b):
    """Angular distance in [0, 180] degrees."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % 360.0
    out = np.minimum(d, 360.0 - d)
    return float(out) if out.ndim == 0 else out


def compute_mae(predictions, references) -> float:
    predictions = np.asarray(predictions, dtype=float)
    references = np.asarray(references, dtype=float)
    if predictions.shape != references.shape:
        raise ValueError("predictions and references differ in length")
    if predictions.size == 0:
        raise ValueError("cannot average an empty set of errors")
    return float(np.mean(circular_error(predictions, references)))


def reference_motor(angle: float, profile: CalibrationProfile) -> int:
    """Motor that should fire for a source at ``angle``."""
    return select_motor(angle, profile.motor_angles)[0]


@dataclass(frozen=True)
class AngleResult:
    reference_angle: float
    predicted_angle: float | None
    error: float
    predicted_motor: int | None
    reference_motor: int
    match: bool
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "reference_angle": self.reference_angle,
            "predicted_angle": self.predicted_angle,
            "error": self.error,
            "predicted_motor": self.predicted_motor,
            "reference_motor": self.reference_motor,
            "match": self.match,
            "failure": self.failure,
        }


@dataclass(frozen=True)
class EvaluationReport:
    per_angle: tuple[AngleResult, ...]
    metadata: dict = field(default_factory=dict)

    @property
    def mae(self) -> float:
        return float(np.mean([r.error for r in self.per_angle]))

    @property
    def match_rate(self) -> float:
        return float(np.mean([r.match for r in self.per_angle]))

    @property
    def failures(self) -> int:
        return sum(r.failure is not None for r in self.per_angle)

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "match_rate": self.match_rate,
            "count": len(self.per_angle),
            "failures": self.failures,
            "metadata": self.metadata,
            "per_angle": [r.to_dict() for r in self.per_angle],
        }


def _row(clip, reference: float, profile, noise, config) -> AngleResult:
    ref_motor = reference_motor(reference, profile)
    try:
        est = localize(clip, profile, noise, config)
    except BeltlocError as exc:
        return AngleResult(float(reference), None, FAILED_ERROR, None, ref_motor,
                           False, f"{type(exc).__name__}: {exc}")
    return AngleResult(float(reference), float(est.best_angle),
                       circular_error(est.best_angle, reference), est.motor_index,
                       ref_motor, est.motor_index == ref_motor)


def evaluate_sweep(sweep, profile: CalibrationProfile, noise: NoiseProfile | None = None,
                   config: Config | None = None, threads: int = 1,
                   metadata: dict | None = None) -> EvaluationReport:
    """Localize every ``(clip, truth)`` of a sweep and score it.

    ``truth`` may be a ground-truth record with ``source_angle`` or a bare
    reference angle.
    """
    sweep = list(sweep)
    if not sweep:
        raise ValueError("empty sweep")
    config = config or config_for_profile(profile)

    def one(item):
        clip, truth = item
        ref = getattr(truth, "source_angle", truth)
        return _row(clip, float(ref), profile, noise, config)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, sweep))
    else:
        rows = [one(item) for item in sweep]
    return EvaluationReport(tuple(rows), dict(metadata or {}))
