"""Anchor recordings to a 360-direction delay table and motor angles.

Eight anchors at 0, 45, ..., 315 degrees are interpolated linearly (and
circularly) to one row of pair delays per integer degree. Even motors sit
midway between adjacent microphones, so motor ``2k`` is found where the
delay of pair ``(k, k+1)`` crosses zero. Odd motors are midpoints of their
even neighbours and the two end motors are extrapolated.

Motor angles are kept as unwrapped reals: ``theta_2`` lies in [0, 360) and
later angles keep increasing, so a belt straddling 0 degrees yields values
above 360. Circular distance is used wherever angles are compared.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .config import Config
from .dsp import MultichannelClip, stft
from .errors import CalibrationError
from .masking import estimate_noise
from .tdoa import TdoaVector, estimate_tdoas, pair_position

ANCHOR_ANGLES = (0, 45, 90, 135, 180, 225, 270, 315)
N_DIRECTIONS = 360
_MAX_ASSIGNMENTS = 200_000


@dataclass(frozen=True, eq=False)
class CalibrationAnchor:
    angle: int
    tdoas: TdoaVector


@dataclass(frozen=True, eq=False)
class CalibrationProfile:
    table: np.ndarray                # (360, pairs)
    motor_angles: np.ndarray         # (motors,), real degrees
    anchors: tuple[CalibrationAnchor, ...]
    sample_rate: int = 44100
    frame_size: int = 1024
    hop: int = 512
    tau_max: int = 64
    sigma: float = 1.0
    length_scale: float = 0.707
    created: str | None = None
    tool_version: str | None = None

    def __post_init__(self):
        for name in ("table", "motor_angles"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "anchors", tuple(self.anchors))

    @property
    def motor_angles_display(self) -> np.ndarray:
        return display_angles(self.motor_angles)

    @property
    def channel_count(self) -> int:
        return TdoaVector(self.table[0]).channel_count

    def row(self, angle: int) -> TdoaVector:
        return TdoaVector(self.table[angle % N_DIRECTIONS])

    def validate(self) -> None:
        """Check every profile invariant; raises CalibrationError naming the one broken."""
        problems = profile_violations(self)
        if problems:
            raise CalibrationError("invalid calibration profile: " + "; ".join(problems))


def display_angles(angles) -> np.ndarray:
    """Integer display form of motor angles (floor, wrapped into [0, 360))."""
    return np.floor(np.asarray(angles, dtype=float)).astype(int) % 360


def profile_violations(p: CalibrationProfile) -> list[str]:
    out = []
    table = p.table
    if table.ndim != 2 or table.shape[0] != N_DIRECTIONS:
        return [f"table shape {table.shape} is not (360, pairs)"]
    npairs = table.shape[1]
    if not np.all(np.isfinite(table)):
        out.append("table: non-finite entries")
    elif np.any(np.abs(table) > p.tau_max):
        out.append(f"table: entries exceed tau_max={p.tau_max}")
    angles = sorted(a.angle for a in p.anchors)
    if angles != list(ANCHOR_ANGLES):
        out.append(f"anchors: angles {angles} are not the eight canonical angles")
    for a in p.anchors:
        if len(a.tdoas) != npairs:
            out.append(f"anchors: {a.angle} deg has {len(a.tdoas)} delays, expected {npairs}")
        elif 0 <= a.angle < N_DIRECTIONS and not np.array_equal(table[a.angle], a.tdoas.delays):
            out.append(f"anchors: table row {a.angle} differs from the anchor delays")
    theta = p.motor_angles
    if theta.ndim != 1 or len(theta) < 3:
        out.append("motor_angles: need at least three motors")
    elif not np.all(np.isfinite(theta)):
        out.append("motor_angles: non-finite values")
    elif not np.all(np.diff(theta) > 0):
        out.append("motor_angles: not strictly increasing along the belt")
    if not (p.sigma > 0 and p.length_scale > 0):
        out.append("kernel: sigma and length_scale must be positive")
    return out


def build_lookup_table(anchors) -> np.ndarray:
    """Per-degree delays by circular piecewise-linear interpolation of anchors.

    Rows at anchor angles reproduce the anchor delays exactly.
    """
    anchors = list(anchors)
    by_angle = {}
    for a in anchors:
        if a.angle in by_angle:
            raise CalibrationError(f"duplicate anchor angle {a.angle}")
        by_angle[a.angle] = np.asarray(a.tdoas.delays, dtype=np.float64)
    missing = [a for a in ANCHOR_ANGLES if a not in by_angle]
    extra = sorted(set(by_angle) - set(ANCHOR_ANGLES))
    if missing or extra:
        raise CalibrationError(
            f"anchors must be exactly {list(ANCHOR_ANGLES)}; missing {missing}, "
            f"unexpected {extra}")
    sizes = {len(v) for v in by_angle.values()}
    if len(sizes) != 1:
        raise CalibrationError("anchors disagree on the number of pairs")

    step = N_DIRECTIONS // len(ANCHOR_ANGLES)
    points = np.array([by_angle[a] for a in ANCHOR_ANGLES])
    table = np.empty((N_DIRECTIONS, points.shape[1]))
    for i, lo in enumerate(points):
        hi = points[(i + 1) % len(points)]
        for j in range(step):
            table[i * step + j] = lo + (j / step) * (hi - lo)
    return table


@dataclass(frozen=True)
class ZeroCrossing:
    angle: float
    rising: bool | None   # None for a touch that does not change sign


def zero_crossings(curve) -> list[ZeroCrossing]:
    """Zero crossings of a circular per-degree curve, refined linearly.

    Runs of exact zeros collapse to one crossing at the run's centre.
    """
    c = np.asarray(curve, dtype=float)
    n = len(c)
    out = []
    if np.all(c == 0):
        return out
    # start scanning just after a non-zero sample so zero runs are never split
    start = int(np.flatnonzero(c != 0)[0])
    i = 0
    while i < n:
        k = (start + i) % n
        nxt = (k + 1) % n
        if c[nxt] == 0:
            run = 1
            while c[(nxt + run) % n] == 0:
                run += 1
            after = c[(nxt + run) % n]
            centre = nxt + (run - 1) / 2
            rising = None if np.sign(c[k]) == np.sign(after) else bool(after > c[k])
            out.append(ZeroCrossing(centre % n, rising))
            i += run + 1
            continue
        if c[k] * c[nxt] < 0:
            angle = k + c[k] / (c[k] - c[nxt])
            out.append(ZeroCrossing(angle % n, bool(c[nxt] > c[k])))
        i += 1
    return sorted(out, key=lambda z: z.angle)


def _unwrap_sequence(angles) -> list[float] | None:
    seq = [angles[0] % 360.0]
    for a in angles[1:]:
        step = (a - seq[-1]) % 360.0
        if step == 0:
            return None
        seq.append(seq[-1] + step)
    if seq[-1] - seq[0] >= 360.0:
        return None
    return seq


def find_even_motor_angles(table, channel_count: int | None = None) -> np.ndarray:
    """Angles of the even motors from the zero crossings of adjacent-mic pairs.

    A pair's curve usually crosses zero twice: facing the pair (delay rising
    with azimuth, since ``t_k - t_{k+1}`` grows as the source moves toward
    mic ``k+1``) and from the opposite side (falling). Rising crossings are
    preferred when a pair has any. Among all choices of one crossing per
    pair, those whose angles increase strictly around less than one turn are
    kept and the most evenly spaced one wins.

    Raises:
        CalibrationError: a pair never crosses zero, or no ordering exists.
    """
    table = np.asarray(table, dtype=float)
    if channel_count is None:
        channel_count = TdoaVector(table[0]).channel_count
    candidates = []
    for k in range(1, channel_count):
        curve = table[:, pair_position(k, k + 1, channel_count)]
        found = zero_crossings(curve)
        if not found:
            raise CalibrationError(
                f"calibration degenerate: pair ({k}, {k + 1}) delay never crosses zero")
        rising = [z.angle for z in found if z.rising]
        candidates.append(rising or [z.angle for z in found])

    if math.prod(len(c) for c in candidates) > _MAX_ASSIGNMENTS:
        raise CalibrationError("calibration degenerate: too many zero crossings to order")

    best, best_cost = None, math.inf
    for combo in itertools.product(*candidates):
        seq = _unwrap_sequence(combo)
        if seq is None:
            continue
        steps = np.diff(seq)
        cost = float(np.sum((steps - steps.mean()) ** 2))
        if cost < best_cost:
            best, best_cost = seq, cost
    if best is None:
        raise CalibrationError(
            "calibration degenerate: zero crossings admit no increasing motor order")
    return np.array(best)


def interpolate_odd_motor_angles(even) -> np.ndarray:
    """Midpoints between consecutive even-motor angles."""
    even = np.asarray(even, dtype=float)
    return (even[:-1] + even[1:]) / 2


def extrapolate_end_motor_angles(theta_2: float, theta_3: float,
                                 theta_13: float, theta_14: float) -> tuple[float, float]:
    return (3 * theta_2 - theta_3) / 2, (3 * theta_14 - theta_13) / 2


def motor_angles_from_even(even) -> np.ndarray:
    """All motor angles (1..2m+1) given the m even-motor angles."""
    even = np.asarray(even, dtype=float)
    odd = interpolate_odd_motor_angles(even)
    inner = np.empty(len(even) + len(odd))
    inner[0::2] = even
    inner[1::2] = odd
    first, last = extrapolate_end_motor_angles(inner[0], inner[1], inner[-2], inner[-1])
    return np.concatenate([[first], inner, [last]])


def profile_from_anchors(anchors, config: Config | None = None, **metadata) -> CalibrationProfile:
    config = config or Config()
    anchors = sorted(anchors, key=lambda a: a.angle)
    table = build_lookup_table(anchors)
    channel_count = TdoaVector(table[0]).channel_count
    even = find_even_motor_angles(table, channel_count)
    profile = CalibrationProfile(
        table=table,
        motor_angles=motor_angles_from_even(even),
        anchors=tuple(anchors),
        sample_rate=config.sample_rate,
        frame_size=config.frame_size,
        hop=config.hop,
        tau_max=config.tau_max,
        sigma=config.kernel.sigma,
        length_scale=config.kernel.length_scale,
        **metadata,
    )
    problems = profile_violations(profile)
    if problems:
        raise CalibrationError("calibration failed: " + "; ".join(problems))
    return profile


def calibrate(recordings, silence: MultichannelClip | None, config: Config | None = None,
              **metadata) -> CalibrationProfile:
    """Build a profile from eight labelled anchor recordings.

    Args:
        recordings: mapping ``angle -> MultichannelClip`` (or pairs) for the
            angles 0, 45, ..., 315.
        silence: background-only recording for the noise floor, or None to
            keep every bin with energy.
    """
    config = config or Config()
    items = recordings.items() if hasattr(recordings, "items") else recordings
    items = [(int(a), clip) for a, clip in items]
    noise = None
    if silence is not None:
        noise = estimate_noise(stft(silence, config.frame_size, config.hop, config.window))
    anchors = [CalibrationAnchor(a, estimate_tdoas(clip, noise, config)) for a, clip in items]
    return profile_from_anchors(anchors, config, **metadata)
