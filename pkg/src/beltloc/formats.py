"""JSON documents: calibration profiles, scenario manifests and reports.

Reals are written with Python's shortest round-trip ``repr``, so parsing a
serialized profile reproduces every number bit for bit. Every document
carries a ``format`` name and ``format_version``; anything else is rejected.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (CalibrationAnchor, CalibrationProfile, display_angles,
                          profile_violations)
from .errors import ManifestError, ProfileFormatError
from .fileutil import atomic_write_text
from .sim import BeltGeometry, SignalSpec, SimulationError, make_geometry
from .tdoa import TdoaVector, pair_list

PROFILE_FORMAT = "beltloc-profile"
PROFILE_VERSION = 1
MANIFEST_FORMAT = "beltloc-manifest"
MANIFEST_VERSION = 1
REPORT_FORMAT = "beltloc-report"
REPORT_VERSION = 1


def dumps(obj, indent: int = 2) -> str:
    """JSON with lists of scalars kept on one line; ends with a newline."""
    return _dump(obj, 0, indent) + "\n"


def _scalar(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite value {x}")
        return repr(x)
    if isinstance(x, np.integer):
        return str(int(x))
    return json.dumps(x)


def _dump(obj, level: int, indent: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, level + 1, indent)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_scalar(v) for v in seq) + "]"
        return ("[\n" + ",\n".join(pad + _dump(v, level + 1, indent) for v in seq)
                + "\n" + end + "]")
    return _scalar(obj)


def creation_timestamp() -> str:
    """UTC ISO-8601 time, taken from ``SOURCE_DATE_EPOCH`` when set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
    else:
        t = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0)
    return t.isoformat().replace("+00:00", "Z")


# -- profiles ---------------------------------------------------------------

def profile_to_dict(profile: CalibrationProfile) -> dict:
    return {
        "format": PROFILE_FORMAT,
        "format_version": PROFILE_VERSION,
        "tool_version": profile.tool_version or __version__,
        "created": profile.created,
        "sample_rate": int(profile.sample_rate),
        "frame_size": int(profile.frame_size),
        "hop": int(profile.hop),
        "tau_max": int(profile.tau_max),
        "kernel": {"sigma": float(profile.sigma), "length_scale": float(profile.length_scale)},
        "pairs": [list(p) for p in pair_list(profile.channel_count)],
        "anchors": [{"angle": int(a.angle), "tdoas": [float(x) for x in a.tdoas.delays]}
                    for a in sorted(profile.anchors, key=lambda a: a.angle)],
        "motor_angles": [float(x) for x in profile.motor_angles],
        "motor_angles_display": [int(x) for x in profile.motor_angles_display],
        "table": [[float(x) for x in row] for row in profile.table],
    }


def serialize_profile(profile: CalibrationProfile) -> str:
    return dumps(profile_to_dict(profile))


def _require(doc: dict, key: str, kind, where: str = "profile"):
    if key not in doc:
        raise ProfileFormatError(f"{where}: missing field {key!r}")
    value = doc[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ProfileFormatError(f"{where}: field {key!r} has the wrong type")
    return value


def _float_array(value, shape_desc: str) -> np.ndarray:
    try:
        a = np.array(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProfileFormatError(f"profile: {shape_desc} is not numeric") from None
    if a.dtype == object:
        raise ProfileFormatError(f"profile: {shape_desc} is ragged")
    return a


def profile_from_dict(doc) -> CalibrationProfile:
    if not isinstance(doc, dict):
        raise ProfileFormatError("profile: top level must be an object")
    if doc.get("format") != PROFILE_FORMAT:
        raise ProfileFormatError(f"profile: not a {PROFILE_FORMAT} document")
    version = doc.get("format_version")
    if version != PROFILE_VERSION:
        raise ProfileFormatError(
            f"profile: unsupported format_version {version!r} (expected {PROFILE_VERSION})")
    kernel = _require(doc, "kernel", dict)
    anchors = []
    for i, a in enumerate(_require(doc, "anchors", list)):
        if not isinstance(a, dict):
            raise ProfileFormatError(f"profile: anchor {i} is not an object")
        angle = _require(a, "angle", int, f"anchor {i}")
        tdoas = _float_array(_require(a, "tdoas", list, f"anchor {i}"), f"anchor {angle} tdoas")
        if tdoas.ndim != 1:
            raise ProfileFormatError(f"profile: anchor {angle} tdoas must be a flat list")
        anchors.append(CalibrationAnchor(angle, TdoaVector(tdoas)))
    table = _float_array(_require(doc, "table", list), "table")
    theta = _float_array(_require(doc, "motor_angles", list), "motor_angles")
    profile = CalibrationProfile(
        table=table,
        motor_angles=theta,
        anchors=tuple(anchors),
        sample_rate=_require(doc, "sample_rate", int),
        frame_size=_require(doc, "frame_size", int),
        hop=_require(doc, "hop", int),
        tau_max=_require(doc, "tau_max", int),
        sigma=float(_require(kernel, "sigma", float, "kernel")),
        length_scale=float(_require(kernel, "length_scale", float, "kernel")),
        created=doc.get("created"),
        tool_version=doc.get("tool_version"),
    )
    problems = profile_violations(profile)
    if problems:
        raise ProfileFormatError("profile: invariant violated: " + "; ".join(problems))
    if table.shape[1] and "pairs" in doc:
        expected = [list(p) for p in pair_list(profile.channel_count)]
        if doc["pairs"] != expected:
            raise ProfileFormatError("profile: pair enumeration is not lexicographic")
    display = doc.get("motor_angles_display")
    if display is not None and list(display) != [int(x) for x in display_angles(theta)]:
        raise ProfileFormatError("profile: motor_angles_display disagrees with motor_angles")
    return profile


def parse_profile(text: str) -> CalibrationProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileFormatError(f"profile: not valid JSON (truncated?): {exc}") from None
    return profile_from_dict(doc)


def save_profile(profile: CalibrationProfile, path) -> None:
    atomic_write_text(path, serialize_profile(profile))


def load_profile(path) -> CalibrationProfile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProfileFormatError(f"cannot read profile {path}: {exc}") from None
    return parse_profile(text)


# -- scenario manifests -------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    name: str
    signal: SignalSpec
    angles: tuple[float, ...]
    snr_db: float
    seed: int
    duration: float
    distance: float
    output: str
    silence_duration: float


@dataclass(frozen=True)
class Manifest:
    path: Path
    sample_rate: int
    geometry: BeltGeometry
    sweeps: tuple[SweepSpec, ...]
    calibration: SweepSpec | None = None

    @property
    def root(self) -> Path:
        return self.path.parent


def _angles(value, where: str) -> tuple[float, ...]:
    if isinstance(value, dict):
        try:
            start, stop, step = value.get("start", 0), value["stop"], value["step"]
        except KeyError as exc:
            raise ManifestError(f"{where}: angle range needs {exc}") from None
        if step <= 0:
            raise ManifestError(f"{where}: angle step must be positive")
        value = list(np.arange(start, stop, step))
    if not isinstance(value, list) or not value:
        raise ManifestError(f"{where}: angles must be a non-empty list or range")
    try:
        return tuple(float(a) for a in value)
    except (TypeError, ValueError):
        raise ManifestError(f"{where}: angles must be numbers") from None


def _output(value: str, where: str) -> str:
    p = Path(value)
    if p.is_absolute() or ".." in p.parts:
        raise ManifestError(f"{where}: path {value!r} must be relative to the manifest")
    return value


def _signal(value, root: Path, where: str) -> SignalSpec:
    signal = SignalSpec.from_dict(value)
    if signal.kind == "wav-file":
        _output(signal.path, where)
        signal = replace(signal, path=str(root / signal.path))
    return signal


def _seed(value, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ManifestError(f"{where}: seed must be a non-negative integer")
    return value


def _sweep(d, where: str, defaults: dict, root: Path) -> SweepSpec:
    if not isinstance(d, dict):
        raise ManifestError(f"{where}: must be an object")
    d = {**defaults, **d}
    try:
        snr = d.get("snr_db", 20.0)
        snr = math.inf if snr is None else float(snr)
        duration = float(d.get("duration", 2.0))
        if duration <= 0:
            raise ManifestError(f"{where}: duration must be positive")
        return SweepSpec(
            name=str(d["name"]),
            signal=_signal(d.get("signal", "white-noise"), root, where),
            angles=_angles(d.get("angles"), where),
            snr_db=snr,
            seed=_seed(d.get("seed", 0), where),
            duration=duration,
            distance=float(d.get("distance", 2.0)),
            output=_output(str(d.get("output", d["name"])), where),
            silence_duration=float(d.get("silence_duration", duration)),
        )
    except KeyError as exc:
        raise ManifestError(f"{where}: missing field {exc}") from None
    except SimulationError as exc:
        raise ManifestError(f"{where}: {exc}") from None


def geometry_from_dict(d: dict) -> BeltGeometry:
    if not isinstance(d, dict):
        raise ManifestError("geometry must be an object")
    d = dict(d)
    params = {
        "shape": d.pop("shape", "circle"),
        "radius": float(d.pop("radius", 0.15)),
        "semi_axes": d.pop("semi_axes", None),
        "arc_span": float(d.pop("arc_span", 280.0)),
        "gap_center": float(d.pop("gap_center", 0.0)),
        "mic_count": int(d.pop("mic_count", 8)),
        "speed_of_sound": float(d.pop("speed_of_sound", 343.0)),
    }
    if d:
        raise ManifestError(f"geometry: unknown keys {sorted(d)}")
    return make_geometry(**params)


def manifest_from_dict(doc, path) -> Manifest:
    if not isinstance(doc, dict) or doc.get("format") != MANIFEST_FORMAT:
        raise ManifestError(f"manifest: not a {MANIFEST_FORMAT} document")
    if doc.get("format_version") != MANIFEST_VERSION:
        raise ManifestError(
            f"manifest: unsupported format_version {doc.get('format_version')!r}")
    try:
        geometry = geometry_from_dict(doc.get("geometry", {}))
    except SimulationError as exc:
        raise ManifestError(f"manifest geometry: {exc}") from None
    sweeps = doc.get("sweeps", [])
    if not isinstance(sweeps, list):
        raise ManifestError("manifest: 'sweeps' must be a list")
    root = Path(path).parent
    specs = tuple(_sweep(s, f"sweep {i}", {}, root) for i, s in enumerate(sweeps))
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ManifestError("manifest: sweep names must be unique")
    calib = doc.get("calibration")
    if calib is not None:
        calib = _sweep(calib, "calibration",
                       {"name": "calibration", "angles": list(range(0, 360, 45)),
                        "duration": 3.0}, root)
    return Manifest(Path(path), int(doc.get("sample_rate", 44100)), geometry, specs, calib)


def load_manifest(path) -> Manifest:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from None
    return manifest_from_dict(doc, path)


def clip_name(angle: float) -> str:
    """File stem for a sweep clip, e.g. ``angle_009`` or ``angle_012.5``."""
    if float(angle).is_integer():
        return f"angle_{int(angle):03d}"
    return f"angle_{angle:07.3f}".rstrip("0")


# -- reports ---------------------------------------------------------------

def report_document(sweeps: dict, metadata: dict) -> dict:
    """Assemble per-sweep reports into one document with an overall summary."""
    body = {name: r.to_dict() for name, r in sweeps.items()}
    if body:
        overall = {"mae": float(np.mean([r["mae"] for r in body.values()])),
                   "match_rate": float(np.mean([r["match_rate"] for r in body.values()]))}
    else:
        overall = {"mae": None, "match_rate": None}
    return {"format": REPORT_FORMAT, "format_version": REPORT_VERSION,
            "tool_version": __version__, "metadata": metadata,
            "overall": overall, "sweeps": body}
