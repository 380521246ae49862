"""Processing parameters shared by calibration and localization."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError


@dataclass(frozen=True)
class KernelParams:
    """Squared exponential kernel amplitude and length scale (in samples)."""

    sigma: float = 1.0
    length_scale: float = 0.707

    def __post_init__(self):
        if not (self.sigma > 0 and self.length_scale > 0):
            raise ConfigurationError(
                f"kernel parameters must be positive, got sigma={self.sigma}, "
                f"length_scale={self.length_scale}")


@dataclass(frozen=True)
class Config:
    """Analysis settings. Defaults give a 1024-sample (~23 ms) frame with
    50% overlap at 44.1 kHz.

    ``beta`` is the mask threshold over the noise floor, ``min_mask_density``
    the fraction of unmasked bins a frame needs to count as reliable, and
    ``fallback_all_frames`` lets delay estimation use every frame when none
    is reliable instead of raising.
    """

    sample_rate: int = 44100
    frame_size: int = 1024
    hop: int = 512
    tau_max: int = 64
    beta: float = 2.0
    min_mask_density: float = 0.05
    fallback_all_frames: bool = False
    window: str = "hann"
    buffer_frames: int | None = None
    kernel: KernelParams = field(default_factory=KernelParams)

    def __post_init__(self):
        n = self.frame_size
        if n < 2 or n & (n - 1):
            raise ConfigurationError(f"frame_size must be a power of two, got {n}")
        if not 1 <= self.hop <= n:
            raise ConfigurationError(f"hop must be in [1, frame_size], got {self.hop}")
        if self.sample_rate <= 0:
            raise ConfigurationError("sample_rate must be positive")
        if not 0 <= self.tau_max < n // 2:
            raise ConfigurationError(
                f"tau_max must be in [0, frame_size/2), got {self.tau_max}")
        if self.beta <= 0:
            raise ConfigurationError("beta must be positive")
        if not 0 <= self.min_mask_density <= 1:
            raise ConfigurationError("min_mask_density must be in [0, 1]")
        if self.window not in ("hann", "rect"):
            raise ConfigurationError(f"unknown window {self.window!r}")
        if self.buffer_frames is not None and self.buffer_frames < 1:
            raise ConfigurationError("buffer_frames must be >= 1")

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d

    @classmethod
    def from_dict(cls, d: dict, base: "Config | None" = None) -> "Config":
        """Build a config from a (possibly partial) mapping of overrides."""
        base = base or cls()
        d = dict(d)
        kernel = d.pop("kernel", None)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        if kernel is not None:
            if not isinstance(kernel, dict):
                raise ConfigurationError("'kernel' must be a mapping")
            try:
                d["kernel"] = dataclasses.replace(base.kernel, **kernel)
            except TypeError as exc:
                raise ConfigurationError(f"bad kernel section: {exc}") from None
        return dataclasses.replace(base, **d)


def load_config(path: str | Path, base: Config | None = None) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"config {path} must hold a JSON object")
    return Config.from_dict(data, base)
