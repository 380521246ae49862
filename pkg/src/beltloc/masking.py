"""Stationary noise floor and the binary time-frequency mask.

The noise floor is the per-bin power averaged over frames and channels of a
designated silence recording. A bin is kept when the channel-averaged power
exceeds ``beta`` times that floor; one mask is shared by every microphone
pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import stack_bins


@dataclass(frozen=True, eq=False)
class NoiseProfile:
    psd: np.ndarray
    frames_observed: int

    def __post_init__(self):
        psd = np.asarray(self.psd, dtype=np.float64)
        if psd.ndim != 1:
            raise ValueError("psd must be one-dimensional")
        if np.any(psd < 0) or not np.all(np.isfinite(psd)):
            raise ValueError("psd values must be finite and non-negative")
        if self.frames_observed < 1:
            raise ValueError("a noise profile needs at least one observed frame")
        psd.setflags(write=False)
        object.__setattr__(self, "psd", psd)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """``values`` is a (frames, bins) uint8 array of zeros and ones."""

    values: np.ndarray

    @property
    def density(self) -> np.ndarray:
        """Fraction of unmasked bins in each frame."""
        return self.values.mean(axis=-1)

    def reliable(self, min_density: float = 0.05) -> np.ndarray:
        d = self.density
        return (d >= min_density) & (d > 0)


def noise_psd(bins: np.ndarray) -> np.ndarray:
    """Mean |X|^2 over channels and frames of a (channels, frames, bins) array."""
    return np.mean(np.abs(bins) ** 2, axis=(0, 1))


def estimate_noise(silence_spectrograms) -> NoiseProfile:
    """Noise floor from per-channel spectrograms of a silence segment."""
    bins = stack_bins(silence_spectrograms)
    if bins.shape[1] == 0:
        raise ValueError("silence segment has no frames")
    return NoiseProfile(noise_psd(bins), bins.shape[1])


def mask_from_bins(bins: np.ndarray, psd: np.ndarray | None,
                   beta: float = 2.0) -> np.ndarray:
    power = np.mean(np.abs(bins) ** 2, axis=0)
    floor = 0.0 if psd is None else beta * psd
    return (power > floor).astype(np.uint8)


def compute_mask(spectrograms, noise: NoiseProfile | None,
                 beta: float = 2.0) -> BinaryMask:
    """Keep bins whose channel-averaged power exceeds ``beta`` times the floor.

    With ``noise=None`` every bin with non-zero power is kept.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    bins = stack_bins(spectrograms)
    if noise is not None and noise.psd.shape[0] != bins.shape[-1]:
        raise ValueError(
            f"noise profile has {noise.psd.shape[0]} bins, spectrogram has {bins.shape[-1]}")
    return BinaryMask(mask_from_bins(bins, None if noise is None else noise.psd, beta))
