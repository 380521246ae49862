"""Framing, windowing and the forward/inverse transforms behind the STFT.

Conventions: the forward transform is unnormalized, the inverse carries the
1/N factor. Frame ``t`` covers samples ``[t*hop, t*hop + frame_size)`` and a
trailing partial frame is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InsufficientSamplesError


@dataclass(frozen=True, eq=False)
class MultichannelClip:
    """Time-domain audio, ``samples`` shaped (channels, length)."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"samples must be 2-D (channels, length), got shape {x.shape}")
        if x.shape[0] < 2:
            raise ValueError("a clip needs at least two channels")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate

    def segment(self, start: int, stop: int | None = None) -> "MultichannelClip":
        return MultichannelClip(self.samples[:, start:stop], self.sample_rate)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """One channel's STFT, ``bins`` shaped (frames, frame_size // 2 + 1)."""

    bins: np.ndarray
    frame_size: int
    hop: int
    sample_rate: int

    @property
    def frame_count(self) -> int:
        return self.bins.shape[0]

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.bins) ** 2


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def analysis_window(frame_size: int, kind: str = "hann") -> np.ndarray:
    """Periodic Hann (default) or rectangular analysis window."""
    if kind == "hann":
        n = np.arange(frame_size)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / frame_size)
    if kind == "rect":
        return np.ones(frame_size)
    raise ConfigurationError(f"unknown window {kind!r}")


def frame_count(length: int, frame_size: int, hop: int) -> int:
    if length < frame_size:
        return 0
    return (length - frame_size) // hop + 1


def frame_signal(x: np.ndarray, frame_size: int, hop: int) -> np.ndarray:
    """Split the last axis of ``x`` into overlapping frames.

    Returns a read-only view shaped (..., frames, frame_size).
    """
    x = np.asarray(x)
    if x.shape[-1] < frame_size:
        raise InsufficientSamplesError(
            f"insufficient samples: need at least {frame_size}, got {x.shape[-1]}")
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_size, axis=-1)
    return frames[..., ::hop, :]


def stft_array(samples: np.ndarray, frame_size: int, hop: int,
               window: str = "hann") -> np.ndarray:
    """STFT of every row of ``samples``; shape (channels, frames, bins)."""
    if not is_power_of_two(frame_size):
        raise ConfigurationError(f"frame_size must be a power of two, got {frame_size}")
    if not 1 <= hop <= frame_size:
        raise ConfigurationError(f"hop must be in [1, {frame_size}], got {hop}")
    frames = frame_signal(samples, frame_size, hop)
    return np.fft.rfft(frames * analysis_window(frame_size, window), axis=-1)


def stft(clip: MultichannelClip, frame_size: int = 1024, hop: int = 512,
         window: str = "hann") -> list[Spectrogram]:
    """Short-time Fourier transform of each channel of ``clip``.

    Raises:
        InsufficientSamplesError: the clip is shorter than one frame.
    """
    bins = stft_array(clip.samples, frame_size, hop, window)
    return [Spectrogram(b, frame_size, hop, clip.sample_rate) for b in bins]


def stack_bins(spectrograms) -> np.ndarray:
    """Stack per-channel spectrograms into a (channels, frames, bins) array."""
    specs = list(spectrograms)
    if not specs:
        raise ValueError("no spectrograms given")
    shapes = {s.bins.shape for s in specs}
    if len(shapes) != 1:
        raise ValueError(f"spectrogram shapes disagree: {sorted(shapes)}")
    return np.stack([s.bins for s in specs])


def full_spectrum(half: np.ndarray, n: int) -> np.ndarray:
    """Rebuild an N-point conjugate-symmetric spectrum from bins 0..N/2."""
    half = np.asarray(half)
    if half.shape[-1] != n // 2 + 1:
        raise ValueError(f"expected {n // 2 + 1} bins, got {half.shape[-1]}")
    tail = np.conj(half[..., 1:n // 2][..., ::-1])
    return np.concatenate([half, tail], axis=-1)


def inverse_transform_correlation(spectrum_row: np.ndarray) -> np.ndarray:
    """Inverse DFT (with 1/N) of a full-length conjugate-symmetric spectrum.

    Index ``n`` of the result is lag ``n`` for ``n < N/2`` and ``n - N``
    otherwise.
    """
    spectrum_row = np.asarray(spectrum_row)
    n = spectrum_row.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"transform length must be a power of two, got {n}")
    return np.fft.ifft(spectrum_row, axis=-1).real


def lag_window(correlation: np.ndarray, tau_max: int) -> np.ndarray:
    """Reorder circular lags into ``[-tau_max, ..., tau_max]`` along the last axis."""
    return np.concatenate(
        [correlation[..., correlation.shape[-1] - tau_max:],
         correlation[..., :tau_max + 1]], axis=-1)
