"""Per-pair masked GCC-PHAT, peak picking and mode aggregation.

Sign convention: ``delay(u, v) = t_u - t_v``, the arrival time at microphone
``u`` minus the arrival time at ``v`` (in samples). It is positive when the
source is closer to ``v``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .config import Config
from .dsp import (MultichannelClip, full_spectrum, inverse_transform_correlation,
                  lag_window, stft_array)
from .errors import ConfigurationError, NoReliableFramesError
from .masking import NoiseProfile, mask_from_bins


def pair_list(channel_count: int = 8) -> list[tuple[int, int]]:
    """Microphone pairs ``(u, v)`` with ``1 <= u < v``, lexicographic order."""
    return list(itertools.combinations(range(1, channel_count + 1), 2))


def pair_position(u: int, v: int, channel_count: int = 8) -> int:
    """Index of pair ``(u, v)`` within :func:`pair_list`."""
    if not 1 <= u < v <= channel_count:
        raise ValueError(f"invalid pair ({u}, {v}) for {channel_count} channels")
    # pairs starting with 1..u-1 come first
    before = sum(channel_count - k for k in range(1, u))
    return before + (v - u - 1)


@dataclass(frozen=True, eq=False)
class TdoaVector:
    """Per-pair delays in samples, ordered as :func:`pair_list`."""

    delays: np.ndarray

    def __post_init__(self):
        d = np.array(self.delays, dtype=np.float64)
        if d.ndim != 1:
            raise ValueError("delays must be one-dimensional")
        d.setflags(write=False)
        object.__setattr__(self, "delays", d)

    def __len__(self):
        return len(self.delays)

    def __eq__(self, other):
        if not isinstance(other, TdoaVector):
            return NotImplemented
        return np.array_equal(self.delays, other.delays)

    @property
    def channel_count(self) -> int:
        # solve n(n-1)/2 = len
        n = int(round((1 + np.sqrt(1 + 8 * len(self.delays))) / 2))
        if n * (n - 1) // 2 != len(self.delays):
            raise ValueError(f"{len(self.delays)} is not a pair count")
        return n

    def get(self, u: int, v: int) -> float:
        return float(self.delays[pair_position(u, v, self.channel_count)])


@dataclass(frozen=True, eq=False)
class CorrelationFrame:
    """GCC-PHAT output over lags ``-tau_max..tau_max``."""

    values: np.ndarray
    reliable: bool = True

    @property
    def tau_max(self) -> int:
        return (len(self.values) - 1) // 2

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.tau_max, self.tau_max + 1)


def cross_spectrum(xu: np.ndarray, xv: np.ndarray) -> np.ndarray:
    xu = np.asarray(xu)
    xv = np.asarray(xv)
    if xu.shape != xv.shape:
        raise ValueError(f"spectrum shapes differ: {xu.shape} vs {xv.shape}")
    return xu * np.conj(xv)


def phat_weight(r: np.ndarray) -> np.ndarray:
    """Unit-magnitude phase of each bin; bins with ``|R| = 0`` become 0."""
    mag = np.abs(r)
    out = np.zeros_like(r, dtype=np.complex128)
    nz = mag > 0
    out[nz] = r[nz] / mag[nz]
    return out


def gcc_phat(r: np.ndarray, mask_row: np.ndarray | None, tau_max: int,
             min_density: float = 0.05) -> CorrelationFrame:
    """Masked GCC-PHAT of one frame's half-spectrum cross-spectrum ``r``.

    Args:
        r: bins ``0..N/2`` of ``X_u X_v*``.
        mask_row: 0/1 per bin, or None to keep every bin.
        tau_max: largest lag kept; must be below ``N/2``.
        min_density: minimum fraction of unmasked bins for the frame to be
            flagged reliable.
    """
    r = np.asarray(r)
    n = 2 * (r.shape[-1] - 1)
    if not 0 <= tau_max < n // 2:
        raise ValueError(f"tau_max must be in [0, {n // 2}), got {tau_max}")
    w = phat_weight(r)
    if mask_row is None:
        mask_row = np.ones(r.shape[-1], dtype=np.uint8)
    w = w * mask_row
    corr = inverse_transform_correlation(full_spectrum(w, n))
    density = float(np.mean(mask_row))
    reliable = density > 0 and density >= min_density
    return CorrelationFrame(lag_window(corr, tau_max), reliable)


def peak_lag(frame: CorrelationFrame | np.ndarray) -> int:
    """Lag of the correlation maximum; exact ties go to the most negative lag."""
    values = frame.values if isinstance(frame, CorrelationFrame) else np.asarray(frame)
    if values.size == 0:
        raise ValueError("empty correlation frame")
    tau_max = (len(values) - 1) // 2
    return int(np.argmax(values)) - tau_max


def aggregate_mode(lags, reliable=None) -> float:
    """Most frequent lag among the reliable frames; ties go to the smallest lag.

    Raises:
        NoReliableFramesError: no frame is flagged reliable.
    """
    lags = np.asarray(lags, dtype=np.int64)
    if reliable is not None:
        lags = lags[np.asarray(reliable, dtype=bool)]
    if lags.size == 0:
        raise NoReliableFramesError("no reliable frames")
    values, counts = np.unique(lags, return_counts=True)
    return float(values[np.argmax(counts)])


def frame_peak_lags(bins: np.ndarray, mask: np.ndarray | None,
                    tau_max: int) -> np.ndarray:
    """Per-frame GCC-PHAT peak lags for every pair.

    ``bins`` is (channels, frames, N/2+1). Returns int array (pairs, frames).
    Equivalent to :func:`gcc_phat` + :func:`peak_lag` applied frame by frame.
    """
    channels, frames, nbins = bins.shape
    n = 2 * (nbins - 1)
    out = np.empty((channels * (channels - 1) // 2, frames), dtype=np.int64)
    for p, (u, v) in enumerate(pair_list(channels)):
        w = phat_weight(cross_spectrum(bins[u - 1], bins[v - 1]))
        if mask is not None:
            w *= mask
        corr = np.fft.irfft(w, n=n, axis=-1)
        out[p] = np.argmax(lag_window(corr, tau_max), axis=-1) - tau_max
    return out


def estimate_tdoas(clip: MultichannelClip, noise: NoiseProfile | None = None,
                   config: Config | None = None) -> TdoaVector:
    """Delays for all microphone pairs of ``clip``.

    Frames are STFT'd, masked against ``noise`` (all bins with energy are
    kept when ``noise`` is None), peak-picked per pair, and the per-pair mode
    over reliable frames is returned.

    Raises:
        InsufficientSamplesError: clip shorter than one frame.
        NoReliableFramesError: no reliable frame and fallback disabled.
    """
    config = config or Config()
    if clip.sample_rate != config.sample_rate:
        raise ConfigurationError(
            f"clip sample rate {clip.sample_rate} does not match configured "
            f"{config.sample_rate}")
    bins = stft_array(clip.samples, config.frame_size, config.hop, config.window)
    if config.buffer_frames is not None:
        bins = bins[:, -config.buffer_frames:]
    if noise is not None and noise.psd.shape[0] != bins.shape[-1]:
        raise ConfigurationError("noise profile does not match the frame size")
    mask = mask_from_bins(bins, None if noise is None else noise.psd, config.beta)
    density = mask.mean(axis=-1)
    reliable = (density > 0) & (density >= config.min_mask_density)
    if not reliable.any():
        if config.fallback_all_frames and (density > 0).any():
            reliable = density > 0
        else:
            raise NoReliableFramesError(
                f"no reliable frames among {len(density)} "
                f"(max mask density {density.max():.3f})")
    lags = frame_peak_lags(bins[:, reliable], mask[reliable], config.tau_max)
    return TdoaVector(np.array([aggregate_mode(row) for row in lags]))
