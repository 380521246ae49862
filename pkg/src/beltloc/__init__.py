"""Sound source localization for a wearable 8-microphone belt.

Masked GCC-PHAT delay estimation, a data-driven calibration that maps
per-pair delays onto azimuth and haptic motor angles, and kernel-scored
direction-of-arrival search, plus a belt acoustic simulator to exercise
the whole chain.
"""

__version__ = "0.1.0"

from .config import Config, KernelParams
from .errors import (
    BeltlocError,
    CalibrationError,
    ConfigurationError,
    InsufficientSamplesError,
    NoReliableFramesError,
)
from .dsp import MultichannelClip, Spectrogram, stft
from .masking import NoiseProfile, BinaryMask, estimate_noise, compute_mask
from .tdoa import TdoaVector, estimate_tdoas, pair_list
from .calibration import CalibrationProfile, calibrate
from .localization import DoaEstimate, localize

__all__ = [
    "BeltlocError",
    "BinaryMask",
    "CalibrationError",
    "CalibrationProfile",
    "Config",
    "ConfigurationError",
    "DoaEstimate",
    "InsufficientSamplesError",
    "KernelParams",
    "MultichannelClip",
    "NoReliableFramesError",
    "NoiseProfile",
    "Spectrogram",
    "TdoaVector",
    "calibrate",
    "compute_mask",
    "estimate_noise",
    "estimate_tdoas",
    "localize",
    "pair_list",
    "stft",
]
