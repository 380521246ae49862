"""Exception hierarchy.

Every error carries a ``category`` used by the command line front-end to
pick an exit code: ``config``, ``io`` or ``algorithm``.
"""


class BeltlocError(Exception):
    category = "algorithm"


class ConfigurationError(BeltlocError, ValueError):
    category = "config"


class InsufficientSamplesError(BeltlocError, ValueError):
    """The clip is shorter than one analysis frame."""


class NoReliableFramesError(BeltlocError):
    """No frame had enough unmasked bins to trust its correlation peak."""


class CalibrationError(BeltlocError):
    """Calibration produced a degenerate or inconsistent profile."""


class ProfileFormatError(ConfigurationError):
    """A calibration profile file could not be parsed or failed validation."""


class ManifestError(ConfigurationError):
    pass
