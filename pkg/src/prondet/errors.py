"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes: DataError covers bad
manifests, audio files, and serialized models; NumericalError covers
degenerate statistics and signal-content failures.
"""


class PronDetError(Exception):
    """Base class for all package errors."""


class DataError(PronDetError):
    """Invalid input data: manifests, audio files, model files."""


class ManifestError(DataError):
    """Manifest fails to parse or violates a structural invariant."""


class AudioError(DataError):
    """Audio file unreadable or of an unsupported layout."""


class ModelFormatError(DataError):
    """Serialized model is corrupt or has an unsupported version."""


class NumericalError(PronDetError):
    """Computation cannot proceed: degenerate variance, bad signal content."""


class SignalError(NumericalError):
    """Signal violates a processing precondition (silence, extreme scaling)."""
