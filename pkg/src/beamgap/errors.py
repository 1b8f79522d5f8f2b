"""Exception types shared across the package."""


class BeamgapError(Exception):
    """Base class for all package-specific errors."""


class ContractViolation(BeamgapError):
    """An input violated a documented precondition (e.g. non-unit beamformer)."""


class NotEnoughVisibleBeams(BeamgapError):
    """Random subset requested more beams than the visible pool holds."""


class MalformedRow(BeamgapError):
    """A mobility-trace CSV row failed validation."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class OutOfBounds(BeamgapError):
    """A position lies outside the world extent."""


class NonMonotonicTime(BeamgapError):
    """A vehicle's timestamps decrease within a trace."""


class EmptyFilterResult(BeamgapError):
    """Quadrant filtering left no trace records to sample from."""


class TooFewSamples(BeamgapError):
    """Training dataset is smaller than the minimum the trainer accepts."""


class NonFiniteLoss(BeamgapError):
    """Training loss diverged to NaN/inf."""


class ModelFileError(BeamgapError):
    """Model file is corrupt, truncated, or has a wrong magic/version."""


class ConfigError(BeamgapError):
    """Configuration validation failed; message names the offending key path."""
