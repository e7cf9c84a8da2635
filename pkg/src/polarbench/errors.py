"""Exception types shared across the package."""


class PolarBenchError(Exception):
    """Base class for all errors raised by polarbench."""


class StructuralError(PolarBenchError):
    """Shape, size, or layout structure violation."""


class DomainError(PolarBenchError):
    """Value outside its mathematical domain (e.g. dop > 1, non-finite input)."""


class ConfigError(PolarBenchError):
    """Invalid or inconsistent run configuration."""


class IngestError(PolarBenchError):
    """Scene directory or image file cannot be read as a polarization stack."""


class ValidationFailure(PolarBenchError):
    """A statistical validation gate did not pass."""
