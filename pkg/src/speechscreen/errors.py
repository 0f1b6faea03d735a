"""Exception types shared across the package."""


class SpeechScreenError(Exception):
    """Base class for all package errors."""


class ConfigError(SpeechScreenError):
    """Invalid run configuration or invalid argument combination."""


class DataError(SpeechScreenError):
    """Malformed or inconsistent input data (CSV contents, shape mismatches)."""


class TrainingError(SpeechScreenError):
    """Model fitting failed (singular system, divergence, factorization failure)."""
