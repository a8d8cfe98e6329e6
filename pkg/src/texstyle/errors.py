"""Exception types shared across the package."""


class TexstyleError(Exception):
    """Base class for all package errors."""


class ConfigurationError(TexstyleError):
    """Bad shapes, parameters, or config values supplied by the caller."""


class ArchiveFormatError(TexstyleError):
    """Weight archive is malformed (magic, version, truncation, checksum)."""


class IncompleteArchiveError(TexstyleError):
    """Weight archive is valid but missing tensors a backbone requires."""


class NumericalError(TexstyleError):
    """Non-finite values appeared where only finite values are allowed."""
