"""Exception types shared across the package."""


class VocabportError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(VocabportError):
    """Invalid data, configuration, or arguments."""


class FormatError(ValidationError):
    """A file does not conform to its declared on-disk format."""


class MalformedSpecError(ValidationError):
    """A tokenizer spec is internally inconsistent or incomplete."""
