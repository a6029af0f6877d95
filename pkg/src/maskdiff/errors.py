"""Exception types shared across the package."""


class MaskdiffError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MaskdiffError):
    """Operand shapes are incompatible with the requested operation."""


class DegenerateMaskError(MaskdiffError):
    """A softmax slice has no allowed entries left after masking."""


class ConfigError(MaskdiffError):
    """A configuration value is out of its documented range."""


class InputError(MaskdiffError):
    """User-supplied input (prompt, image, mask) is unusable."""


class WordNotFoundError(MaskdiffError):
    """A word targeted for attention masking does not occur in the prompt."""


class InjectionError(MaskdiffError):
    """Injected features do not match the shape of the receiving block."""


class FormatError(MaskdiffError):
    """A byte stream does not conform to its declared file format."""
