"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Dimension mismatch between a vector/batch and the expected layout."""


class ParameterError(ValueError):
    """A numeric argument is outside its legal range."""


class ProtocolError(RuntimeError):
    """Violation of a call-order, shape, or nonempty-input contract."""


class MaskUniverseError(ProtocolError):
    """Masks from different parameter universes were combined."""


class EncodingRangeError(ValueError):
    """A value does not fit the fixed-point slot range."""


class GuardBitError(RuntimeError):
    """Homomorphic additions would exceed the guard-bit capacity."""


class ConfigError(ValueError):
    """A config file entry is unknown, malformed, or out of range."""
