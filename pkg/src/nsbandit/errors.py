"""Exception types shared across the package."""


class NsbanditError(Exception):
    """Base class for all package errors."""


class InvalidArm(NsbanditError):
    """Arm index outside {1..A}."""


class InvalidLength(NsbanditError):
    """A count/length argument outside its admissible range."""


class OutOfHorizon(NsbanditError):
    """A time index beyond the supported horizon (t > 2^D, or an exhausted state)."""


class NotActive(NsbanditError):
    """A segment that is not currently active was queried."""


class DomainError(NsbanditError):
    """Arguments outside the domain where a bound/formula is defined."""


class ConfigError(NsbanditError):
    """Invalid experiment configuration."""
