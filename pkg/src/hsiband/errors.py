"""Exception types shared across the package."""


class HsiError(Exception):
    """Base class for all errors raised by hsiband."""


class ValidationError(HsiError, ValueError):
    """Input failed a precondition (bad header, bad patch file, bad argument)."""


class SelectionError(HsiError):
    """Band selection could not be carried out on the given inputs."""
