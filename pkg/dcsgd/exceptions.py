from typing import Optional, List
from dcsgd.types import GenericType


class AttributeNotSetError(Exception):
    pass


class DCSGDError(Exception):
    """Base class of the errors raised by the library."""


class ParameterError(DCSGDError, ValueError):
    """An operation was called outside of its preconditions."""


class MessageFormatError(DCSGDError, ValueError):
    """A compressed message or its byte layout is corrupt."""


class PropernessError(DCSGDError, ValueError):
    """A sampling with a node of zero inclusion probability was used."""


class ConstructionError(DCSGDError):
    """A problem instance has no minimizer or is unbounded below."""


class ConfigurationError(DCSGDError):
    """An experiment configuration failed validation."""

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        msg = "Invalid configuration:\n - " + "\n - ".join(self.problems)
        super().__init__(msg)


def cast(arg: Optional[GenericType]) -> GenericType:
    """Remove `Optional` from `T`."""
    if arg is None:
        raise AttributeNotSetError("Attribute cannot be None!")
    return arg
