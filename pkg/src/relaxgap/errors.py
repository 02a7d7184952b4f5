"""Exception hierarchy shared by every module."""


class RelaxGapError(Exception):
    """Base class for all package errors."""


class InputError(RelaxGapError, ValueError):
    """Malformed or inconsistent input (shapes, labels, normalization)."""


class DomainError(RelaxGapError, ValueError):
    """A parameter lies outside the window where the quantity is defined."""


class NumericDomainError(RelaxGapError, ArithmeticError):
    """A normalizer vanished or overflowed."""


class MapError(RelaxGapError):
    """A registered map produced something that is not a distribution."""


class StructuralError(RelaxGapError):
    """A support condition required by the relaxation is violated."""


class CapExceededError(InputError):
    """Exhaustive enumeration would exceed the configured point cap."""
