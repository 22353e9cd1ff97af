"""Exception types shared across the toolkit.

Each failure mode callers are expected to distinguish gets its own class;
everything derives from PartCropError so blanket handling stays possible.
"""


class PartCropError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(PartCropError, ValueError):
    """An argument violates a documented precondition (shape, range, finiteness)."""


class DegenerateInputError(PartCropError, ValueError):
    """Input is structurally valid but numerically unusable (e.g. zero-norm vector)."""


class ContractViolationError(PartCropError):
    """A caller broke an internal protocol, e.g. fed an unbalanced training batch."""


class TransportError(PartCropError):
    """The remote encoder could not be reached or the connection failed mid-call."""


class ProtocolError(PartCropError):
    """The remote encoder answered, but the response does not follow the wire protocol."""


class ShapeMismatchError(ProtocolError):
    """The remote encoder returned a feature map whose shape contradicts the binding."""
