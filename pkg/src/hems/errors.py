"""Exception types raised across the simulator.

Everything derives from HemsError so callers can catch the whole family;
the leaf classes match the failure modes named in the module contracts.
"""


class HemsError(Exception):
    """Base class for all simulator errors."""


class NonPositivePower(HemsError):
    """Appliance rated power must be strictly positive."""


class NodeKindMismatch(HemsError):
    """An appliance was attached to a node that is not an energy node."""


class WrongKind(HemsError):
    """A sensor operation was invoked for a node kind it does not support."""


class FrameError(HemsError):
    """Base class for wire-format failures."""


class PayloadTooLarge(FrameError):
    """Frame payload exceeds the 64-byte limit."""


class Truncated(FrameError):
    """Byte sequence is too short to hold the frame it claims."""


class ChecksumMismatch(FrameError):
    """Frame checksum does not verify."""


class UnknownKind(FrameError):
    """Frame kind byte (or payload kind byte) is not a known value."""


class InvalidMagic(FrameError):
    """First byte is not the frame magic."""


class OverCurrent(HemsError):
    """Switching the load on would exceed the relay's current rating."""


class LengthMismatch(HemsError):
    """Paired series have different lengths."""


class EmptySeries(HemsError):
    """A statistic needs more data points than were given."""


class NonMonotoneTime(HemsError):
    """Sample timestamps must be strictly increasing."""


class ApplianceSetMismatch(HemsError):
    """Offline and online results cover different appliance sets."""


class UnknownAppliance(HemsError):
    """No appliance with that name is configured."""


class UnknownNode(HemsError):
    """No node with that id is registered."""


class StorageFailure(HemsError):
    """The record log could not be written; nothing was persisted."""


class ConfigError(HemsError):
    """Experiment configuration is invalid; the message names the field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class Unauthorized(HemsError):
    """Missing or insufficient API credentials."""
