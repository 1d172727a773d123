"""Simulated star-topology wireless layer.

Covers the frame codec, the distance-calibrated RSSI curve, packet-loss
injection, and single-hop delivery between end nodes and the coordinator.

Frame layout (all multi-byte fields big-endian)::

    0x5A | src u8 | dst u8 | seq u16 | kind u8 | len u8 | payload | crc u16

kind is 0=Reading, 1=Command, 2=Ack. The CRC is CRC-16/CCITT-FALSE over
every byte before it, magic included.
"""

from __future__ import annotations

import binascii
import enum
import random
import struct
from dataclasses import dataclass, field

from .domain import SimTime
from .errors import (
    ChecksumMismatch,
    InvalidMagic,
    PayloadTooLarge,
    Truncated,
    UnknownKind,
)

FRAME_MAGIC = 0x5A
MAX_PAYLOAD = 64
_HEADER = struct.Struct(">BBBHBB")  # magic, src, dst, seq, kind, len
_CRC = struct.Struct(">H")

# Default calibration: measured received signal strength against distance.
DEFAULT_CALIBRATION = ((5.0, -39.0), (10.0, -53.0), (15.0, -69.0), (20.0, -80.0))

DEFAULT_LOSS_ONSET_M = 16.0
DEFAULT_LOSS_FULL_M = 20.0

# Receiver elevation extends reach; modeled as an effective-distance credit.
ELEVATION_BONUS_M = 2.0


class FrameKind(enum.Enum):
    READING = 0
    COMMAND = 1
    ACK = 2


@dataclass(frozen=True)
class Frame:
    """The wire unit carried node->coordinator and coordinator->node."""

    src: int
    dst: int
    seq: int            # wrapping 16-bit counter
    kind: FrameKind
    payload: bytes = b""

    def __post_init__(self):
        if not 0 <= self.src <= 255:
            raise ValueError(f"src must fit one byte, got {self.src}")
        if not 0 <= self.dst <= 255:
            raise ValueError(f"dst must fit one byte, got {self.dst}")
        if not 0 <= self.seq <= 0xFFFF:
            raise ValueError(f"seq must fit 16 bits, got {self.seq}")


@dataclass(frozen=True)
class RadioLink:
    """Placement of one end node relative to the coordinator."""

    node: int
    distance: float          # metres
    elevation_bonus: bool = False

    def __post_init__(self):
        if self.distance < 0:
            raise ValueError(f"distance must be >= 0 m, got {self.distance}")

    @property
    def effective_distance(self) -> float:
        if self.elevation_bonus:
            return max(0.0, self.distance - ELEVATION_BONUS_M)
        return self.distance


@dataclass
class ChannelModel:
    """Distance-based RSSI and loss model with its own RNG stream."""

    calibration_points: tuple = DEFAULT_CALIBRATION
    loss_onset: float = DEFAULT_LOSS_ONSET_M
    loss_full: float = DEFAULT_LOSS_FULL_M
    rng_seed: int = 0
    rng: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        pts = tuple((float(d), float(r)) for d, r in self.calibration_points)
        if len(pts) < 2:
            raise ValueError("need at least two calibration points")
        distances = [d for d, _ in pts]
        if any(b <= a for a, b in zip(distances, distances[1:])):
            raise ValueError("calibration distances must be strictly increasing")
        if not self.loss_onset < self.loss_full:
            raise ValueError(
                f"loss_onset ({self.loss_onset}) must be < loss_full ({self.loss_full})"
            )
        self.calibration_points = pts
        self.rng = random.Random(self.rng_seed)


@dataclass(frozen=True)
class Delivered:
    frame: Frame
    rssi: float  # dBm


@dataclass(frozen=True)
class Dropped:
    frame: Frame


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection)."""
    return binascii.crc_hqx(data, 0xFFFF)


def encode_frame(frame: Frame) -> bytes:
    """Serialize a frame to its wire bytes.

    Raises:
        PayloadTooLarge: payload exceeds 64 bytes.
    """
    if len(frame.payload) > MAX_PAYLOAD:
        raise PayloadTooLarge(f"payload is {len(frame.payload)} bytes, max {MAX_PAYLOAD}")
    head = _HEADER.pack(FRAME_MAGIC, frame.src, frame.dst, frame.seq,
                        frame.kind.value, len(frame.payload)) + frame.payload
    return head + _CRC.pack(crc16(head))


def decode_frame(data: bytes) -> Frame:
    """Parse wire bytes back into a Frame; inverse of encode_frame.

    Raises:
        Truncated: not enough bytes for the declared layout.
        InvalidMagic: first byte is not 0x5A.
        UnknownKind: kind byte is not 0, 1 or 2.
        ChecksumMismatch: CRC does not verify.
    """
    if len(data) < _HEADER.size + _CRC.size:
        raise Truncated(f"frame needs >= {_HEADER.size + _CRC.size} bytes, got {len(data)}")
    magic, src, dst, seq, kind_byte, length = _HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise InvalidMagic(f"expected 0x{FRAME_MAGIC:02X}, got 0x{magic:02X}")
    end = _HEADER.size + length
    if len(data) != end + _CRC.size:
        raise Truncated(
            f"length byte says {length} payload bytes; frame is {len(data)} bytes, "
            f"expected {end + _CRC.size}"
        )
    (received,) = _CRC.unpack_from(data, end)
    computed = crc16(data[:end])
    if received != computed:
        raise ChecksumMismatch(f"received 0x{received:04X}, computed 0x{computed:04X}")
    try:
        kind = FrameKind(kind_byte)
    except ValueError:
        raise UnknownKind(f"frame kind byte 0x{kind_byte:02X}") from None
    return Frame(src=src, dst=dst, seq=seq, kind=kind, payload=bytes(data[_HEADER.size:end]))


def rssi_at(model: ChannelModel, distance: float) -> float:
    """Received signal strength in dBm at a given distance.

    Piecewise-linear through the calibration points, constant below the
    first point, and the last segment's slope extended beyond the final
    point. Exact at every calibration distance.
    """
    if distance < 0:
        raise ValueError(f"distance must be >= 0 m, got {distance}")
    pts = model.calibration_points
    if distance <= pts[0][0]:
        return pts[0][1]
    for (d0, r0), (d1, r1) in zip(pts, pts[1:]):
        if distance == d1:
            return r1
        if distance < d1:
            return r0 + (r1 - r0) * (distance - d0) / (d1 - d0)
    (d0, r0), (d1, r1) = pts[-2], pts[-1]
    return r1 + (r1 - r0) * (distance - d1) / (d1 - d0)


def loss_probability(model: ChannelModel, distance: float) -> float:
    """Probability that a frame at this distance is lost.

    Zero up to the loss onset, then a linear ramp reaching 1 at loss_full
    and staying there.
    """
    if distance < 0:
        raise ValueError(f"distance must be >= 0 m, got {distance}")
    if distance <= model.loss_onset:
        return 0.0
    if distance >= model.loss_full:
        return 1.0
    return (distance - model.loss_onset) / (model.loss_full - model.loss_onset)


def transmit(model: ChannelModel, link: RadioLink, frame: Frame,
             now: SimTime | None = None) -> Delivered | Dropped:
    """Send one frame over the link; returns Delivered with RSSI, or Dropped.

    Draws exactly one value from the channel RNG per call, so a fixed seed
    makes a whole transmission schedule reproducible. Transmissions from
    distinct nodes in the same tick are independent; there is no collision
    model.
    """
    if frame.src != link.node and frame.dst != link.node:
        raise ValueError(
            f"frame {frame.src}->{frame.dst} does not involve link node {link.node}"
        )
    distance = link.effective_distance
    p_loss = loss_probability(model, distance)
    if model.rng.random() < p_loss:
        return Dropped(frame)
    return Delivered(frame, rssi_at(model, distance))
