"""The network's collection point.

Receives Reading frames from end nodes, forwards them in arrival order
over a lossless serial-like channel to the control center, and relays
Command frames back out to the addressed node. Duplicate (src, seq)
pairs are counted and discarded, with wrapping-aware sequence compare.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .domain import COORDINATOR_ID, SimTime
from .errors import UnknownNode
from .radio import ChannelModel, Delivered, Dropped, Frame, FrameKind, RadioLink, transmit

_SEQ_HALF = 0x8000


def seq_newer(seq: int, last: int) -> bool:
    """True iff seq is ahead of last under wrapping 16-bit arithmetic."""
    return 0 < ((seq - last) & 0xFFFF) < _SEQ_HALF


@dataclass
class UplinkCounters:
    received: int = 0
    duplicates: int = 0
    forwarded: int = 0
    dropped: int = 0


@dataclass
class Coordinator:
    """Single collection point of the star network (node id 0)."""

    node_id: int = COORDINATOR_ID
    known_nodes: set[int] = field(default_factory=set)
    last_seq: dict[int, int] = field(default_factory=dict)
    forward_queue: list[tuple[Frame, float, SimTime]] = field(default_factory=list)
    counters: dict[int, UplinkCounters] = field(default_factory=dict)

    def register(self, node: int) -> None:
        self.known_nodes.add(node)
        self.counters.setdefault(node, UplinkCounters())

    def queue_depth(self) -> int:
        return len(self.forward_queue)

    def on_radio_receive(self, frame: Frame, rssi: float, now: SimTime) -> None:
        """Take one delivered uplink frame; dedup, then queue for the center."""
        if frame.dst != self.node_id:
            raise ValueError(f"frame addressed to {frame.dst}, not coordinator {self.node_id}")
        self.register(frame.src)
        stats = self.counters[frame.src]
        stats.received += 1
        last = self.last_seq.get(frame.src)
        if last is not None and not seq_newer(frame.seq, last):
            stats.duplicates += 1
            return
        self.last_seq[frame.src] = frame.seq
        stats.forwarded += 1
        self.forward_queue.append((frame, rssi, now))

    def note_dropped(self, node: int) -> None:
        """Bookkeeping hook: the channel dropped an uplink frame from node."""
        self.register(node)
        self.counters[node].dropped += 1

    def drain_to_center(self) -> list[tuple[Frame, float, SimTime]]:
        """Hand the queued frames to the center, in arrival order.

        The serial channel is lossless and order-preserving; after the
        drain the queue is empty.
        """
        batch = self.forward_queue
        self.forward_queue = []
        return batch

    def relay_command(self, command: Frame, channel: ChannelModel,
                      links: dict[int, RadioLink], now: SimTime | None = None,
                      retries: int = 0) -> Delivered | Dropped:
        """Transmit a Command frame toward its target node.

        Optionally re-transmits up to `retries` extra times on a drop.

        Raises:
            UnknownNode: the target was never registered.
        """
        if command.kind is not FrameKind.COMMAND:
            raise ValueError(f"relay_command needs a Command frame, got {command.kind.name}")
        if command.dst not in self.known_nodes:
            raise UnknownNode(f"node {command.dst} is not registered")
        link = links[command.dst]
        outcome = transmit(channel, link, command, now)
        for _ in range(retries):
            if isinstance(outcome, Delivered):
                break
            outcome = transmit(channel, link, command, now)
        return outcome
