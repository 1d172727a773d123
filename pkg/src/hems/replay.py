"""Rebuild control-center state from a persisted record log.

Replay drives the same ingest path as a live run, so every invariant is
re-checked; the final cumulative kWh per appliance must equal what the
original run reported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from .center import Center, ReadingRecord
from .domain import NodeKind, SimTime
from .errors import HemsError


class CorruptLogLine(HemsError):
    """A record-log line failed to parse or validate."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


@dataclass
class ReplaySummary:
    center: Center
    final_kwh: dict[str, float]
    switch_states: dict[str, str]          # on | off | unknown
    reading_lines: int = 0
    command_lines: int = 0
    header: dict = field(default_factory=dict)

    @property
    def total_kwh(self) -> float:
        return sum(self.final_kwh.values())


def replay_lines(lines) -> ReplaySummary:
    """Replay an iterable of record-log lines.

    Raises:
        CorruptLogLine: naming the first offending line (1-based).
    """
    center: Center | None = None
    header: dict = {}
    switch: dict[str, str] = {}
    readings = commands = 0
    tick_seconds = 1.0

    for line_no, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorruptLogLine(line_no, f"invalid JSON ({exc.msg})") from exc
        try:
            kind = obj["kind"]
            payload = obj["payload"]
            tick = obj["ts"]
        except (KeyError, TypeError) as exc:
            raise CorruptLogLine(line_no, f"missing field {exc}") from exc

        if kind == "run_header":
            header = payload
            tick_seconds = float(payload.get("tick_seconds", 1.0))
            appliance_nodes = {a["name"]: a["node"] for a in payload.get("appliances", [])}
            node_kinds = {a["node"]: NodeKind.ENERGY for a in payload.get("appliances", [])}
            for env in payload.get("environment_nodes", []):
                node_kinds[env["node"]] = NodeKind(env["kind"])
            epoch_raw = payload.get("epoch")
            epoch = datetime.fromisoformat(epoch_raw) if epoch_raw else None
            center = Center(appliance_nodes, node_kinds, tick_seconds=tick_seconds,
                            epoch=epoch)
            switch = {name: "unknown" for name in appliance_nodes}
            continue
        if center is None:
            raise CorruptLogLine(line_no, "log does not start with a run_header line")

        if kind == "command":
            commands += 1
            try:
                if payload["outcome"] == "delivered":
                    switch[payload["appliance"]] = payload["action"]
            except (KeyError, TypeError) as exc:
                raise CorruptLogLine(line_no, f"bad command payload ({exc})") from exc
            continue

        try:
            node_kind = NodeKind(kind)
            sample = Center.payload_from_dict(node_kind, payload)
            record = ReadingRecord(node=obj["node"], kind=node_kind,
                                   time=SimTime(tick, tick_seconds),
                                   payload=sample, rssi=obj["rssi"])
        except CorruptLogLine:
            raise
        except Exception as exc:
            raise CorruptLogLine(line_no, str(exc)) from exc
        center.ingest(record)
        readings += 1
        appliance = center.node_appliances.get(record.node)
        if appliance is not None:
            live = center.live.appliances[appliance]
            switch[appliance] = "on" if live.on else "off"

    if center is None:
        raise CorruptLogLine(1, "empty log: no run_header line")
    return ReplaySummary(
        center=center,
        final_kwh=center.final_kwh(),
        switch_states=switch,
        reading_lines=readings,
        command_lines=commands,
        header=header,
    )


def replay_file(path: str | Path) -> ReplaySummary:
    with open(path) as handle:
        return replay_lines(handle)
