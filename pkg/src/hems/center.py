"""The monitoring and control center.

Ingests readings from the coordinator's serial drain, persists them to an
append-only record log, maintains a live per-appliance cache, evaluates
automation policies, and dispatches ON/OFF commands. One writer (the
simulation loop) and many readers; readers see consistent snapshots.

Record-log line format: one JSON object per line with fields ts, node,
kind, payload, rssi. Command outcomes use kind="command" with the
command's details in payload; the first line of a run is kind="run_header"
and echoes what replay needs.
"""

from __future__ import annotations

import bisect
import json
import math
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, IO

from .domain import (
    ElectricalSample,
    EnvironmentSample,
    NodeKind,
    SimTime,
    SwitchAction,
)
from .errors import StorageFailure, UnknownAppliance
from .profiles import WS_PER_KWH

SECONDS_PER_DAY = 86400
SECONDS_PER_WEEK = 7 * SECONDS_PER_DAY

# An appliance drawing less than this is considered switched off.
ON_THRESHOLD_W = 0.5


@dataclass(frozen=True)
class ReadingRecord:
    """One ingested measurement with its radio and timing context."""

    node: int
    kind: NodeKind
    time: SimTime
    payload: ElectricalSample | EnvironmentSample
    rssi: float

    def __post_init__(self):
        is_energy = isinstance(self.payload, ElectricalSample)
        if is_energy != (self.kind is NodeKind.ENERGY):
            raise ValueError(f"payload variant does not match kind {self.kind.value}")


class RuleMode:
    AUTOMATIC = "automatic"
    ADVISORY = "advisory"


_OPS: dict[str, Callable] = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
}

RULE_QUANTITIES = ("temperature", "humidity", "luminosity", "presence", "power")


@dataclass(frozen=True)
class PolicyRule:
    """Threshold/presence/time-window trigger bound to one ON/OFF action.

    for_minutes requires the condition to hold that long before the rule
    fires (debounce). clear_value adds hysteresis: after firing, the rule
    re-arms only once the quantity no longer satisfies the trigger with
    clear_value in place of value.
    """

    id: str
    quantity: str
    op: str
    value: float | bool
    appliance: str
    action: SwitchAction
    mode: str = RuleMode.AUTOMATIC
    for_minutes: float = 0.0
    window: tuple[int, int] | None = None  # seconds-of-day [start, end)
    clear_value: float | None = None
    source_appliance: str | None = None   # for quantity="power"; defaults to target

    def __post_init__(self):
        if self.quantity not in RULE_QUANTITIES:
            raise ValueError(f"rule {self.id}: unknown quantity {self.quantity!r}")
        if self.op not in _OPS:
            raise ValueError(f"rule {self.id}: unknown operator {self.op!r}")
        if self.mode not in (RuleMode.AUTOMATIC, RuleMode.ADVISORY):
            raise ValueError(f"rule {self.id}: unknown mode {self.mode!r}")
        if self.for_minutes < 0:
            raise ValueError(f"rule {self.id}: for_minutes must be >= 0")


@dataclass(frozen=True)
class ActionIntent:
    appliance: str
    action: SwitchAction
    origin: str  # "rule:<id>" or "user:<session>"


@dataclass(frozen=True)
class CommandLogEntry:
    time: SimTime
    appliance: str
    action: SwitchAction
    origin: str
    outcome: str  # delivered | dropped | overcurrent | superseded


@dataclass
class ApplianceLive:
    name: str
    node: int
    watts: float | None = None
    energy_kwh: float | None = None
    updated_tick: int | None = None

    @property
    def on(self) -> bool | None:
        if self.watts is None:
            return None
        return self.watts > ON_THRESHOLD_W


@dataclass
class EnvironmentLive:
    temperature: float | None = None
    humidity: float | None = None
    luminosity: float | None = None
    presence: bool | None = None
    presence_since: int | None = None  # tick the current presence value was first seen
    updated_tick: int | None = None


@dataclass
class LiveState:
    """The center's latest consistent view, including rule bookkeeping."""

    appliances: dict[str, ApplianceLive] = field(default_factory=dict)
    environment: EnvironmentLive = field(default_factory=EnvironmentLive)
    rule_true_since: dict[str, int | None] = field(default_factory=dict)
    rule_armed: dict[str, bool] = field(default_factory=dict)
    rule_advised: dict[str, bool] = field(default_factory=dict)


def _quantity_value(rule: PolicyRule, live: LiveState):
    env = live.environment
    if rule.quantity == "temperature":
        return env.temperature
    if rule.quantity == "humidity":
        return env.humidity
    if rule.quantity == "luminosity":
        return env.luminosity
    if rule.quantity == "presence":
        return env.presence
    name = rule.source_appliance or rule.appliance
    app = live.appliances.get(name)
    return app.watts if app else None


def _raw_trigger(rule: PolicyRule, live: LiveState, now_tick: int,
                 tick_seconds: float, second_of_day: int) -> bool:
    if rule.window is not None:
        start, end = rule.window
        if not start <= second_of_day < end:
            return False
    value = _quantity_value(rule, live)
    if value is None:
        return False
    return _OPS[rule.op](value, rule.value)


def update_rule_conditions(rules: list[PolicyRule], live: LiveState, now_tick: int,
                           tick_seconds: float, second_of_day: int) -> None:
    """Fold the latest readings into each rule's condition bookkeeping."""
    for rule in rules:
        raw = _raw_trigger(rule, live, now_tick, tick_seconds, second_of_day)
        if raw:
            if live.rule_true_since.get(rule.id) is None:
                live.rule_true_since[rule.id] = now_tick
        else:
            live.rule_true_since[rule.id] = None
            live.rule_advised[rule.id] = False
        if rule.clear_value is not None and not live.rule_armed.get(rule.id, True):
            value = _quantity_value(rule, live)
            if value is not None and not _OPS[rule.op](value, rule.clear_value):
                live.rule_armed[rule.id] = True


def evaluate_policies(rules: list[PolicyRule], live: LiveState, now_tick: int,
                      tick_seconds: float = 1.0,
                      second_of_day: int | None = None,
                      ) -> tuple[list[ActionIntent], list[tuple[str, str]]]:
    """Decide which rules fire against the current live state.

    Pure function of its arguments: automatic rules whose (debounced)
    trigger holds and whose target is not already in the desired state
    yield one intent each, in rule-list order; advisory rules yield
    (rule id, notification) pairs instead, one per onset of their
    condition.
    """
    if second_of_day is None:
        second_of_day = int(now_tick * tick_seconds) % SECONDS_PER_DAY
    actions: list[ActionIntent] = []
    advisories: list[str] = []
    for rule in rules:
        if not _raw_trigger(rule, live, now_tick, tick_seconds, second_of_day):
            continue
        since = live.rule_true_since.get(rule.id)
        held_s = (now_tick - since) * tick_seconds if since is not None else 0.0
        if held_s < rule.for_minutes * 60.0:
            continue
        if not live.rule_armed.get(rule.id, True):
            continue
        target = live.appliances.get(rule.appliance)
        desired_on = rule.action is SwitchAction.ON
        if target is not None and target.on is not None and target.on == desired_on:
            continue
        if rule.mode == RuleMode.ADVISORY:
            if not live.rule_advised.get(rule.id, False):
                advisories.append((rule.id,
                                   f"rule {rule.id}: suggest {rule.action.value} {rule.appliance}"))
        else:
            actions.append(ActionIntent(rule.appliance, rule.action, f"rule:{rule.id}"))
    return actions, advisories


class Center:
    """Ingest, persistence, live cache, policy evaluation and dispatch."""

    def __init__(self, appliance_nodes: dict[str, int], node_kinds: dict[int, NodeKind],
                 tick_seconds: float = 1.0, epoch: datetime | None = None,
                 log_file: IO[str] | None = None, rules: list[PolicyRule] | None = None):
        self.appliance_nodes = dict(appliance_nodes)
        self.node_appliances = {n: a for a, n in appliance_nodes.items()}
        self.node_kinds = dict(node_kinds)
        self.tick_seconds = tick_seconds
        self.epoch = epoch or datetime(2021, 6, 21)  # a Monday
        self.rules = list(rules or [])
        self.live = LiveState(
            appliances={name: ApplianceLive(name, node) for name, node in appliance_nodes.items()}
        )
        self.events: list[dict] = []
        self.command_log: list[CommandLogEntry] = []
        self.notifications: list[str] = []
        self.ingest_count = 0
        self.node_reading_counts: dict[int, int] = {}
        # per-appliance reading history: parallel (ticks, watts, kwh) columns
        self._hist: dict[str, tuple[list[int], list[float], list[float]]] = {
            name: ([], [], []) for name in appliance_nodes
        }
        self._log_file = log_file
        self._downlink_seq = 0
        self.command_sender: Callable[..., str] | None = None
        self.lock = threading.RLock()
        self._events_available = threading.Condition(self.lock)

    # -- time helpers ----------------------------------------------------

    def wall_time(self, tick: int) -> datetime:
        return self.epoch + timedelta(seconds=tick * self.tick_seconds)

    def second_of_day(self, tick: int) -> int:
        return int(tick * self.tick_seconds) % SECONDS_PER_DAY

    # -- persistence -----------------------------------------------------

    def _write_line(self, obj: dict) -> None:
        if self._log_file is None:
            return
        try:
            self._log_file.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
        except OSError as exc:
            raise StorageFailure(f"record log write failed: {exc}") from exc

    def flush(self) -> None:
        if self._log_file is not None:
            try:
                self._log_file.flush()
            except OSError as exc:
                raise StorageFailure(f"record log flush failed: {exc}") from exc

    def write_header(self, header_payload: dict) -> None:
        self._write_line({
            "ts": 0, "node": 0, "kind": "run_header",
            "payload": header_payload, "rssi": None,
        })

    @staticmethod
    def payload_to_dict(payload: ElectricalSample | EnvironmentSample) -> dict:
        if isinstance(payload, ElectricalSample):
            return {
                "current_a": payload.current,
                "voltage_v": payload.voltage,
                "power_factor": payload.power_factor,
                "power_w": payload.power,
                "energy_kwh": payload.energy_kwh,
            }
        return {
            "temperature_c": payload.temperature,
            "humidity_pct": payload.humidity,
            "luminosity_lux": payload.luminosity,
            "presence": payload.presence,
        }

    @staticmethod
    def payload_from_dict(kind: NodeKind, data: dict) -> ElectricalSample | EnvironmentSample:
        if kind is NodeKind.ENERGY:
            return ElectricalSample.from_measurements(
                current=data["current_a"],
                voltage=data["voltage_v"],
                power_factor=data["power_factor"],
                energy_kwh=data["energy_kwh"],
            )
        return EnvironmentSample(
            temperature=data["temperature_c"],
            humidity=data["humidity_pct"],
            luminosity=data["luminosity_lux"],
            presence=data["presence"],
        )

    # -- ingest ----------------------------------------------------------

    def ingest(self, record: ReadingRecord) -> int:
        """Persist one reading, update the live cache, publish the event.

        Returns the event sequence number as the acknowledgment. On a
        StorageFailure nothing is cached or published.
        """
        with self.lock:
            tick = record.time.ticks
            line = {
                "ts": tick,
                "node": record.node,
                "kind": record.kind.value,
                "payload": self.payload_to_dict(record.payload),
                "rssi": record.rssi,
            }
            self._write_line(line)
            self._apply_reading(record)
            event = dict(line)
            event["type"] = "reading"
            appliance = self.node_appliances.get(record.node)
            if appliance is not None:
                event["appliance"] = appliance
            return self._publish(event)

    def _apply_reading(self, record: ReadingRecord) -> None:
        tick = record.time.ticks
        self.ingest_count += 1
        self.node_reading_counts[record.node] = self.node_reading_counts.get(record.node, 0) + 1
        if record.kind is NodeKind.ENERGY:
            name = self.node_appliances.get(record.node)
            if name is None:
                raise UnknownAppliance(f"no appliance metered by node {record.node}")
            app = self.live.appliances[name]
            assert isinstance(record.payload, ElectricalSample)
            app.watts = record.payload.power
            app.energy_kwh = record.payload.energy_kwh
            app.updated_tick = tick
            ticks, watts, kwh = self._hist[name]
            ticks.append(tick)
            watts.append(record.payload.power)
            kwh.append(record.payload.energy_kwh)
            return
        env = self.live.environment
        assert isinstance(record.payload, EnvironmentSample)
        if record.kind is NodeKind.TEMPERATURE_HUMIDITY:
            env.temperature = record.payload.temperature
            env.humidity = record.payload.humidity
        elif record.kind is NodeKind.LUMINOSITY:
            env.luminosity = record.payload.luminosity
        elif record.kind is NodeKind.PRESENCE:
            if env.presence != record.payload.presence:
                env.presence_since = tick
            env.presence = record.payload.presence
        env.updated_tick = tick

    def _publish(self, event: dict) -> int:
        event["seq"] = len(self.events)
        self.events.append(event)
        self._events_available.notify_all()
        return event["seq"]

    # -- policies and commands -------------------------------------------

    def after_ingest_batch(self, now_tick: int) -> None:
        """Refresh rule condition tracking once per drained batch."""
        with self.lock:
            update_rule_conditions(self.rules, self.live, now_tick,
                                   self.tick_seconds, self.second_of_day(now_tick))

    def intended_actions(self, now_tick: int) -> list[ActionIntent]:
        with self.lock:
            actions, advisories = evaluate_policies(
                self.rules, self.live, now_tick, self.tick_seconds,
                self.second_of_day(now_tick))
            for rule_id, note in advisories:
                self.live.rule_advised[rule_id] = True
                self.notifications.append(note)
                self._publish({"type": "advisory", "ts": now_tick, "note": note})
            return actions

    def dispatch(self, intent: ActionIntent, now_tick: int) -> CommandLogEntry:
        """Send one command toward its node and record the outcome.

        Raises:
            UnknownAppliance: the target is not configured.
        """
        with self.lock:
            node = self.appliance_nodes.get(intent.appliance)
            if node is None:
                raise UnknownAppliance(intent.appliance)
            if self.command_sender is None:
                raise RuntimeError("no command sender wired to the center")
            self._downlink_seq = (self._downlink_seq + 1) & 0xFFFF
            outcome = self.command_sender(node, intent.action, self._downlink_seq, now_tick)
            entry = self._record_command(intent, now_tick, outcome)
            if outcome == "delivered" and intent.origin.startswith("rule:"):
                rule_id = intent.origin.split(":", 1)[1]
                for rule in self.rules:
                    if rule.id == rule_id and rule.clear_value is not None:
                        self.live.rule_armed[rule.id] = False
            return entry

    def record_superseded(self, intent: ActionIntent, now_tick: int) -> CommandLogEntry:
        with self.lock:
            return self._record_command(intent, now_tick, "superseded")

    def _record_command(self, intent: ActionIntent, now_tick: int, outcome: str) -> CommandLogEntry:
        entry = CommandLogEntry(
            time=SimTime(now_tick, self.tick_seconds),
            appliance=intent.appliance,
            action=intent.action,
            origin=intent.origin,
            outcome=outcome,
        )
        self.command_log.append(entry)
        payload = {
            "appliance": intent.appliance,
            "action": intent.action.value,
            "origin": intent.origin,
            "outcome": outcome,
        }
        self._write_line({
            "ts": now_tick,
            "node": self.appliance_nodes.get(intent.appliance, 0),
            "kind": "command",
            "payload": payload,
            "rssi": None,
        })
        event = {"type": "command", "ts": now_tick, "appliance": intent.appliance,
                 "payload": payload}
        self._publish(event)
        return entry

    # -- queries ---------------------------------------------------------

    def snapshot(self) -> dict:
        """Latest consistent view of every appliance and the environment."""
        with self.lock:
            apps = {}
            for name, live in self.live.appliances.items():
                state = "unknown" if live.on is None else ("on" if live.on else "off")
                apps[name] = {
                    "state": state,
                    "watts": live.watts,
                    "kwh_total": live.energy_kwh,
                    "updated_tick": live.updated_tick,
                }
            env = self.live.environment
            return {
                "appliances": apps,
                "environment": {
                    "temperature_c": env.temperature,
                    "humidity_pct": env.humidity,
                    "luminosity_lux": env.luminosity,
                    "presence": env.presence,
                    "updated_tick": env.updated_tick,
                },
                "events": len(self.events),
            }

    def _cum_kwh_at(self, name: str, tick: int) -> float:
        """Cumulative kWh at a tick boundary, sample-and-hold extended."""
        ticks, watts, kwh = self._hist[name]
        # readings at tick t cover consumption through the end of tick t
        idx = bisect.bisect_right(ticks, tick - 1) - 1
        if idx < 0:
            return 0.0
        base = kwh[idx]
        held = watts[idx]
        extra_ticks = tick - (ticks[idx] + 1)
        if extra_ticks <= 0 or held == 0.0:
            return base
        return base + held * extra_ticks * self.tick_seconds / WS_PER_KWH

    def query_history(self, appliance: str, from_tick: int, to_tick: int,
                      resolution_s: int) -> list[dict]:
        """Per-bucket energy for one appliance over [from_tick, to_tick).

        Returns ceil(window / resolution) buckets of kWh plus the average
        watts implied by each bucket. Empty window -> empty series.

        Raises:
            UnknownAppliance: the appliance is not configured.
        """
        if appliance not in self._hist:
            raise UnknownAppliance(appliance)
        if to_tick < from_tick:
            raise ValueError("window end precedes start")
        if resolution_s <= 0:
            raise ValueError("resolution must be > 0 s")
        with self.lock:
            window_ticks = to_tick - from_tick
            res_ticks = max(1, int(round(resolution_s / self.tick_seconds)))
            buckets = math.ceil(window_ticks / res_ticks)
            out = []
            for i in range(buckets):
                a = from_tick + i * res_ticks
                b = min(from_tick + (i + 1) * res_ticks, to_tick)
                kwh = self._cum_kwh_at(appliance, b) - self._cum_kwh_at(appliance, a)
                span_s = (b - a) * self.tick_seconds
                out.append({
                    "tick": a,
                    "time": self.wall_time(a).isoformat(),
                    "kwh": kwh,
                    "avg_watts": kwh * WS_PER_KWH / span_s if span_s else 0.0,
                })
            return out

    def export_csv(self, appliance: str) -> str:
        """CSV of every stored reading for one appliance: ts, watts, kwh_cum."""
        if appliance not in self._hist:
            raise UnknownAppliance(appliance)
        with self.lock:
            ticks, watts, kwh = self._hist[appliance]
            lines = ["ts,watts,kwh_cum"]
            lines.extend(f"{t},{w!r},{e!r}" for t, w, e in zip(ticks, watts, kwh))
            return "\n".join(lines) + "\n"

    def get_events(self, since_seq: int = 0, appliances: set[str] | None = None,
                   limit: int | None = None) -> list[dict]:
        """Events from a cursor, optionally filtered to an appliance set."""
        with self.lock:
            events = self.events[since_seq:]
        if appliances is not None:
            events = [e for e in events if e.get("appliance") in appliances]
        if limit is not None:
            events = events[:limit]
        return events

    def final_kwh(self) -> dict[str, float]:
        """Last persisted cumulative meter reading per appliance."""
        with self.lock:
            out = {}
            for name, (_, _, kwh) in self._hist.items():
                out[name] = kwh[-1] if kwh else 0.0
            return out
