"""The discrete-tick simulation loop.

Each tick covers [t, t+1) tick-seconds and runs the three-stage cycle:
sensor nodes report over the radio (data collection), the coordinator
drains to the center which persists and caches (processing), then user
commands and policy actions go back out as Command frames (control).

Edge semantics: a usage-schedule edge switches the appliance at the
start of its tick; a delivered command takes effect from the next tick.
Energy accrues lazily at state-change and reporting boundaries, so the
accounting stays tick-exact without per-tick work.
"""

from __future__ import annotations

import threading
import time as _time
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .center import ActionIntent, Center, ReadingRecord
from .config import ExperimentConfig
from .coordinator import Coordinator
from .domain import NodeKind, SimTime, SwitchAction
from .errors import OverCurrent
from .profiles import EnergyMeter
from .radio import ChannelModel, Delivered, Frame, FrameKind, RadioLink, decode_frame, encode_frame, transmit
from .sensors import (
    ApplianceState,
    HomeState,
    NoiseModel,
    RelayState,
    actuate,
    decode_command,
    decode_reading,
    encode_command,
    encode_reading,
    sample_energy,
    sample_environment,
)

SECONDS_PER_DAY = 86400

# Keeps the measurement-noise stream independent of the channel stream.
_NOISE_SEED_OFFSET = 1_000_003


@dataclass
class EndNode:
    """One simulated sensor-actuator node."""

    node_id: int
    kind: NodeKind
    link: RadioLink
    appliance: str | None = None   # energy nodes only
    seq: int = 0
    emitted: int = 0

    def next_seq(self) -> int:
        seq = self.seq
        self.seq = (self.seq + 1) & 0xFFFF
        return seq


@dataclass
class RunResult:
    final_kwh: dict[str, float]
    emitted: dict[int, int]
    persisted: dict[int, int]
    center: Center
    coordinator: Coordinator
    ticks: int
    log_path: Path | None = None


class Simulation:
    """Owns the home ground truth, the network, and the center for one run."""

    def __init__(self, config: ExperimentConfig, policies_active: bool = False,
                 log_file=None, mode_label: str | None = None):
        self.config = config
        self.policies_active = policies_active
        self.tick_seconds = config.tick_seconds
        self.total_ticks = int(round(config.duration_s / config.tick_seconds))
        self.report_interval = max(1, int(round(config.report_interval_s / config.tick_seconds)))

        self.channel = ChannelModel(
            calibration_points=config.channel.calibration,
            loss_onset=config.channel.loss_onset_m,
            loss_full=config.channel.loss_full_m,
            rng_seed=config.seed,
        )
        self.noise = NoiseModel(
            current_a=config.noise.current_a,
            voltage_v=config.noise.voltage_v,
            temperature_c=config.noise.temperature_c,
            humidity_pct=config.noise.humidity_pct,
            luminosity_lux=config.noise.luminosity_lux,
            rng_seed=config.seed + _NOISE_SEED_OFFSET,
        )

        self.home = HomeState()
        self.meters: dict[str, EnergyMeter] = {}
        self._meter_boundary: dict[str, int] = {}
        self.nodes: list[EndNode] = []
        self.links: dict[int, RadioLink] = {}
        self.relays: dict[int, RelayState] = {}
        for setup in config.appliances:
            name = setup.spec.name
            self.home.appliances[name] = ApplianceState(
                spec=setup.spec,
                supply_voltage=setup.supply_voltage,
                power_factor=setup.power_factor,
                load_fraction=setup.load_fraction,
            )
            self.meters[name] = EnergyMeter(config.tick_seconds)
            self._meter_boundary[name] = 0
            link = RadioLink(setup.spec.node, setup.link_distance_m, setup.elevation_bonus)
            self.links[setup.spec.node] = link
            self.relays[setup.spec.node] = RelayState(setup.spec.node)
            self.nodes.append(EndNode(setup.spec.node, NodeKind.ENERGY, link, name))
        for env_node in config.environment_nodes:
            link = RadioLink(env_node.node, env_node.link_distance_m, env_node.elevation_bonus)
            self.links[env_node.node] = link
            self.nodes.append(EndNode(env_node.node, env_node.kind, link))

        self.coordinator = Coordinator()
        for node in self.nodes:
            self.coordinator.register(node.node_id)

        self.center = Center(
            appliance_nodes=config.appliance_nodes(),
            node_kinds=config.node_kinds(),
            tick_seconds=config.tick_seconds,
            epoch=config.epoch,
            log_file=log_file,
            rules=list(config.rules) if policies_active else [],
        )
        self.center.command_sender = self._send_command
        self.center.write_header(self._header_payload(mode_label))

        self._edges = self._build_edge_map()
        self._user_queue: deque[tuple[str, SwitchAction, str]] = deque()
        self._queue_lock = threading.Lock()
        self.now_tick = 0
        self._apply_ambient(0)

    # -- setup helpers -----------------------------------------------------

    def _header_payload(self, mode_label: str | None) -> dict:
        return {
            "config_name": self.config.name,
            "mode": mode_label or ("online-emergent" if self.policies_active else "offline"),
            "seed": self.config.seed,
            "tick_seconds": self.config.tick_seconds,
            "report_interval_s": self.config.report_interval_s,
            "duration_s": self.config.duration_s,
            "epoch": self.config.epoch.isoformat(),
            "appliances": [
                {
                    "name": s.spec.name,
                    "node": s.spec.node,
                    "rated_watts": s.spec.rated_power,
                    "supply_voltage": s.supply_voltage,
                }
                for s in self.config.appliances
            ],
            "environment_nodes": [
                {"node": n.node, "kind": n.kind.value} for n in self.config.environment_nodes
            ],
        }

    def _build_edge_map(self) -> dict[int, list[tuple]]:
        """Precompute every tick that changes ground truth outside control."""
        edges: dict[int, list[tuple]] = {}

        def add(tick: int, event: tuple) -> None:
            if 0 <= tick < self.total_ticks:
                edges.setdefault(tick, []).append(event)

        def tick_of(day: int, second: int) -> int:
            return int(round((day * SECONDS_PER_DAY + second) / self.tick_seconds))

        for profile in self.config.usage:
            for iv in profile.intervals:
                add(tick_of(iv.day, iv.on_s), ("switch", profile.appliance, True))
                add(tick_of(iv.day, iv.off_s), ("switch", profile.appliance, False))
        days = int(self.config.duration_s // SECONDS_PER_DAY) + 1
        for day in range(days):
            for hour in range(24):
                tick = tick_of(day, hour * 3600)
                if tick > 0:
                    add(tick, ("ambient",))
            for iv in self.config.environment.occupancy:
                if day % 7 in iv.days:
                    add(tick_of(day, iv.start_s), ("ambient",))
                    add(tick_of(day, iv.end_s), ("ambient",))
        return edges

    # -- ground-truth bookkeeping -------------------------------------------

    def _accrue(self, name: str, boundary_tick: int) -> None:
        last = self._meter_boundary[name]
        if boundary_tick > last:
            self.meters[name].accrue(self.home.appliances[name].draw, boundary_tick - last)
            self._meter_boundary[name] = boundary_tick

    def _set_switch(self, name: str, on: bool, boundary_tick: int) -> None:
        self._accrue(name, boundary_tick)
        self.home.appliances[name].on = on
        relay = self.relays.get(self.home.appliances[name].spec.node)
        if relay is not None:
            relay.closed = on

    def _apply_ambient(self, tick: int) -> None:
        second = int(tick * self.tick_seconds)
        day = (second // SECONDS_PER_DAY) % 7
        second_of_day = second % SECONDS_PER_DAY
        temp, hum, lux = self.config.environment.ambient_at(second_of_day)
        self.home.temperature = temp
        self.home.humidity = hum
        self.home.luminosity = lux
        self.home.occupant = self.config.environment.position_at(day, second_of_day)

    # -- command path --------------------------------------------------------

    def enqueue_user_command(self, appliance: str, action: SwitchAction,
                             session: str = "default") -> None:
        with self._queue_lock:
            self._user_queue.append((appliance, action, session))

    def _send_command(self, node: int, action: SwitchAction, seq: int, now_tick: int) -> str:
        frame = Frame(src=self.coordinator.node_id, dst=node, seq=seq,
                      kind=FrameKind.COMMAND, payload=encode_command(action))
        wire = encode_frame(frame)
        outcome = self.coordinator.relay_command(
            decode_frame(wire), self.channel, self.links,
            SimTime(now_tick, self.tick_seconds), retries=self.config.command_retries)
        if not isinstance(outcome, Delivered):
            return "dropped"
        name = self.center.node_appliances.get(node)
        try:
            # command takes effect from the next tick; close this tick first
            if name is not None:
                self._accrue(name, now_tick + 1)
            actuate(self.relays[node], decode_command(outcome.frame.payload), self.home)
        except OverCurrent:
            return "overcurrent"
        return "delivered"

    # -- reading path ----------------------------------------------------------

    def _emit_readings(self, tick: int) -> None:
        now = SimTime(tick, self.tick_seconds)
        for node in self.nodes:
            if node.kind is NodeKind.ENERGY:
                name = node.appliance
                self._accrue(name, tick + 1)  # reading covers through end of tick
                setup_state = self.home.appliances[name]
                sample = sample_energy(self.home, setup_state.spec,
                                       setup_state.supply_voltage, self.noise,
                                       energy_kwh=self.meters[name].kwh)
            else:
                sample = sample_environment(self.home, node.kind, self.noise)
            payload = encode_reading(node.kind, sample)
            frame = Frame(src=node.node_id, dst=self.coordinator.node_id,
                          seq=node.next_seq(), kind=FrameKind.READING, payload=payload)
            wire = encode_frame(frame)
            node.emitted += 1
            outcome = transmit(self.channel, node.link, frame, now)
            if isinstance(outcome, Delivered):
                self.coordinator.on_radio_receive(decode_frame(wire), outcome.rssi, now)
            else:
                self.coordinator.note_dropped(node.node_id)

    # -- main loop ---------------------------------------------------------------

    def step_tick(self) -> None:
        t = self.now_tick
        events = self._edges.get(t)
        if events is not None:
            ambient_done = False
            for event in events:
                if event[0] == "switch":
                    self._set_switch(event[1], event[2], t)
                elif not ambient_done:
                    self._apply_ambient(t)
                    ambient_done = True

        reporting = (t % self.report_interval == 0) or (t == self.total_ticks - 1)
        if reporting:
            self._emit_readings(t)

        batch = self.coordinator.drain_to_center()
        if batch:
            for frame, rssi, stamp in batch:
                kind, sample = decode_reading(frame.payload)
                record = ReadingRecord(node=frame.src, kind=kind, time=stamp,
                                       payload=sample, rssi=rssi)
                self.center.ingest(record)
            self.center.flush()
            self.center.after_ingest_batch(t)

        with self._queue_lock:
            user_cmds = list(self._user_queue)
            self._user_queue.clear()
        rule_actions: list[ActionIntent] = []
        if self.policies_active and batch:
            rule_actions = self.center.intended_actions(t)
        if user_cmds or rule_actions:
            user_targets = {name for name, _, _ in user_cmds}
            for name, action, session in user_cmds:
                self.center.dispatch(ActionIntent(name, action, f"user:{session}"), t)
            for intent in rule_actions:
                if intent.appliance in user_targets:
                    self.center.record_superseded(intent, t)
                else:
                    self.center.dispatch(intent, t)
            self.center.flush()

        self.now_tick = t + 1

    def run(self) -> RunResult:
        while self.now_tick < self.total_ticks:
            self.step_tick()
        self.center.flush()
        return self.result()

    def result(self) -> RunResult:
        return RunResult(
            final_kwh=self.center.final_kwh(),
            emitted={node.node_id: node.emitted for node in self.nodes},
            persisted=dict(self.center.node_reading_counts),
            center=self.center,
            coordinator=self.coordinator,
            ticks=self.now_tick,
        )


def run_week(config: ExperimentConfig, policies_active: bool = False,
             log_path: str | Path | None = None,
             mode_label: str | None = None) -> RunResult:
    """Run one full configured duration, optionally persisting the log."""
    if log_path is None:
        sim = Simulation(config, policies_active, log_file=None, mode_label=mode_label)
        result = sim.run()
        return result
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    with open(log_path, "w") as log_file:
        sim = Simulation(config, policies_active, log_file=log_file, mode_label=mode_label)
        result = sim.run()
    result.log_path = log_path
    return result


class LiveRunner:
    """Paces a Simulation against the wall clock for the live gateway.

    speedup is simulated seconds per wall second; the loop batches ticks
    in ~50 ms slices so large speedups stay smooth.
    """

    def __init__(self, sim: Simulation, speedup: float = 1.0):
        if speedup <= 0:
            raise ValueError("speedup must be > 0")
        self.sim = sim
        self.speedup = speedup
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def finished(self) -> bool:
        return self.sim.now_tick >= self.sim.total_ticks

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, name="hems-sim", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def _loop(self) -> None:
        slice_s = 0.05
        ticks_per_slice = max(1, int(round(self.speedup * slice_s / self.sim.tick_seconds)))
        while not self._stop.is_set() and not self.finished:
            started = _time.monotonic()
            for _ in range(ticks_per_slice):
                if self.finished:
                    break
                self.sim.step_tick()
            elapsed = _time.monotonic() - started
            wait = slice_s - elapsed
            if wait > 0:
                self._stop.wait(wait)
