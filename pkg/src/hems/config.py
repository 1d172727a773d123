"""Experiment configuration: schema, validation, YAML loading.

A config declares the bench appliances (with supply voltage and radio
link), the three environment nodes, the ambient traces, per-appliance
weekly usage, automation rules, and the channel/noise/seed knobs. The
shipped default lives in data/default_config.yaml.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime
from importlib import resources
from pathlib import Path

import yaml

from .center import PolicyRule, RuleMode
from .domain import ApplianceSpec, NodeKind, SwitchAction, validate_appliance
from .errors import ConfigError
from .profiles import UsageInterval, UsageProfile, parse_clock
from .radio import DEFAULT_CALIBRATION, DEFAULT_LOSS_FULL_M, DEFAULT_LOSS_ONSET_M

DEFAULT_EPOCH = datetime(2021, 6, 21)  # Monday


@dataclass(frozen=True)
class ApplianceSetup:
    """One bench appliance plus everything the simulator needs to run it."""

    spec: ApplianceSpec
    supply_voltage: float
    power_factor: float = 1.0
    load_fraction: float = 1.0
    link_distance_m: float = 5.0
    elevation_bonus: bool = False
    calibrated_trim_percent: float = 0.0


@dataclass(frozen=True)
class EnvironmentNode:
    node: int
    kind: NodeKind
    link_distance_m: float = 5.0
    elevation_bonus: bool = False


@dataclass(frozen=True)
class OccupancyInterval:
    days: tuple[int, ...]
    start_s: int
    end_s: int
    distance_m: float = 2.0
    bearing_deg: float = 0.0


@dataclass(frozen=True)
class EnvironmentTraces:
    """Hour-held diurnal traces plus the occupant's schedule."""

    temperature_hourly: tuple[float, ...]
    humidity_hourly: tuple[float, ...]
    luminosity_hourly: tuple[float, ...]
    occupancy: tuple[OccupancyInterval, ...] = ()

    def position_at(self, day: int, second_of_day: int) -> tuple[float, float] | None:
        for iv in self.occupancy:
            if day in iv.days and iv.start_s <= second_of_day < iv.end_s:
                return (iv.distance_m, iv.bearing_deg)
        return None

    def ambient_at(self, second_of_day: int) -> tuple[float, float, float]:
        hour = (second_of_day // 3600) % 24
        return (self.temperature_hourly[hour], self.humidity_hourly[hour],
                self.luminosity_hourly[hour])


@dataclass(frozen=True)
class ChannelConfig:
    calibration: tuple = DEFAULT_CALIBRATION
    loss_onset_m: float = DEFAULT_LOSS_ONSET_M
    loss_full_m: float = DEFAULT_LOSS_FULL_M


@dataclass(frozen=True)
class NoiseConfig:
    current_a: float = 0.0
    voltage_v: float = 0.0
    temperature_c: float = 0.0
    humidity_pct: float = 0.0
    luminosity_lux: float = 0.0


@dataclass(frozen=True)
class GatewayConfig:
    read_token: str = "hems-read"
    control_token: str = "hems-control"


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    appliances: tuple[ApplianceSetup, ...]
    environment_nodes: tuple[EnvironmentNode, ...]
    environment: EnvironmentTraces
    usage: tuple[UsageProfile, ...]
    rules: tuple[PolicyRule, ...] = ()
    seed: int = 1
    tick_seconds: float = 1.0
    report_interval_s: int = 60
    duration_s: int = 7 * 86400
    epoch: datetime = DEFAULT_EPOCH
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    command_retries: int = 0

    def appliance(self, name: str) -> ApplianceSetup:
        for setup in self.appliances:
            if setup.spec.name == name:
                return setup
        raise KeyError(name)

    def usage_for(self, name: str) -> UsageProfile:
        for profile in self.usage:
            if profile.appliance == name:
                return profile
        return UsageProfile(name, ())

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)

    def with_trimmed_usage(self) -> "ExperimentConfig":
        """The calibrated-online variant: per-appliance schedule trims."""
        trimmed = tuple(
            self.usage_for(setup.spec.name).trimmed(setup.calibrated_trim_percent)
            for setup in self.appliances
        )
        return replace(self, usage=trimmed)

    def node_kinds(self) -> dict[int, NodeKind]:
        kinds = {setup.spec.node: NodeKind.ENERGY for setup in self.appliances}
        kinds.update({n.node: n.kind for n in self.environment_nodes})
        return kinds

    def appliance_nodes(self) -> dict[str, int]:
        return {setup.spec.name: setup.spec.node for setup in self.appliances}


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ConfigError(f"{where}.{key}", "missing required field")
    return data[key]


def _days_list(raw, where: str) -> tuple[int, ...]:
    days = tuple(raw)
    for d in days:
        if not isinstance(d, int) or not 0 <= d <= 6:
            raise ConfigError(where, f"day must be 0..6, got {d!r}")
    return days


def _parse_appliance(idx: int, data: dict) -> ApplianceSetup:
    where = f"appliances[{idx}]"
    name = _require(data, "name", where)
    try:
        spec = ApplianceSpec(
            name=name,
            manufacturer=data.get("manufacturer", ""),
            model=data.get("model", ""),
            rated_power=float(_require(data, "rated_watts", where)),
            node=int(_require(data, "node", where)),
        )
        return ApplianceSetup(
            spec=spec,
            supply_voltage=float(_require(data, "supply_voltage", where)),
            power_factor=float(data.get("power_factor", 1.0)),
            load_fraction=float(data.get("load_fraction", 1.0)),
            link_distance_m=float(data.get("link_distance_m", 5.0)),
            elevation_bonus=bool(data.get("elevation_bonus", False)),
            calibrated_trim_percent=float(data.get("calibrated_trim_percent", 0.0)),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(where, str(exc)) from exc


def _parse_usage(idx: int, data: dict, appliance_names: set[str]) -> UsageProfile:
    where = f"usage[{idx}]"
    name = _require(data, "appliance", where)
    if name not in appliance_names:
        raise ConfigError(f"{where}.appliance", f"unknown appliance {name!r}")
    intervals = []
    for j, iv in enumerate(data.get("intervals", [])):
        ivwhere = f"{where}.intervals[{j}]"
        try:
            days = _days_list(_require(iv, "days", ivwhere), f"{ivwhere}.days")
            on_s = parse_clock(str(_require(iv, "on_time", ivwhere)))
            off_s = parse_clock(str(_require(iv, "off_time", ivwhere)))
            fraction = float(iv.get("load_fraction", 1.0))
            for day in days:
                intervals.append(UsageInterval(day, on_s, off_s, fraction))
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(ivwhere, str(exc)) from exc
    try:
        return UsageProfile(name, tuple(intervals))
    except Exception as exc:
        raise ConfigError(where, str(exc)) from exc


def _parse_rule(idx: int, data: dict, appliance_names: set[str]) -> PolicyRule:
    where = f"rules[{idx}]"
    target = _require(data, "appliance", where)
    if target not in appliance_names:
        raise ConfigError(f"{where}.appliance", f"unknown appliance {target!r}")
    source = data.get("source_appliance")
    if source is not None and source not in appliance_names:
        raise ConfigError(f"{where}.source_appliance", f"unknown appliance {source!r}")
    window = None
    if data.get("window"):
        try:
            start_text, end_text = str(data["window"]).split("-")
            window = (parse_clock(start_text), parse_clock(end_text))
        except Exception as exc:
            raise ConfigError(f"{where}.window", str(exc)) from exc
    action_raw = _require(data, "action", where)
    if isinstance(action_raw, bool):  # YAML 1.1 reads bare on/off as booleans
        action_raw = "on" if action_raw else "off"
    try:
        action = SwitchAction(action_raw)
        return PolicyRule(
            id=str(_require(data, "id", where)),
            quantity=str(_require(data, "quantity", where)),
            op=str(_require(data, "op", where)),
            value=data["value"] if "value" in data else _require(data, "value", where),
            appliance=target,
            action=action,
            mode=str(data.get("mode", RuleMode.AUTOMATIC)),
            for_minutes=float(data.get("for_minutes", 0.0)),
            window=window,
            clear_value=data.get("clear_value"),
            source_appliance=source,
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(where, str(exc)) from exc


def _parse_hourly(env: dict, key: str) -> tuple[float, ...]:
    where = f"environment.{key}"
    values = _require(env, key, "environment")
    if len(values) != 24:
        raise ConfigError(where, f"need 24 hourly values, got {len(values)}")
    return tuple(float(v) for v in values)


def from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config from parsed YAML/JSON.

    Raises:
        ConfigError: naming the offending field.
    """
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")

    appliances = tuple(
        _parse_appliance(i, item) for i, item in enumerate(_require(data, "appliances", "<root>"))
    )
    if not appliances:
        raise ConfigError("appliances", "need at least one appliance")
    names = [a.spec.name for a in appliances]
    if len(set(names)) != len(names):
        raise ConfigError("appliances", f"duplicate appliance names in {names}")
    nodes = [a.spec.node for a in appliances]
    if len(set(nodes)) != len(nodes):
        raise ConfigError("appliances", f"duplicate node ids in {nodes}")
    if 0 in nodes:
        raise ConfigError("appliances", "node 0 is reserved for the coordinator")

    env_nodes = []
    for i, item in enumerate(data.get("environment_nodes", [])):
        where = f"environment_nodes[{i}]"
        try:
            kind = NodeKind(_require(item, "kind", where))
        except ValueError as exc:
            raise ConfigError(f"{where}.kind", str(exc)) from exc
        if kind is NodeKind.ENERGY:
            raise ConfigError(f"{where}.kind", "environment nodes cannot be energy nodes")
        node = int(_require(item, "node", where))
        if node in nodes or node == 0:
            raise ConfigError(f"{where}.node", f"node id {node} already taken")
        env_nodes.append(EnvironmentNode(
            node=node, kind=kind,
            link_distance_m=float(item.get("link_distance_m", 5.0)),
            elevation_bonus=bool(item.get("elevation_bonus", False)),
        ))

    node_kind_map = {a.spec.node: NodeKind.ENERGY for a in appliances}
    node_kind_map.update({n.node: n.kind for n in env_nodes})
    for setup in appliances:
        try:
            validate_appliance(setup.spec, node_kind_map[setup.spec.node])
        except Exception as exc:
            raise ConfigError(f"appliances.{setup.spec.name}", str(exc)) from exc

    env_raw = _require(data, "environment", "<root>")
    occupancy = []
    for i, item in enumerate(env_raw.get("occupancy", [])):
        where = f"environment.occupancy[{i}]"
        try:
            occupancy.append(OccupancyInterval(
                days=_days_list(_require(item, "days", where), f"{where}.days"),
                start_s=parse_clock(str(_require(item, "start", where))),
                end_s=parse_clock(str(_require(item, "end", where))),
                distance_m=float(item.get("distance_m", 2.0)),
                bearing_deg=float(item.get("bearing_deg", 0.0)),
            ))
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(where, str(exc)) from exc
    environment = EnvironmentTraces(
        temperature_hourly=_parse_hourly(env_raw, "temperature_hourly"),
        humidity_hourly=_parse_hourly(env_raw, "humidity_hourly"),
        luminosity_hourly=_parse_hourly(env_raw, "luminosity_hourly"),
        occupancy=tuple(occupancy),
    )

    name_set = set(names)
    usage = tuple(_parse_usage(i, item, name_set)
                  for i, item in enumerate(data.get("usage", [])))
    usage_names = [u.appliance for u in usage]
    if len(set(usage_names)) != len(usage_names):
        raise ConfigError("usage", f"duplicate usage profiles in {usage_names}")

    rules = tuple(_parse_rule(i, item, name_set)
                  for i, item in enumerate(data.get("rules", [])))
    rule_ids = [r.id for r in rules]
    if len(set(rule_ids)) != len(rule_ids):
        raise ConfigError("rules", f"duplicate rule ids in {rule_ids}")

    channel_raw = data.get("channel", {})
    try:
        channel = ChannelConfig(
            calibration=tuple(tuple(p) for p in channel_raw.get("calibration", DEFAULT_CALIBRATION)),
            loss_onset_m=float(channel_raw.get("loss_onset_m", DEFAULT_LOSS_ONSET_M)),
            loss_full_m=float(channel_raw.get("loss_full_m", DEFAULT_LOSS_FULL_M)),
        )
    except Exception as exc:
        raise ConfigError("channel", str(exc)) from exc

    noise_raw = data.get("noise", {})
    noise = NoiseConfig(
        current_a=float(noise_raw.get("current_a", 0.0)),
        voltage_v=float(noise_raw.get("voltage_v", 0.0)),
        temperature_c=float(noise_raw.get("temperature_c", 0.0)),
        humidity_pct=float(noise_raw.get("humidity_pct", 0.0)),
        luminosity_lux=float(noise_raw.get("luminosity_lux", 0.0)),
    )

    gateway_raw = data.get("gateway", {})
    gateway = GatewayConfig(
        read_token=str(gateway_raw.get("read_token", "hems-read")),
        control_token=str(gateway_raw.get("control_token", "hems-control")),
    )

    epoch_raw = data.get("start")
    try:
        epoch = datetime.fromisoformat(epoch_raw) if epoch_raw else DEFAULT_EPOCH
    except ValueError as exc:
        raise ConfigError("start", str(exc)) from exc

    tick_seconds = float(data.get("tick_seconds", 1.0))
    if tick_seconds <= 0:
        raise ConfigError("tick_seconds", "must be > 0")
    report_interval_s = int(data.get("report_interval_s", 60))
    if report_interval_s <= 0:
        raise ConfigError("report_interval_s", "must be > 0")
    duration_s = int(data.get("duration_s", 7 * 86400))
    if duration_s <= 0:
        raise ConfigError("duration_s", "must be > 0")

    return ExperimentConfig(
        name=str(data.get("name", "experiment")),
        appliances=appliances,
        environment_nodes=tuple(env_nodes),
        environment=environment,
        usage=usage,
        rules=rules,
        seed=int(data.get("seed", 1)),
        tick_seconds=tick_seconds,
        report_interval_s=report_interval_s,
        duration_s=duration_s,
        epoch=epoch,
        channel=channel,
        noise=noise,
        gateway=gateway,
        command_retries=int(data.get("command_retries", 0)),
    )


def load(path: str | Path) -> ExperimentConfig:
    """Load a YAML config file.

    Raises:
        ConfigError: unreadable file or invalid contents.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<config>", f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<config>", f"invalid YAML in {path}: {exc}") from exc
    return from_dict(data)


def default_config() -> ExperimentConfig:
    """The shipped bench fixture (packaged data file)."""
    text = resources.files("hems").joinpath("data/default_config.yaml").read_text()
    return from_dict(yaml.safe_load(text))


def default_config_path() -> Path:
    return Path(str(resources.files("hems").joinpath("data/default_config.yaml")))
