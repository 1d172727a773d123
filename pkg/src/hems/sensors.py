"""Models of the four sensor-actuator node kinds.

Ground-truth sampling from the simulated home, Gaussian measurement
noise, the presence-detection geometry, the relay actuator, and the
calibration statistics used to compare a sensor series against a
reference instrument.

Reading payload layout inside Frame.payload (big-endian)::

    energy:      kind u8 | current mA u32 | voltage mV u32 | PF*1000 u16
                 | power mW u32 | energy Wh*10 u32
    environment: kind u8 | temperature m degC i32 | humidity*100 u16
                 | luminosity*10 lux u32 | presence u8

kind bytes: 0=energy, 1=temperature/humidity, 2=luminosity, 3=presence.
Command payload: a single action byte (0=off, 1=on).
"""

from __future__ import annotations

import random
import statistics
import struct
from dataclasses import dataclass, field

from .domain import (
    ApplianceSpec,
    ElectricalSample,
    EnvironmentSample,
    NodeKind,
    SwitchAction,
)
from .errors import (
    EmptySeries,
    LengthMismatch,
    OverCurrent,
    Truncated,
    UnknownKind,
    WrongKind,
)

RELAY_RATED_AMPS = 10.0  # electromechanical relay limit, at 125 Vac


@dataclass
class ApplianceState:
    """Live state of one appliance on the bench: switch, draw, meter."""

    spec: ApplianceSpec
    supply_voltage: float
    power_factor: float = 1.0
    load_fraction: float = 1.0
    on: bool = False

    def __post_init__(self):
        if self.supply_voltage <= 0:
            raise ValueError(f"{self.spec.name}: supply voltage must be > 0 V")
        if not 0.0 < self.load_fraction <= 1.0:
            raise ValueError(f"{self.spec.name}: load_fraction must be in (0, 1]")

    @property
    def draw(self) -> float:
        """Instantaneous draw in watts; 0 when switched off."""
        if not self.on:
            return 0.0
        return self.spec.rated_power * self.load_fraction

    @property
    def on_current(self) -> float:
        """Steady-state current in amperes when switched on."""
        return (self.spec.rated_power * self.load_fraction
                / (self.supply_voltage * self.power_factor))


@dataclass(frozen=True)
class PresenceGeometry:
    """Detection region of the infrared presence sensor (strict bounds)."""

    max_distance: float = 6.0  # metres, exclusive
    max_angle: float = 50.0    # degrees off boresight, exclusive

    def __post_init__(self):
        if self.max_distance <= 0 or self.max_angle <= 0:
            raise ValueError("presence geometry bounds must be > 0")


@dataclass
class HomeState:
    """Ground truth of the simulated room: appliances plus ambience.

    occupant is (distance_m, bearing_deg) relative to the presence node,
    or None when nobody is home.
    """

    appliances: dict[str, ApplianceState] = field(default_factory=dict)
    temperature: float = 25.0   # degC
    humidity: float = 50.0      # percent
    luminosity: float = 0.0     # lux
    occupant: tuple[float, float] | None = None
    geometry: PresenceGeometry = field(default_factory=PresenceGeometry)

    def appliance_by_node(self, node: int) -> ApplianceState:
        for state in self.appliances.values():
            if state.spec.node == node:
                return state
        raise KeyError(f"no appliance metered by node {node}")


@dataclass
class NoiseModel:
    """Additive Gaussian measurement noise, one sigma per quantity."""

    current_a: float = 0.05
    voltage_v: float = 0.5
    temperature_c: float = 0.2
    humidity_pct: float = 0.5
    luminosity_lux: float = 4.0
    rng_seed: int = 0
    rng: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("current_a", "voltage_v", "temperature_c", "humidity_pct", "luminosity_lux"):
            if getattr(self, name) < 0:
                raise ValueError(f"noise sigma {name} must be >= 0")
        self.rng = random.Random(self.rng_seed)

    @classmethod
    def silent(cls) -> "NoiseModel":
        """Noise-free model: every sample equals ground truth."""
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)

    def perturb(self, value: float, sigma: float) -> float:
        if sigma == 0.0:
            return value
        return value + self.rng.gauss(0.0, sigma)


@dataclass
class RelayState:
    """The electromechanical relay wired in series with one appliance."""

    node: int
    closed: bool = False
    rated_amps: float = RELAY_RATED_AMPS


def sample_energy(home: HomeState, appliance: ApplianceSpec, supply_voltage: float,
                  noise: NoiseModel, energy_kwh: float = 0.0) -> ElectricalSample:
    """Measure one appliance: the five electrical parameters.

    Ground-truth current is draw / (V * PF); current and voltage get
    measurement noise, and the reported power is computed from the noisy
    pair the way the metering firmware would. The cumulative energy
    counter is carried through unchanged.
    """
    if supply_voltage <= 0:
        raise ValueError(f"supply voltage must be > 0 V, got {supply_voltage}")
    state = home.appliances[appliance.name]
    pf = state.power_factor
    true_current = state.draw / (supply_voltage * pf)
    current = max(0.0, noise.perturb(true_current, noise.current_a))
    voltage = max(0.0, noise.perturb(supply_voltage, noise.voltage_v))
    return ElectricalSample.from_measurements(current, voltage, pf, energy_kwh)


def detect_presence(geom: PresenceGeometry, position: tuple[float, float] | None) -> bool:
    """True iff an occupant is inside the sensor's detection region."""
    if position is None:
        return False
    distance, bearing = position
    return distance < geom.max_distance and abs(bearing) < geom.max_angle


def sample_environment(home: HomeState, kind: NodeKind, noise: NoiseModel) -> EnvironmentSample:
    """Measure what one environmental node kind sees, with noise.

    Quantities the kind does not measure stay at their zero values.

    Raises:
        WrongKind: kind is the energy kind.
    """
    if kind is NodeKind.TEMPERATURE_HUMIDITY:
        humidity = noise.perturb(home.humidity, noise.humidity_pct)
        return EnvironmentSample(
            temperature=noise.perturb(home.temperature, noise.temperature_c),
            humidity=min(100.0, max(0.0, humidity)),
        )
    if kind is NodeKind.LUMINOSITY:
        lux = noise.perturb(home.luminosity, noise.luminosity_lux)
        return EnvironmentSample(luminosity=max(0.0, lux))
    if kind is NodeKind.PRESENCE:
        return EnvironmentSample(presence=detect_presence(home.geometry, home.occupant))
    raise WrongKind(f"{kind.value} is not an environmental node kind")


def actuate(relay: RelayState, command: SwitchAction, home: HomeState) -> HomeState:
    """Apply an ON/OFF command through the relay; returns the home state.

    Mutates home in place. Idempotent: repeating a command is a no-op.

    Raises:
        OverCurrent: switching on would exceed the relay rating; the
            switch state is left untouched.
    """
    state = home.appliance_by_node(relay.node)
    if command is SwitchAction.ON and state.on_current > relay.rated_amps:
        raise OverCurrent(
            f"{state.spec.name} draws {state.on_current:.2f} A at "
            f"{state.supply_voltage:g} V, relay is rated {relay.rated_amps:g} A"
        )
    state.on = command is SwitchAction.ON
    relay.closed = state.on
    return home


@dataclass(frozen=True)
class CalibrationStats:
    stddev_readings: float
    stddev_reference: float
    max_abs_error: float


def calibration_stats(readings: list[float], reference: list[float]) -> CalibrationStats:
    """Sample standard deviation of each series plus max |reading - reference|.

    Raises:
        LengthMismatch: the series differ in length.
        EmptySeries: fewer than two points (sample stddev undefined).
    """
    if len(readings) != len(reference):
        raise LengthMismatch(f"{len(readings)} readings vs {len(reference)} reference values")
    if len(readings) < 2:
        raise EmptySeries("need at least two paired readings")
    return CalibrationStats(
        stddev_readings=statistics.stdev(readings),
        stddev_reference=statistics.stdev(reference),
        max_abs_error=max(abs(a - b) for a, b in zip(readings, reference)),
    )


# -- Reading/command payload codec --------------------------------------------

_KIND_BYTES = {
    NodeKind.ENERGY: 0,
    NodeKind.TEMPERATURE_HUMIDITY: 1,
    NodeKind.LUMINOSITY: 2,
    NodeKind.PRESENCE: 3,
}
_BYTE_KINDS = {v: k for k, v in _KIND_BYTES.items()}

_ENERGY_WIRE = struct.Struct(">BIIHII")
_ENV_WIRE = struct.Struct(">BiHIB")


def encode_reading(kind: NodeKind, sample: ElectricalSample | EnvironmentSample) -> bytes:
    """Pack a sample into the fixed-point wire layout for Frame.payload."""
    if kind is NodeKind.ENERGY:
        assert isinstance(sample, ElectricalSample)
        return _ENERGY_WIRE.pack(
            _KIND_BYTES[kind],
            round(sample.current * 1000),
            round(sample.voltage * 1000),
            round(sample.power_factor * 1000),
            round(sample.power * 1000),
            round(sample.energy_kwh * 10000),
        )
    assert isinstance(sample, EnvironmentSample)
    return _ENV_WIRE.pack(
        _KIND_BYTES[kind],
        round(sample.temperature * 1000),
        round(sample.humidity * 100),
        round(sample.luminosity * 10),
        1 if sample.presence else 0,
    )


def decode_reading(payload: bytes) -> tuple[NodeKind, ElectricalSample | EnvironmentSample]:
    """Unpack a reading payload; inverse of encode_reading up to quantization.

    Power is recomputed from the decoded current, voltage and power factor
    so the consistency invariant survives wire quantization; the wire power
    field is redundancy for external consumers.

    Raises:
        Truncated: payload shorter than its layout.
        UnknownKind: unrecognized kind byte.
    """
    if not payload:
        raise Truncated("empty reading payload")
    kind = _BYTE_KINDS.get(payload[0])
    if kind is None:
        raise UnknownKind(f"reading kind byte 0x{payload[0]:02X}")
    if kind is NodeKind.ENERGY:
        if len(payload) != _ENERGY_WIRE.size:
            raise Truncated(f"energy payload is {len(payload)} bytes, need {_ENERGY_WIRE.size}")
        _, ma, mv, pf1000, _mw, wh10 = _ENERGY_WIRE.unpack(payload)
        return kind, ElectricalSample.from_measurements(
            current=ma / 1000,
            voltage=mv / 1000,
            power_factor=pf1000 / 1000,
            energy_kwh=wh10 / 10000,
        )
    if len(payload) != _ENV_WIRE.size:
        raise Truncated(f"environment payload is {len(payload)} bytes, need {_ENV_WIRE.size}")
    _, mdegc, hum100, lux10, presence = _ENV_WIRE.unpack(payload)
    return kind, EnvironmentSample(
        temperature=mdegc / 1000,
        humidity=hum100 / 100,
        luminosity=lux10 / 10,
        presence=bool(presence),
    )


def encode_command(action: SwitchAction) -> bytes:
    return bytes([1 if action is SwitchAction.ON else 0])


def decode_command(payload: bytes) -> SwitchAction:
    if len(payload) != 1:
        raise Truncated(f"command payload is {len(payload)} bytes, need 1")
    if payload[0] not in (0, 1):
        raise UnknownKind(f"command action byte 0x{payload[0]:02X}")
    return SwitchAction.ON if payload[0] == 1 else SwitchAction.OFF
