"""Core vocabulary types shared by every other module.

Units are documented conventions enforced by validation: current in
amperes, voltage in volts, power in watts, energy in kWh, temperature in
degrees Celsius, humidity in percent, illuminance in lux, distances in
metres, angles in degrees.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import NodeKindMismatch, NonPositivePower

COORDINATOR_ID = 0

# Relative tolerance for the power = V * I * PF consistency check.
POWER_CONSISTENCY_RTOL = 1e-9


class NodeKind(enum.Enum):
    """The four sensor-actuator node kinds in the network."""

    ENERGY = "energy"
    TEMPERATURE_HUMIDITY = "temperature_humidity"
    LUMINOSITY = "luminosity"
    PRESENCE = "presence"


class SwitchAction(enum.Enum):
    """An ON/OFF control action on an appliance."""

    ON = "on"
    OFF = "off"


ENVIRONMENT_KINDS = (
    NodeKind.TEMPERATURE_HUMIDITY,
    NodeKind.LUMINOSITY,
    NodeKind.PRESENCE,
)


@dataclass(frozen=True)
class NodeId:
    """Identity of a radio node. 0 is reserved for the coordinator."""

    id: int

    def __post_init__(self):
        if not 0 <= self.id <= 255:
            raise ValueError(f"node id must fit one byte, got {self.id}")

    @property
    def is_coordinator(self) -> bool:
        return self.id == COORDINATOR_ID


@dataclass(frozen=True)
class ApplianceSpec:
    """A test-bench appliance and the energy node that meters it."""

    name: str
    manufacturer: str
    model: str
    rated_power: float  # watts
    node: int           # id of the appliance's energy node

    def __post_init__(self):
        if not self.rated_power > 0:
            raise NonPositivePower(f"{self.name}: rated_power must be > 0 W, got {self.rated_power}")


def validate_appliance(spec: ApplianceSpec, node_kind: NodeKind = NodeKind.ENERGY) -> ApplianceSpec:
    """Check an appliance spec against the kind of the node it names.

    Returns the spec unchanged iff all invariants hold. The caller supplies
    the kind of spec.node from its network configuration.

    Raises:
        NonPositivePower: rated power is zero or negative.
        NodeKindMismatch: the attached node is not an energy node.
    """
    if not spec.rated_power > 0:
        raise NonPositivePower(f"{spec.name}: rated_power must be > 0 W, got {spec.rated_power}")
    if node_kind is not NodeKind.ENERGY:
        raise NodeKindMismatch(f"{spec.name}: node {spec.node} is a {node_kind.value} node, not an energy node")
    return spec


@dataclass(frozen=True)
class ElectricalSample:
    """One energy-node measurement: the five electrical parameters.

    power is always derived as voltage * current * power_factor;
    construct with from_measurements() unless you already hold a
    consistent tuple. energy_kwh is the node's cumulative counter.
    """

    current: float        # A
    voltage: float        # V
    power_factor: float   # dimensionless, [0, 1]
    power: float          # W
    energy_kwh: float     # cumulative kWh

    def __post_init__(self):
        if self.current < 0:
            raise ValueError(f"current must be >= 0 A, got {self.current}")
        if self.voltage < 0:
            raise ValueError(f"voltage must be >= 0 V, got {self.voltage}")
        if not 0.0 <= self.power_factor <= 1.0:
            raise ValueError(f"power factor must be in [0, 1], got {self.power_factor}")
        if self.power < 0:
            raise ValueError(f"power must be >= 0 W, got {self.power}")
        if self.energy_kwh < 0:
            raise ValueError(f"energy must be >= 0 kWh, got {self.energy_kwh}")
        expected = self.voltage * self.current * self.power_factor
        if abs(self.power - expected) > POWER_CONSISTENCY_RTOL * max(abs(expected), 1e-30):
            raise ValueError(
                f"power {self.power} W inconsistent with V*I*PF = {expected} W"
            )

    @classmethod
    def from_measurements(cls, current: float, voltage: float, power_factor: float,
                          energy_kwh: float) -> "ElectricalSample":
        """Build a sample with power derived from the other quantities."""
        return cls(
            current=current,
            voltage=voltage,
            power_factor=power_factor,
            power=voltage * current * power_factor,
            energy_kwh=energy_kwh,
        )


@dataclass(frozen=True)
class EnvironmentSample:
    """One environment-node measurement.

    A node of a given kind only measures a subset of these quantities;
    the others are left at their zero values.
    """

    temperature: float = 0.0   # degC
    humidity: float = 0.0      # percent, [0, 100]
    luminosity: float = 0.0    # lux
    presence: bool = False

    def __post_init__(self):
        if not 0.0 <= self.humidity <= 100.0:
            raise ValueError(f"humidity must be in [0, 100] %, got {self.humidity}")
        if self.luminosity < 0:
            raise ValueError(f"luminosity must be >= 0 lux, got {self.luminosity}")


@dataclass(frozen=True, order=True)
class SimTime:
    """Virtual clock instant: tick count plus the configured tick length."""

    ticks: int
    tick_seconds: float = field(default=1.0, compare=False)

    @property
    def seconds(self) -> float:
        return self.ticks * self.tick_seconds
