"""Deterministic simulator and control plane for a low-cost home energy
management system: simulated sensor-actuator nodes on a modeled star radio
network, a coordinator, a monitoring/control center with automation rules,
an HTTP gateway, and a weekly offline-vs-online consumption experiment."""

__version__ = "0.1.0"

from .domain import (
    ApplianceSpec,
    ElectricalSample,
    EnvironmentSample,
    NodeKind,
    SimTime,
    SwitchAction,
    validate_appliance,
)
from .profiles import (
    ConsumptionReport,
    Mode,
    UsageInterval,
    UsageProfile,
    build_report,
    integrate_energy,
    run_experiment,
    weekly_profile,
)

__all__ = [
    "ApplianceSpec",
    "ElectricalSample",
    "EnvironmentSample",
    "NodeKind",
    "SimTime",
    "SwitchAction",
    "validate_appliance",
    "ConsumptionReport",
    "Mode",
    "UsageInterval",
    "UsageProfile",
    "build_report",
    "integrate_energy",
    "run_experiment",
    "weekly_profile",
    "__version__",
]
