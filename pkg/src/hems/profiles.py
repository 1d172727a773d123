"""Energy accounting and the weekly offline/online comparison.

kWh integration is sample-and-hold (left rectangle): each sample's power
holds until the next sample's timestamp, and the final sample only closes
the observation window. The accumulation runs in exact rational
arithmetic -- every float is a dyadic rational -- so partition additivity
holds exactly on the exact value; the float kWh returned is its correct
rounding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .domain import ApplianceSpec, SimTime
from .errors import ApplianceSetMismatch, NonMonotoneTime

WS_PER_KWH = 3_600_000

DAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


class Mode(enum.Enum):
    """How the week is simulated."""

    OFFLINE = "offline"
    ONLINE_CALIBRATED = "online-calibrated"
    ONLINE_EMERGENT = "online-emergent"


def display_percent(value: float) -> int:
    """Round a percentage for display, halves up (26.94 -> 27)."""
    return int(math.floor(value + 0.5))


def parse_clock(text: str) -> int:
    """Parse "HH:MM" or "HH:MM:SS" to seconds from midnight."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"expected HH:MM or HH:MM:SS, got {text!r}")
    h, m = int(parts[0]), int(parts[1])
    s = int(parts[2]) if len(parts) == 3 else 0
    if not (0 <= h <= 24 and 0 <= m < 60 and 0 <= s < 60):
        raise ValueError(f"clock value out of range: {text!r}")
    total = h * 3600 + m * 60 + s
    if total > 86400:
        raise ValueError(f"clock value past midnight: {text!r}")
    return total


def format_clock(seconds: int) -> str:
    h, rem = divmod(seconds, 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}" if s else f"{h:02d}:{m:02d}"


@dataclass(frozen=True)
class UsageInterval:
    """One ON period inside one day of the week."""

    day: int       # 0 = Monday .. 6 = Sunday
    on_s: int      # seconds from midnight
    off_s: int
    load_fraction: float = 1.0

    def __post_init__(self):
        if not 0 <= self.day <= 6:
            raise ValueError(f"day must be 0..6, got {self.day}")
        if not 0 <= self.on_s < self.off_s <= 86400:
            raise ValueError(
                f"need 0 <= on < off <= 24h, got {format_clock(self.on_s)}"
                f"..{format_clock(self.off_s)}"
            )
        if not 0.0 < self.load_fraction <= 1.0:
            raise ValueError(f"load_fraction must be in (0, 1], got {self.load_fraction}")

    @property
    def duration_s(self) -> int:
        return self.off_s - self.on_s


@dataclass(frozen=True)
class UsageProfile:
    """Per-appliance weekly ON/OFF schedule driving the simulation."""

    appliance: str
    intervals: tuple[UsageInterval, ...] = ()

    def __post_init__(self):
        by_day: dict[int, list[UsageInterval]] = {}
        for iv in self.intervals:
            by_day.setdefault(iv.day, []).append(iv)
        for day, ivs in by_day.items():
            ivs.sort(key=lambda iv: iv.on_s)
            for a, b in zip(ivs, ivs[1:]):
                if b.on_s < a.off_s:
                    raise ValueError(
                        f"{self.appliance}: overlapping intervals on {DAY_NAMES[day]}"
                    )

    def total_on_seconds(self) -> int:
        return sum(iv.duration_s for iv in self.intervals)

    def weighted_on_seconds(self) -> float:
        return sum(iv.duration_s * iv.load_fraction for iv in self.intervals)

    def trimmed(self, percent: float) -> "UsageProfile":
        """Shorten every interval by percent, cut from the interval's end.

        Durations round to whole seconds; a trim of 100 removes the
        schedule entirely.
        """
        if not 0.0 <= percent <= 100.0:
            raise ValueError(f"trim percent must be in [0, 100], got {percent}")
        keep = (100.0 - percent) / 100.0
        out = []
        for iv in self.intervals:
            kept = round(iv.duration_s * keep)
            if kept > 0:
                out.append(UsageInterval(iv.day, iv.on_s, iv.on_s + kept, iv.load_fraction))
        return UsageProfile(self.appliance, tuple(out))


def _tick_of(stamp) -> int:
    return stamp.ticks if isinstance(stamp, SimTime) else int(stamp)


def integrate_energy_exact(samples, tick_seconds: float = 1.0) -> Fraction:
    """Exact sample-and-hold integral of (tick, watts) samples, in kWh.

    The final sample closes the window and contributes no energy. Exact
    rational arithmetic: partition additivity holds with equality for any
    split at a shared sample.

    Raises:
        NonMonotoneTime: timestamps not strictly increasing.
    """
    ws = Fraction(0)
    tick_s = Fraction(tick_seconds)
    prev_tick: int | None = None
    prev_watts = 0.0
    for stamp, watts in samples:
        tick = _tick_of(stamp)
        if prev_tick is not None:
            if tick <= prev_tick:
                raise NonMonotoneTime(f"tick {tick} after {prev_tick}")
            ws += Fraction(prev_watts) * (tick - prev_tick)
        prev_tick = tick
        prev_watts = watts
    return ws * tick_s / WS_PER_KWH


def integrate_energy(samples, tick_seconds: float = 1.0) -> float:
    """Sample-and-hold energy of a (tick, watts) series, in kWh.

    Correctly rounded float of the exact rational integral; empty input
    integrates to 0.
    """
    return float(integrate_energy_exact(samples, tick_seconds))


class EnergyMeter:
    """Cumulative per-appliance energy counter, exact and monotone.

    Accrues draw over whole ticks; the kWh view is the correctly rounded
    float of the exact rational total.
    """

    def __init__(self, tick_seconds: float = 1.0):
        self._tick_s = Fraction(tick_seconds)
        self._ws = Fraction(0)

    def accrue(self, draw_watts: float, ticks: int) -> None:
        if ticks < 0:
            raise ValueError("cannot accrue negative ticks")
        if draw_watts < 0:
            raise ValueError("draw must be >= 0 W")
        if ticks and draw_watts:
            self._ws += Fraction(draw_watts) * ticks * self._tick_s

    @property
    def kwh_exact(self) -> Fraction:
        return self._ws / WS_PER_KWH

    @property
    def kwh(self) -> float:
        return float(self._ws / WS_PER_KWH)


def weekly_profile(appliance: ApplianceSpec, usage: UsageProfile) -> float:
    """Closed-form kWh/week of a schedule at the appliance's rated power."""
    return appliance.rated_power * usage.weighted_on_seconds() / WS_PER_KWH


@dataclass(frozen=True)
class ReportRow:
    appliance: str
    offline_kwh: float
    online_kwh: float

    @property
    def reduction_kwh(self) -> float:
        return self.offline_kwh - self.online_kwh

    @property
    def reduction_percent(self) -> float:
        if self.offline_kwh == 0:
            return 0.0
        return self.reduction_kwh / self.offline_kwh * 100.0

    @property
    def reduction_display(self) -> int:
        return display_percent(self.reduction_percent)


@dataclass(frozen=True)
class ConsumptionReport:
    """Per-appliance and total weekly kWh, offline vs online."""

    rows: tuple[ReportRow, ...]
    mode: str = Mode.OFFLINE.value
    seed: int | None = None

    @property
    def total_offline_kwh(self) -> float:
        return math.fsum(r.offline_kwh for r in self.rows)

    @property
    def total_online_kwh(self) -> float:
        return math.fsum(r.online_kwh for r in self.rows)

    @property
    def total_reduction_kwh(self) -> float:
        return self.total_offline_kwh - self.total_online_kwh

    @property
    def total_reduction_percent(self) -> float:
        total = self.total_offline_kwh
        if total == 0:
            return 0.0
        return self.total_reduction_kwh / total * 100.0

    @property
    def total_reduction_display(self) -> int:
        return display_percent(self.total_reduction_percent)

    def row(self, appliance: str) -> ReportRow:
        for r in self.rows:
            if r.appliance == appliance:
                return r
        raise KeyError(appliance)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "appliances": [
                {
                    "name": r.appliance,
                    "offline_kwh_week": r.offline_kwh,
                    "online_kwh_week": r.online_kwh,
                    "reduction_kwh": r.reduction_kwh,
                    "reduction_percent": r.reduction_percent,
                    "reduction_percent_display": r.reduction_display,
                }
                for r in self.rows
            ],
            "totals": {
                "offline_kwh_week": self.total_offline_kwh,
                "online_kwh_week": self.total_online_kwh,
                "reduction_kwh": self.total_reduction_kwh,
                "reduction_percent": self.total_reduction_percent,
                "reduction_percent_display": self.total_reduction_display,
            },
        }

    def to_table(self) -> str:
        """Human-readable comparison table, one appliance per column."""
        names = [r.appliance for r in self.rows] + ["Weekly total"]
        lines_values = [
            ("Weekly profile without HEMS kWh/week",
             [f"{r.offline_kwh:.4f}" for r in self.rows] + [f"{self.total_offline_kwh:.4f}"]),
            ("Weekly profile with HEMS kWh/week",
             [f"{r.online_kwh:.4f}" for r in self.rows] + [f"{self.total_online_kwh:.4f}"]),
            ("Consumption reduction in kWh/week",
             [f"{r.reduction_kwh:.4f}" for r in self.rows] + [f"{self.total_reduction_kwh:.4f}"]),
            ("Percent decrease",
             [f"{r.reduction_display}%" for r in self.rows] + [f"{self.total_reduction_display}%"]),
        ]
        label_w = max(len(label) for label, _ in lines_values)
        col_ws = [max(len(n), max(len(vals[i]) for _, vals in lines_values))
                  for i, n in enumerate(names)]
        header = " | ".join(["Comparison".ljust(label_w)]
                            + [n.ljust(w) for n, w in zip(names, col_ws)])
        rule = "-+-".join(["-" * label_w] + ["-" * w for w in col_ws])
        body = [
            " | ".join([label.ljust(label_w)]
                       + [v.ljust(w) for v, w in zip(vals, col_ws)])
            for label, vals in lines_values
        ]
        return "\n".join([header, rule, *body])


def build_report(offline: dict[str, float], online: dict[str, float],
                 mode: str = Mode.OFFLINE.value, seed: int | None = None) -> ConsumptionReport:
    """Assemble the comparison report from per-appliance weekly kWh maps.

    Raises:
        ApplianceSetMismatch: the two maps cover different appliances.
    """
    if set(offline) != set(online):
        missing = set(offline) ^ set(online)
        raise ApplianceSetMismatch(f"appliance sets differ on: {sorted(missing)}")
    rows = tuple(ReportRow(name, offline[name], online[name]) for name in offline)
    return ConsumptionReport(rows=rows, mode=mode, seed=seed)


def run_experiment(config, mode: Mode, seed: int | None = None,
                   log_path=None, offline_log_path=None) -> ConsumptionReport:
    """Simulate one full week and build the offline/online comparison.

    Offline mode records consumption with no policies (both report columns
    carry the baseline). Online-calibrated replays the week with each
    appliance's schedule trimmed by its configured percentage and no
    policies; online-emergent keeps the schedules and lets the automation
    rules act. The per-appliance kWh figures are the final cumulative
    meter readings persisted by the control center.
    """
    from . import engine  # runtime import; engine builds on this module

    if seed is not None:
        config = config.with_seed(seed)
    baseline = engine.run_week(config, policies_active=False,
                               log_path=offline_log_path if mode is not Mode.OFFLINE else log_path,
                               mode_label=Mode.OFFLINE.value)
    offline_kwh = baseline.final_kwh
    if mode is Mode.OFFLINE:
        online_kwh = dict(offline_kwh)
    elif mode is Mode.ONLINE_CALIBRATED:
        trimmed = config.with_trimmed_usage()
        online = engine.run_week(trimmed, policies_active=False, log_path=log_path,
                                 mode_label=mode.value)
        online_kwh = online.final_kwh
    elif mode is Mode.ONLINE_EMERGENT:
        online = engine.run_week(config, policies_active=True, log_path=log_path,
                                 mode_label=mode.value)
        online_kwh = online.final_kwh
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return build_report(offline_kwh, online_kwh, mode=mode.value, seed=config.seed)
