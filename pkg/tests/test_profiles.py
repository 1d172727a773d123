"""Energy accounting: integration, schedules, reports, experiment modes."""

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hems.domain import ApplianceSpec
from hems.errors import ApplianceSetMismatch, NonMonotoneTime
from hems.profiles import (
    ConsumptionReport,
    EnergyMeter,
    Mode,
    UsageInterval,
    UsageProfile,
    build_report,
    display_percent,
    format_clock,
    integrate_energy,
    integrate_energy_exact,
    parse_clock,
    run_experiment,
    weekly_profile,
)


def constant_series(watts, seconds):
    """Samples at 1 Hz holding `watts`, closed by a final boundary sample."""
    return [(t, watts) for t in range(seconds + 1)]


class TestClockParsing:
    @pytest.mark.parametrize("text,expected", [
        ("00:00", 0), ("18:00", 64800), ("20:50", 75000), ("23:06", 83160),
        ("18:37", 67020), ("01:02:03", 3723), ("24:00", 86400),
    ])
    def test_parse(self, text, expected):
        assert parse_clock(text) == expected

    @pytest.mark.parametrize("bad", ["25:00", "12:60", "7", "12:00:61", "x"])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_clock(bad)

    def test_format_round_trip(self):
        assert format_clock(parse_clock("18:37")) == "18:37"
        assert format_clock(parse_clock("01:02:03")) == "01:02:03"


class TestUsageProfile:
    def test_off_must_follow_on(self):
        with pytest.raises(ValueError):
            UsageInterval(0, 3600, 3600)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            UsageProfile("tv", (UsageInterval(0, 0, 7200), UsageInterval(0, 3600, 10800)))

    def test_touching_intervals_allowed(self):
        profile = UsageProfile("tv", (UsageInterval(0, 0, 3600), UsageInterval(0, 3600, 7200)))
        assert profile.total_on_seconds() == 7200

    def test_trim_rounds_to_seconds(self):
        profile = UsageProfile("fan", (UsageInterval(0, 0, 28800),))
        trimmed = profile.trimmed(7.0)
        assert trimmed.intervals[0].duration_s == 26784  # 28800 * 0.93 exactly

    def test_trim_100_percent_empties(self):
        profile = UsageProfile("fan", (UsageInterval(0, 0, 3600),))
        assert profile.trimmed(100.0).intervals == ()

    def test_trim_0_percent_identity(self):
        profile = UsageProfile("fan", (UsageInterval(0, 0, 3600),))
        assert profile.trimmed(0.0).total_on_seconds() == 3600


class TestIntegrateEnergy:
    def test_constant_100w_10h_is_1kwh(self):
        kwh = integrate_energy(constant_series(100.0, 36000))
        assert abs(kwh - 1.0) <= 1e-6

    def test_bulb_hours_give_1500wh(self):
        # 72 W for 75000 s (the weekly on-time of the bulb fixture)
        assert integrate_energy(constant_series(72.0, 75000)) == pytest.approx(1.5, rel=1e-9)

    def test_empty_is_zero(self):
        assert integrate_energy([]) == 0.0

    def test_single_sample_is_zero_width(self):
        assert integrate_energy([(0, 100.0)]) == 0.0

    def test_non_monotone_rejected(self):
        with pytest.raises(NonMonotoneTime):
            integrate_energy([(0, 1.0), (5, 1.0), (5, 2.0)])

    def test_final_sample_closes_window(self):
        # step from 100 W to 0 W at t=10, window ends at t=20
        series = [(0, 100.0), (10, 0.0), (20, 0.0)]
        assert integrate_energy(series) == pytest.approx(1000 / 3.6e6)

    def test_tick_seconds_scale(self):
        series = [(0, 100.0), (1, 100.0)]
        assert integrate_energy(series, tick_seconds=3600.0) == pytest.approx(0.1)

    def test_brute_force_oracle_on_step_series(self):
        # oracle: exact per-tick rational sum of a random on/off pattern
        import random
        rng = random.Random(42)
        watts = [rng.choice([0.0, 72.0, 190.0, 3520.0]) for _ in range(500)]
        series = [(t, w) for t, w in enumerate(watts)] + [(500, 0.0)]
        expected = sum(Fraction(w) for w in watts) / 3_600_000
        assert integrate_energy_exact(series) == expected
        assert integrate_energy(series) == float(expected)


class TestPartitionAdditivity:
    def test_exact_over_every_split_of_the_constant_example(self):
        series = constant_series(100.0, 36000)
        total = integrate_energy_exact(series)
        for split in range(1, 36000, 997):
            left = integrate_energy_exact(series[: split + 1])
            right = integrate_energy_exact(series[split:])
            assert left + right == total

    def test_float_outputs_within_two_ulp(self):
        series = constant_series(100.0, 36000)
        total = integrate_energy(series)
        for split in range(1, 36000, 997):
            both = integrate_energy(series[: split + 1]) + integrate_energy(series[split:])
            assert both == pytest.approx(total, abs=2 * math.ulp(total))

    @settings(max_examples=60)
    @given(
        watts=st.lists(st.floats(0.0, 5000.0, allow_nan=False, allow_infinity=False),
                       min_size=2, max_size=60),
        data=st.data(),
    )
    def test_exact_for_arbitrary_float_series(self, watts, data):
        series = [(t, w) for t, w in enumerate(watts)]
        split = data.draw(st.integers(1, len(series) - 1))
        total = integrate_energy_exact(series)
        left = integrate_energy_exact(series[: split + 1])
        right = integrate_energy_exact(series[split:])
        assert left + right == total


class TestEnergyMeter:
    def test_matches_integrator(self):
        meter = EnergyMeter()
        meter.accrue(100.0, 600)
        meter.accrue(0.0, 600)
        meter.accrue(72.0, 1800)
        series = ([(t, 100.0) for t in range(600)]
                  + [(t, 0.0) for t in range(600, 1200)]
                  + [(t, 72.0) for t in range(1200, 3000)] + [(3000, 0.0)])
        assert meter.kwh_exact == integrate_energy_exact(series)

    def test_monotone_and_exact(self):
        meter = EnergyMeter()
        seen = []
        for _ in range(50):
            meter.accrue(52.0, 60)
            seen.append(meter.kwh)
        assert seen == sorted(seen)
        assert meter.kwh_exact == Fraction(52) * 3000 / 3_600_000

    def test_rejects_negative(self):
        meter = EnergyMeter()
        with pytest.raises(ValueError):
            meter.accrue(-1.0, 10)
        with pytest.raises(ValueError):
            meter.accrue(1.0, -10)


class TestWeeklyProfile:
    def test_fan_weekly_hours(self):
        spec = ApplianceSpec("fan", "Samurai", "Max Air FS", 52.0, node=2)
        usage = UsageProfile("fan", tuple(
            [UsageInterval(d, 43200, 43200 + 28800) for d in range(6)]
            + [UsageInterval(6, 43200, 43200 + 27960)]))
        assert weekly_profile(spec, usage) == pytest.approx(2.9, rel=5e-4)

    def test_ac_weekly_hours(self):
        spec = ApplianceSpec("ac", "Panasonic", "CS-YS12TKV", 3520.0, node=5)
        usage = UsageProfile("ac", tuple(
            [UsageInterval(d, 43200, 43200 + 39960) for d in range(2)]
            + [UsageInterval(d, 43200, 43200 + 39900) for d in range(2, 7)]))
        assert weekly_profile(spec, usage) == pytest.approx(273.22, rel=5e-4)

    def test_zero_intervals(self):
        spec = ApplianceSpec("x", "-", "-", 100.0, node=1)
        assert weekly_profile(spec, UsageProfile("x", ())) == 0.0

    def test_load_fraction_weights(self):
        spec = ApplianceSpec("fridge", "-", "-", 100.0, node=1)
        usage = UsageProfile("fridge", (UsageInterval(0, 0, 36000, load_fraction=0.5),))
        assert weekly_profile(spec, usage) == pytest.approx(0.5)

    def test_agrees_with_1hz_integration(self):
        # cross-check: closed form vs simulated sampling of the schedule
        spec = ApplianceSpec("tv", "-", "-", 190.0, node=4)
        usage = UsageProfile("tv", (UsageInterval(0, 1800, 7200),
                                    UsageInterval(1, 0, 3600)))
        day = 86400
        on = {t for iv in usage.intervals
              for t in range(iv.day * day + iv.on_s, iv.day * day + iv.off_s)}
        series = [(t, 190.0 if t in on else 0.0) for t in range(2 * day)]
        series.append((2 * day, 0.0))
        simulated = integrate_energy(series)
        assert abs(weekly_profile(spec, usage) - simulated) <= 0.005 * simulated


TABLE_OFFLINE = {"light_bulb": 1.5, "fan": 2.9, "computer": 1.07, "tv": 28.05,
                 "air_conditioning": 273.22}
TABLE_ONLINE = {"light_bulb": 1.17, "fan": 2.7, "computer": 1.0165, "tv": 25.245,
                "air_conditioning": 193.98}


class TestBuildReport:
    def test_weekly_comparison_totals(self):
        report = build_report(TABLE_OFFLINE, TABLE_ONLINE)
        assert report.total_offline_kwh == pytest.approx(306.74, abs=1e-9)
        assert report.total_reduction_kwh == pytest.approx(82.6285, abs=1e-9)
        assert report.total_reduction_display == 27

    def test_bulb_row_percent(self):
        report = build_report(TABLE_OFFLINE, TABLE_ONLINE)
        assert report.row("light_bulb").reduction_display == 22

    def test_identical_columns_no_reduction(self):
        report = build_report(TABLE_OFFLINE, dict(TABLE_OFFLINE))
        assert report.total_reduction_kwh == 0.0
        assert all(r.reduction_display == 0 for r in report.rows)

    def test_set_mismatch(self):
        with pytest.raises(ApplianceSetMismatch):
            build_report(TABLE_OFFLINE, {"light_bulb": 1.0})

    def test_total_is_sum_of_rows(self):
        report = build_report(TABLE_OFFLINE, TABLE_ONLINE)
        assert report.total_offline_kwh == pytest.approx(
            sum(r.offline_kwh for r in report.rows), abs=1e-6)
        assert report.total_reduction_kwh == pytest.approx(
            sum(r.reduction_kwh for r in report.rows), abs=1e-6)

    def test_zero_offline_row_displays_zero_percent(self):
        report = build_report({"x": 0.0}, {"x": 0.0})
        assert report.row("x").reduction_percent == 0.0

    @given(k=st.floats(0.1, 40.0, allow_nan=False))
    def test_scaling_power_leaves_percentages_unchanged(self, k):
        base = build_report(TABLE_OFFLINE, TABLE_ONLINE)
        scaled = build_report({n: v * k for n, v in TABLE_OFFLINE.items()},
                              {n: v * k for n, v in TABLE_ONLINE.items()})
        for row, srow in zip(base.rows, scaled.rows):
            assert srow.offline_kwh == pytest.approx(row.offline_kwh * k, rel=1e-12)
            assert srow.reduction_percent == pytest.approx(row.reduction_percent, rel=1e-9)
        assert scaled.total_reduction_percent == pytest.approx(
            base.total_reduction_percent, rel=1e-9)

    def test_table_layout(self):
        table = build_report(TABLE_OFFLINE, TABLE_ONLINE).to_table()
        assert "Percent decrease" in table
        assert "27%" in table.splitlines()[-1]


class TestDisplayRounding:
    @pytest.mark.parametrize("value,expected", [
        (26.94, 27), (26.4999, 26), (26.5, 27), (6.9999, 7), (5.0, 5), (0.4, 0),
        (22.000000000000007, 22),
    ])
    def test_half_up(self, value, expected):
        assert display_percent(value) == expected


class TestRunExperiment:
    def test_offline_mode_reports_no_reduction(self, small_config):
        report = run_experiment(small_config, Mode.OFFLINE)
        assert report.total_reduction_kwh == 0.0
        assert report.mode == "offline"

    def test_emergent_with_no_rules_identical_to_offline(self, small_config):
        from dataclasses import replace

        bare = replace(small_config, rules=())
        offline = run_experiment(bare, Mode.OFFLINE)
        emergent = run_experiment(bare, Mode.ONLINE_EMERGENT)
        for off_row, em_row in zip(offline.rows, emergent.rows):
            assert em_row.online_kwh == off_row.offline_kwh

    def test_calibrated_trims_match_config(self, small_config):
        report = run_experiment(small_config, Mode.ONLINE_CALIBRATED)
        assert report.row("tv").reduction_display == 10
        assert report.row("heater").reduction_display == 20

    def test_emergent_off_only_rules_never_negative(self, small_config):
        report = run_experiment(small_config, Mode.ONLINE_EMERGENT)
        for row in report.rows:
            assert row.reduction_kwh >= -1e-12
        assert report.total_reduction_kwh > 0
