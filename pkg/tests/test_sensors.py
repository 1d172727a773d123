"""Sensor models: presence geometry, metering, noise, relay, statistics."""

import statistics

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hems.domain import ApplianceSpec, ElectricalSample, NodeKind, SwitchAction
from hems.errors import EmptySeries, LengthMismatch, OverCurrent, Truncated, UnknownKind, WrongKind
from hems.sensors import (
    ApplianceState,
    HomeState,
    NoiseModel,
    PresenceGeometry,
    RelayState,
    actuate,
    calibration_stats,
    decode_command,
    decode_reading,
    detect_presence,
    encode_command,
    encode_reading,
    sample_energy,
    sample_environment,
)

# Full detection truth table for the default geometry: rows of
# (distance m, bearing deg, detected).
PRESENCE_TRUTH_TABLE = [
    (1, 0, True), (1, 25, True), (1, 50, False),
    (2, 0, True), (2, 25, True), (2, 50, False),
    (3, 0, True), (3, 25, True), (3, 50, False),
    (4, 0, True), (4, 25, True), (4, 50, False),
    (5, 0, True), (5, 25, True), (5, 50, False),
    (6, 0, False), (6, 25, False), (6, 50, False),
]


def make_home(name="tv", watts=54.0, voltage=127.0, on=True, pf=1.0):
    home = HomeState()
    spec = ApplianceSpec(name, "-", "-", watts, node=1)
    home.appliances[name] = ApplianceState(spec, supply_voltage=voltage,
                                           power_factor=pf, on=on)
    return home, spec


class TestPresence:
    @pytest.mark.parametrize("distance,bearing,expected", PRESENCE_TRUTH_TABLE)
    def test_truth_table(self, distance, bearing, expected):
        geom = PresenceGeometry()
        assert detect_presence(geom, (float(distance), float(bearing))) is expected

    def test_absent_never_detected(self):
        assert detect_presence(PresenceGeometry(), None) is False

    def test_bounds_are_strict(self):
        geom = PresenceGeometry()
        assert detect_presence(geom, (5.999, 49.999)) is True
        assert detect_presence(geom, (6.0, 0.0)) is False
        assert detect_presence(geom, (1.0, 50.0)) is False
        assert detect_presence(geom, (1.0, -50.0)) is False

    def test_negative_bearing_symmetric(self):
        geom = PresenceGeometry()
        assert detect_presence(geom, (3.0, -25.0)) is True


class TestSampleEnergy:
    def test_blender_like_load(self):
        home, spec = make_home("blender", watts=403.86, voltage=127.0)
        s = sample_energy(home, spec, 127.0, NoiseModel.silent())
        assert s.current == pytest.approx(3.18, rel=1e-9)
        assert s.power == pytest.approx(403.86, rel=1e-9)

    def test_tv_current_from_rating(self):
        home, spec = make_home("tv", watts=54.0, voltage=127.0)
        s = sample_energy(home, spec, 127.0, NoiseModel.silent())
        assert s.current == pytest.approx(0.4252, abs=1e-4)

    def test_off_appliance_reads_zero(self):
        home, spec = make_home(on=False)
        s = sample_energy(home, spec, 127.0, NoiseModel.silent())
        assert s.current == 0.0
        assert s.power == 0.0

    def test_energy_counter_passes_through(self):
        home, spec = make_home()
        s = sample_energy(home, spec, 127.0, NoiseModel.silent(), energy_kwh=12.5)
        assert s.energy_kwh == 12.5

    def test_consistency_invariant_under_noise(self):
        home, spec = make_home()
        noise = NoiseModel(rng_seed=4)
        for _ in range(200):
            s = sample_energy(home, spec, 127.0, noise)
            assert s.power == s.voltage * s.current * s.power_factor


class TestSampleEnvironment:
    def test_zero_noise_equals_truth(self):
        home = HomeState(temperature=30.57, humidity=40.0, luminosity=330.0)
        th = sample_environment(home, NodeKind.TEMPERATURE_HUMIDITY, NoiseModel.silent())
        assert (th.temperature, th.humidity) == (30.57, 40.0)
        lux = sample_environment(home, NodeKind.LUMINOSITY, NoiseModel.silent())
        assert lux.luminosity == 330.0

    def test_presence_kind_uses_geometry(self):
        home = HomeState(occupant=(3.0, 25.0))
        assert sample_environment(home, NodeKind.PRESENCE, NoiseModel.silent()).presence
        home.occupant = (6.0, 0.0)
        assert not sample_environment(home, NodeKind.PRESENCE, NoiseModel.silent()).presence

    def test_energy_kind_rejected(self):
        with pytest.raises(WrongKind):
            sample_environment(HomeState(), NodeKind.ENERGY, NoiseModel.silent())

    def test_noise_is_reproducible(self):
        home = HomeState(temperature=30.0, humidity=50.0)

        def series(seed):
            noise = NoiseModel(rng_seed=seed)
            return [sample_environment(home, NodeKind.TEMPERATURE_HUMIDITY, noise).temperature
                    for _ in range(50)]

        assert series(11) == series(11)
        assert series(11) != series(12)

    def test_empirical_sigma_matches_model(self):
        home = HomeState(temperature=30.0)
        noise = NoiseModel(temperature_c=0.2, rng_seed=5)
        samples = [
            sample_environment(home, NodeKind.TEMPERATURE_HUMIDITY, noise).temperature
            for _ in range(100_000)
        ]
        assert statistics.stdev(samples) == pytest.approx(0.2, rel=0.02)

    def test_humidity_clamped_to_range(self):
        home = HomeState(humidity=99.9)
        noise = NoiseModel(humidity_pct=5.0, rng_seed=6)
        for _ in range(500):
            s = sample_environment(home, NodeKind.TEMPERATURE_HUMIDITY, noise)
            assert 0.0 <= s.humidity <= 100.0


class TestActuate:
    def test_switch_on_updates_draw(self):
        home, spec = make_home("tv", watts=54.0, on=False)
        relay = RelayState(node=1)
        actuate(relay, SwitchAction.ON, home)
        assert home.appliances["tv"].draw == 54.0
        assert relay.closed

    def test_switch_off_zeroes_draw(self):
        home, _ = make_home(on=True)
        actuate(RelayState(node=1), SwitchAction.OFF, home)
        assert home.appliances["tv"].draw == 0.0

    def test_overcurrent_load_refused(self):
        # 1680.8 W at 110 V is 15.28 A, above the 10 A relay rating
        home, _ = make_home("washer", watts=1680.8, voltage=110.0, on=False)
        relay = RelayState(node=1)
        with pytest.raises(OverCurrent):
            actuate(relay, SwitchAction.ON, home)
        assert home.appliances["washer"].on is False
        assert relay.closed is False

    def test_overcurrent_load_can_switch_off(self):
        home, _ = make_home("washer", watts=1680.8, voltage=110.0, on=True)
        actuate(RelayState(node=1), SwitchAction.OFF, home)
        assert home.appliances["washer"].on is False

    @pytest.mark.parametrize("command", [SwitchAction.ON, SwitchAction.OFF])
    def test_idempotent(self, command):
        home, _ = make_home(on=False)
        relay = RelayState(node=1)
        actuate(relay, command, home)
        once = home.appliances["tv"].draw
        actuate(relay, command, home)
        assert home.appliances["tv"].draw == once


class TestCalibrationStats:
    SENSOR = [30.57, 31.54, 32.52, 33.50, 34.47, 34.90, 33.01, 31.46, 30.50]
    REFERENCE = [30.8, 30.9, 33.0, 33.4, 34.2, 34.8, 33.1, 31.6, 30.4]

    def test_bench_temperature_stddevs(self):
        stats = calibration_stats(self.SENSOR, self.REFERENCE)
        assert stats.stddev_readings == pytest.approx(1.60582533, abs=1e-3)
        assert stats.stddev_reference == pytest.approx(1.591383046, abs=1e-3)

    def test_stddev_matches_hand_formula(self):
        # independent oracle: explicit sum of squared deviations
        mean = sum(self.SENSOR) / len(self.SENSOR)
        ssd = sum((x - mean) ** 2 for x in self.SENSOR)
        expected = (ssd / (len(self.SENSOR) - 1)) ** 0.5
        stats = calibration_stats(self.SENSOR, self.REFERENCE)
        assert stats.stddev_readings == pytest.approx(expected, rel=1e-12)

    def test_identical_series_zero_error(self):
        stats = calibration_stats(self.SENSOR, list(self.SENSOR))
        assert stats.max_abs_error == 0.0

    def test_max_abs_error(self):
        stats = calibration_stats([1.0, 2.0, 3.0], [1.5, 2.0, 2.0])
        assert stats.max_abs_error == 1.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            calibration_stats([1.0, 2.0], [1.0])

    def test_too_short(self):
        with pytest.raises(EmptySeries):
            calibration_stats([], [])
        with pytest.raises(EmptySeries):
            calibration_stats([1.0], [1.0])


class TestReadingCodec:
    def test_energy_round_trip(self):
        sample = ElectricalSample.from_measurements(3.18, 127.0, 1.0, 28.05)
        kind, decoded = decode_reading(encode_reading(NodeKind.ENERGY, sample))
        assert kind is NodeKind.ENERGY
        assert decoded.current == pytest.approx(3.18, abs=5e-4)
        assert decoded.voltage == pytest.approx(127.0, abs=5e-4)
        assert decoded.energy_kwh == pytest.approx(28.05, abs=5e-5)
        # consistency survives wire quantization exactly
        assert decoded.power == decoded.voltage * decoded.current * decoded.power_factor

    def test_environment_round_trip(self):
        from hems.domain import EnvironmentSample

        sample = EnvironmentSample(temperature=-4.25, humidity=39.9, luminosity=330.0,
                                   presence=True)
        kind, decoded = decode_reading(
            encode_reading(NodeKind.TEMPERATURE_HUMIDITY, sample))
        assert kind is NodeKind.TEMPERATURE_HUMIDITY
        assert decoded.temperature == pytest.approx(-4.25, abs=5e-4)
        assert decoded.humidity == pytest.approx(39.9, abs=5e-3)
        assert decoded.presence is True

    @given(
        current=st.floats(0.0, 20.0),
        voltage=st.floats(0.0, 250.0),
        pf=st.integers(0, 1000),
        kwh=st.floats(0.0, 400.0),
    )
    def test_energy_quantization_bounds(self, current, voltage, pf, kwh):
        sample = ElectricalSample.from_measurements(current, voltage, pf / 1000, kwh)
        _, decoded = decode_reading(encode_reading(NodeKind.ENERGY, sample))
        assert decoded.current == pytest.approx(sample.current, abs=5.01e-4)
        assert decoded.voltage == pytest.approx(sample.voltage, abs=5.01e-4)
        assert decoded.energy_kwh == pytest.approx(sample.energy_kwh, abs=5.01e-5)

    def test_unknown_kind_byte(self):
        with pytest.raises(UnknownKind):
            decode_reading(b"\x07abc")

    def test_truncated(self):
        with pytest.raises(Truncated):
            decode_reading(b"")
        with pytest.raises(Truncated):
            decode_reading(b"\x00\x01\x02")

    def test_command_round_trip(self):
        assert decode_command(encode_command(SwitchAction.ON)) is SwitchAction.ON
        assert decode_command(encode_command(SwitchAction.OFF)) is SwitchAction.OFF

    def test_command_bad_byte(self):
        with pytest.raises(UnknownKind):
            decode_command(b"\x05")
        with pytest.raises(Truncated):
            decode_command(b"")
