import pytest

from hems import config as config_mod

# Lines the acceptance module registers; echoed after the run so the
# per-criterion pass/fail verdicts are visible in normal pytest output.
_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bench_config():
    """The shipped weekly fixture."""
    return config_mod.default_config()


SMALL_CONFIG_YAML = """
name: small-bench
start: "2021-06-21T00:00:00"
tick_seconds: 1
seed: 7
report_interval_s: 60
duration_s: 10800          # three hours
appliances:
  - {name: tv, manufacturer: T, model: X, rated_watts: 100, supply_voltage: 127,
     node: 1, link_distance_m: 5, calibrated_trim_percent: 10}
  - {name: heater, manufacturer: H, model: Y, rated_watts: 500, supply_voltage: 110,
     node: 2, link_distance_m: 5, calibrated_trim_percent: 20}
  - {name: washer, manufacturer: W, model: Z, rated_watts: 1680.8, supply_voltage: 110,
     node: 3, link_distance_m: 5}
environment_nodes:
  - {node: 4, kind: temperature_humidity, link_distance_m: 5}
  - {node: 5, kind: luminosity, link_distance_m: 5}
  - {node: 6, kind: presence, link_distance_m: 5}
environment:
  temperature_hourly: [30, 34.5, 28, 30, 30, 30, 30, 30, 30, 30, 30, 30,
                       30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30]
  humidity_hourly: [40, 40, 40, 40, 40, 40, 40, 40, 40, 40, 40, 40,
                    40, 40, 40, 40, 40, 40, 40, 40, 40, 40, 40, 40]
  luminosity_hourly: [100, 320, 50, 100, 100, 100, 100, 100, 100, 100, 100, 100,
                      100, 100, 100, 100, 100, 100, 100, 100, 100, 100, 100, 100]
  occupancy:
    - {days: [0, 1, 2, 3, 4, 5, 6], start: "00:00", end: "02:00",
       distance_m: 2.0, bearing_deg: 0.0}
usage:
  - appliance: tv
    intervals:
      - {days: [0], on_time: "00:10", off_time: "02:30"}
  - appliance: heater
    intervals:
      - {days: [0], on_time: "01:00", off_time: "02:00"}
rules:
  - {id: tv-away, quantity: presence, op: "==", value: false, for_minutes: 10,
     appliance: tv, action: "off"}
  - {id: heater-cool, quantity: temperature, op: "<", value: 29.0,
     appliance: heater, action: "off"}
"""


@pytest.fixture()
def small_config():
    """Three simulated hours with edges, rules and an overcurrent load."""
    import yaml

    return config_mod.from_dict(yaml.safe_load(SMALL_CONFIG_YAML))
