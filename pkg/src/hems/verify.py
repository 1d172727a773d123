"""Built-in acceptance fixtures behind `hems verify`.

Each fixture returns (name, passed, detail). The frozen expected values
are the bench calibration data: the presence-detection truth table, the
four RSSI calibration points, the instrument-comparison standard
deviations, the frame-codec golden vector, and the weekly consumption
comparison the shipped fixture must reproduce.
"""

from __future__ import annotations

from .config import default_config
from .profiles import Mode, run_experiment
from .radio import ChannelModel, loss_probability, rssi_at
from .sensors import PresenceGeometry, calibration_stats, detect_presence

# (distance m, bearing deg) -> detected, for the default geometry
PRESENCE_TRUTH_TABLE = [
    (1, 0, True), (1, 25, True), (1, 50, False),
    (2, 0, True), (2, 25, True), (2, 50, False),
    (3, 0, True), (3, 25, True), (3, 50, False),
    (4, 0, True), (4, 25, True), (4, 50, False),
    (5, 0, True), (5, 25, True), (5, 50, False),
    (6, 0, False), (6, 25, False), (6, 50, False),
]

RSSI_POINTS = [(5.0, -39.0), (10.0, -53.0), (15.0, -69.0), (20.0, -80.0)]

# nine hourly bench temperatures: prototype sensor vs reference instrument
BENCH_TEMPS_SENSOR = [30.57, 31.54, 32.52, 33.50, 34.47, 34.90, 33.01, 31.46, 30.50]
BENCH_TEMPS_REFERENCE = [30.8, 30.9, 33.0, 33.4, 34.2, 34.8, 33.1, 31.6, 30.4]
EXPECTED_STDDEV_SENSOR = 1.60582533
EXPECTED_STDDEV_REFERENCE = 1.591383046

# Weekly totals the shipped fixture reproduces (kWh/week and percents)
BASELINE_KWH = {
    "light_bulb": 1.5,
    "fan": 2.9,
    "computer": 1.07,
    "tv": 28.05,
    "air_conditioning": 273.22,
}
BASELINE_TOTAL_KWH = 306.74
CALIBRATED_TOTAL_KWH = 224.12
CALIBRATED_PERCENTS = {
    "light_bulb": 22,
    "fan": 7,
    "computer": 5,
    "tv": 10,
    "air_conditioning": 29,
}
CALIBRATED_TOTAL_PERCENT = 27

GOLDEN_FRAME_HEX = "5a0100002a000568656c6c6fc195"


def _check_presence() -> tuple[str, bool, str]:
    geom = PresenceGeometry()
    wrong = [
        (d, a) for d, a, expected in PRESENCE_TRUTH_TABLE
        if detect_presence(geom, (float(d), float(a))) != expected
    ]
    if wrong:
        return ("presence truth table", False, f"mismatches at {wrong}")
    return ("presence truth table", True, "18/18 rows")


def _check_rssi() -> tuple[str, bool, str]:
    model = ChannelModel()
    for d, expected in RSSI_POINTS:
        got = rssi_at(model, d)
        if got != expected:
            return ("rssi calibration", False, f"{d} m -> {got} dBm, expected {expected}")
    steps = [x / 10.0 for x in range(0, 151)]
    bad = [d for d in steps if loss_probability(model, d) != 0.0]
    if bad:
        return ("rssi calibration", False, f"nonzero loss at {bad[:3]}...")
    return ("rssi calibration", True,
            "4/4 points exact, loss 0 everywhere at or below 15 m")


def _check_calibration_stats() -> tuple[str, bool, str]:
    stats = calibration_stats(BENCH_TEMPS_SENSOR, BENCH_TEMPS_REFERENCE)
    ok = (abs(stats.stddev_readings - EXPECTED_STDDEV_SENSOR) <= 1e-3
          and abs(stats.stddev_reference - EXPECTED_STDDEV_REFERENCE) <= 1e-3)
    return ("calibration statistics", ok,
            f"stddev {stats.stddev_readings:.4f}/{stats.stddev_reference:.4f} "
            f"expected {EXPECTED_STDDEV_SENSOR:.4f}/{EXPECTED_STDDEV_REFERENCE:.4f}")


def _check_codec() -> tuple[str, bool, str]:
    from .radio import Frame, FrameKind, decode_frame, encode_frame

    frame = Frame(src=1, dst=0, seq=42, kind=FrameKind.READING, payload=b"hello")
    wire = encode_frame(frame)
    if wire.hex() != GOLDEN_FRAME_HEX:
        return ("frame codec golden vector", False,
                f"encoded {wire.hex()}, expected {GOLDEN_FRAME_HEX}")
    if decode_frame(wire) != frame:
        return ("frame codec golden vector", False, "round-trip mismatch")
    return ("frame codec golden vector", True, "encode and decode match the frozen bytes")


def _check_weekly_reproduction() -> list[tuple[str, bool, str]]:
    config = default_config()
    results = []

    offline = run_experiment(config, Mode.OFFLINE)
    bad = []
    for name, expected in BASELINE_KWH.items():
        got = offline.row(name).offline_kwh
        if abs(got - expected) > 0.005 * expected:
            bad.append(f"{name}={got:.4f} (want {expected})")
    total = offline.total_offline_kwh
    if abs(total - BASELINE_TOTAL_KWH) > 0.005 * BASELINE_TOTAL_KWH:
        bad.append(f"total={total:.4f} (want {BASELINE_TOTAL_KWH})")
    results.append(("offline weekly baseline", not bad,
                    ", ".join(bad) if bad else f"total {total:.4f} kWh within 0.5%"))

    online = run_experiment(config, Mode.ONLINE_CALIBRATED)
    bad = []
    got_total = online.total_online_kwh
    if abs(got_total - CALIBRATED_TOTAL_KWH) > 0.005 * CALIBRATED_TOTAL_KWH:
        bad.append(f"online total={got_total:.4f} (want {CALIBRATED_TOTAL_KWH})")
    for name, pct in CALIBRATED_PERCENTS.items():
        shown = online.row(name).reduction_display
        if shown != pct:
            bad.append(f"{name} shows {shown}% (want {pct}%)")
    if online.total_reduction_display != CALIBRATED_TOTAL_PERCENT:
        bad.append(f"total shows {online.total_reduction_display}% (want {CALIBRATED_TOTAL_PERCENT}%)")
    results.append(("calibrated weekly comparison", not bad,
                    ", ".join(bad) if bad else
                    f"online {got_total:.4f} kWh, displayed reduction "
                    f"{online.total_reduction_display}%"))
    return results


def run_verification(quick: bool = False) -> list[tuple[str, bool, str]]:
    results = [
        _check_presence(),
        _check_rssi(),
        _check_calibration_stats(),
        _check_codec(),
    ]
    if not quick:
        results.extend(_check_weekly_reproduction())
    return results
