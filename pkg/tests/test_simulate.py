"""Simulator tests: determinism, schedule semantics, and noise calibration.

Noise oracle: for zero-mean Gaussian error, mean |relative error| is
sigma * sqrt(2/pi), so sigma = target_mean_abs / sqrt(2/pi). Expected sigmas
below were computed from that formula by hand and cross-checked by Monte
Carlo inside the tests.
"""

import json
import math

import numpy as np
import pytest

from emedge.appliances import ApplianceSpec
from emedge.errors import ConfigurationError
from emedge.micromoment import extract_series
from emedge.simulate import (
    ApplianceSchedule,
    EnvironmentProfile,
    NoiseModel,
    OccupancyRule,
    SimConfig,
    calibrate_noise,
    generate,
    write_csv,
    write_events,
)

LIGHT = ApplianceSpec(
    id="light1", name="Light", zone_id="room", dacr_max_w=60, dspc_w=0, dot_s=28800,
    requires_presence=True,
)
AC = ApplianceSpec(
    id="ac1", name="Air conditioner", zone_id="room", dacr_max_w=1000, dspc_w=4,
    dot_s=55800, dacr_min_w=100, requires_presence=True,
)

ALWAYS_HOME = OccupancyRule(zone="room", hourly=(1.0,) * 24)


def light_config(seed=7, duration=86400, interval=60, noise=NoiseModel(), jitter=0.0):
    return SimConfig(
        seed=seed,
        duration_s=duration,
        sample_interval_s=interval,
        appliances=(
            ApplianceSchedule(spec=LIGHT, on_windows=((18 * 3600, 22 * 3600),)),
        ),
        occupancy=(ALWAYS_HOME,),
        environment=(EnvironmentProfile(zone="room"),),
        noise=noise,
        duty_jitter=jitter,
    )


class TestGenerate:
    def test_scheduled_window_uses_dacr_max(self):
        trace = generate(light_config())
        sod = trace.timestamps % 86400
        in_window = (sod >= 18 * 3600) & (sod < 22 * 3600)
        tw = trace.appliances["light1"].true_w
        assert np.all(tw[in_window] == 60.0)
        assert np.all(tw[~in_window] == 0.0)

    def test_zero_duration_rejected(self):
        with pytest.raises(ConfigurationError, match="duration"):
            generate(light_config(duration=0))

    def test_fixed_seed_is_bit_identical(self):
        a = generate(light_config(seed=7))
        b = generate(light_config(seed=7))
        assert np.array_equal(a.timestamps, b.timestamps)
        for aid in a.appliances:
            assert np.array_equal(a.appliances[aid].true_w, b.appliances[aid].true_w)
            assert np.array_equal(a.appliances[aid].measured_w, b.appliances[aid].measured_w)
            assert np.array_equal(a.appliances[aid].labels, b.appliances[aid].labels)
        for zone in a.occupancy:
            assert np.array_equal(a.occupancy[zone], b.occupancy[zone])
        for zone in a.environment:
            for k in a.environment[zone]:
                assert np.array_equal(a.environment[zone][k], b.environment[zone][k])

    def test_different_seeds_differ(self):
        noisy = NoiseModel(relative_sigma=0.02)
        a = generate(light_config(seed=1, noise=noisy))
        b = generate(light_config(seed=2, noise=noisy))
        assert not np.array_equal(
            a.appliances["light1"].measured_w, b.appliances["light1"].measured_w
        )

    def test_noise_free_measured_equals_true(self):
        trace = generate(light_config())
        at = trace.appliances["light1"]
        assert np.array_equal(at.true_w, at.measured_w)

    def test_labels_match_rule_engine_on_true_series(self):
        trace = generate(light_config(jitter=0.1, noise=NoiseModel(relative_sigma=0.02)))
        at = trace.appliances["light1"]
        expected = extract_series(
            at.spec, trace.timestamps, at.true_w, trace.occupancy["room"]
        )
        assert np.array_equal(at.labels, expected)

    def test_duplicate_appliance_ids_rejected(self):
        cfg = SimConfig(
            seed=1,
            duration_s=3600,
            appliances=(
                ApplianceSchedule(spec=LIGHT),
                ApplianceSchedule(spec=LIGHT),
            ),
            occupancy=(ALWAYS_HOME,),
        )
        with pytest.raises(ConfigurationError, match="distinct"):
            generate(cfg)

    def test_zone_without_occupancy_rule_rejected(self):
        cfg = SimConfig(
            seed=1,
            duration_s=3600,
            appliances=(ApplianceSchedule(spec=LIGHT),),
            occupancy=(OccupancyRule(zone="elsewhere", hourly=(1.0,) * 24),),
        )
        with pytest.raises(ConfigurationError, match="occupancy"):
            generate(cfg)

    def test_occupancy_probability_validated(self):
        with pytest.raises(ConfigurationError, match=r"\[0,1\]"):
            OccupancyRule(zone="room", hourly=(1.5,) * 24)

    def test_jitter_spreads_on_power(self):
        trace = generate(light_config(jitter=0.1))
        tw = trace.appliances["light1"].true_w
        on = tw > 30
        assert on.any()
        assert tw[on].min() >= 60 * 0.9 - 1e-9
        assert tw[on].max() <= 60 * 1.1 + 1e-9
        assert np.unique(tw[on]).size > 10

    def test_environment_shapes(self):
        trace = generate(light_config())
        env = trace.environment["room"]
        assert env["temp_c"].min() >= 19.99 and env["temp_c"].max() <= 26.01
        night = (trace.timestamps % 86400) < 5 * 3600
        assert np.all(env["lux"][night] == 0.0)
        assert env["lux"].max() > 0
        assert np.all((env["humidity_pct"] >= 0) & (env["humidity_pct"] <= 100))


class TestNoiseCalibration:
    def test_sigma_formula(self):
        nm = calibrate_noise(98.16)
        assert nm.relative_sigma == pytest.approx(0.0184 / math.sqrt(2 / math.pi), abs=1e-12)
        assert nm.relative_sigma == pytest.approx(0.02306, abs=1e-4)

    def test_sigma_for_9688(self):
        nm = calibrate_noise(96.88)
        assert nm.relative_sigma == pytest.approx(0.03911, abs=1e-4)

    @pytest.mark.parametrize("bad", [100.0, 50.0, 0.0, 101.0, -3.0])
    def test_out_of_range_target_rejected(self, bad):
        with pytest.raises(ConfigurationError):
            calibrate_noise(bad)

    def test_monte_carlo_mean_abs_error(self):
        # >= 1e5 always-on samples; empirical mean |rel err| within 0.1 pt.
        spec = ApplianceSpec(
            id="heater", name="Heater", zone_id="room", dacr_max_w=2000,
            dspc_w=5, dot_s=10**9, requires_presence=False,
        )
        cfg = SimConfig(
            seed=11,
            duration_s=100_000 * 60,
            sample_interval_s=60,
            appliances=(ApplianceSchedule(spec=spec, on_windows=((0, 86400),)),),
            occupancy=(ALWAYS_HOME,),
            noise=calibrate_noise(98.16),
        )
        trace = generate(cfg)
        at = trace.appliances["heater"]
        rel = np.abs(at.measured_w - at.true_w) / at.true_w
        assert at.true_w.size >= 100_000
        assert abs(rel.mean() - 0.0184) < 0.001


class TestTraceFiles:
    def test_csv_files_and_manifest(self, tmp_path):
        trace = generate(light_config(duration=7200))
        files = write_csv(trace, tmp_path)
        names = {f.name for f in files}
        assert {"power_light1.csv", "labels_light1.csv", "occupancy_room.csv",
                "env_room.csv", "manifest.json"} <= names
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["samples"] == trace.sample_count
        assert manifest["appliances"][0]["id"] == "light1"
        header = (tmp_path / "power_light1.csv").read_text().splitlines()[0]
        assert header == "ts,true_w,measured_w"

    def test_csv_bytes_identical_across_runs(self, tmp_path):
        for d in ("a", "b"):
            write_csv(generate(light_config(seed=7, noise=NoiseModel(0.02))), tmp_path / d)
        for f in sorted((tmp_path / "a").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name

    def test_event_stream_count_and_order(self, tmp_path):
        trace = generate(light_config(duration=3600))
        path = tmp_path / "events.jsonl"
        count = write_events(trace, path, site="qu")
        lines = path.read_text().splitlines()
        assert len(lines) == count
        # one power + one occupancy + one env event per sample
        assert count == trace.sample_count * 3
        prev_ts = -1
        for line in lines:
            ev = json.loads(line)
            assert ev["ts"] >= prev_ts
            prev_ts = ev["ts"]
        # context events precede power within one timestamp
        first_three = [json.loads(l)["topic"] for l in lines[:3]]
        assert first_three[0].endswith("/occupancy")
        assert first_three[1].endswith("/env")
        assert first_three[2].endswith("/power")
