"""Deterministic household telemetry simulator.

Produces labeled synthetic traces: per-appliance true and measured power,
per-zone occupancy and environment series, all on one sample grid, plus
ground-truth micro-moment labels computed from the true series. Measured
power carries a multiplicative Gaussian error modeling smart-plug
inaccuracy; ground-truth labels never see that noise.

Everything is a pure function of the config: the same seed yields
bit-identical traces.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .appliances import ApplianceSpec
from .errors import ConfigurationError
from .micromoment import run_series

# Monday 2023-11-13 00:00:00 UTC; keeps default traces week-aligned.
DEFAULT_START_TS = 1699833600


@dataclass(frozen=True)
class NoiseModel:
    """Multiplicative Gaussian error on measured watts.

    relative_sigma is the standard deviation of the per-sample relative
    error; 0 disables noise entirely.
    """

    relative_sigma: float = 0.0

    def __post_init__(self):
        if not 0 <= self.relative_sigma < 0.5:
            raise ConfigurationError(
                f"noise.relative_sigma must be in [0, 0.5), got {self.relative_sigma}"
            )

    @property
    def expected_abs_relative_error(self) -> float:
        # mean |e| of a zero-mean Gaussian is sigma * sqrt(2/pi)
        return self.relative_sigma * math.sqrt(2.0 / math.pi)


def calibrate_noise(target_accuracy: float) -> NoiseModel:
    """Pick relative_sigma so mean |relative error| = (100 - accuracy) / 100.

    target_accuracy is a percentage strictly between 50 and 100; 100 is
    excluded (disable noise instead of calibrating a zero sigma).
    """
    if not 50 < target_accuracy < 100:
        raise ConfigurationError(
            f"target_accuracy must be in (50, 100) percent, got {target_accuracy}"
        )
    mean_abs = (100.0 - target_accuracy) / 100.0
    return NoiseModel(relative_sigma=mean_abs / math.sqrt(2.0 / math.pi))


@dataclass(frozen=True)
class ApplianceSchedule:
    """Daily ON windows for one appliance, as (start, end) seconds-of-day.

    When on, true power is dacr_max_w (optionally jittered); when off it is
    the standby draw dspc_w.
    """

    spec: ApplianceSpec
    on_windows: tuple[tuple[int, int], ...] = ()

    def is_on(self, second_of_day: int) -> bool:
        return any(a <= second_of_day < b for a, b in self.on_windows)


@dataclass(frozen=True)
class OccupancyRule:
    """Hourly presence probabilities for one zone.

    hourly has 24 entries; weekend_hourly falls back to hourly when None.
    Presence is drawn once per zone-hour and held for the hour.
    """

    zone: str
    hourly: tuple[float, ...]
    weekend_hourly: tuple[float, ...] | None = None

    def __post_init__(self):
        for profile, name in ((self.hourly, "hourly"), (self.weekend_hourly, "weekend_hourly")):
            if profile is None:
                continue
            if len(profile) != 24:
                raise ConfigurationError(f"occupancy {self.zone}.{name} needs 24 entries")
            if any(not 0 <= p <= 1 for p in profile):
                raise ConfigurationError(f"occupancy {self.zone}.{name} probabilities must be in [0,1]")

    def profile_for(self, weekday: int) -> tuple[float, ...]:
        if weekday >= 5 and self.weekend_hourly is not None:
            return self.weekend_hourly
        return self.hourly


def default_home_profile() -> OccupancyRule:
    """Arbitrary default: home 18:00-08:00 on weekdays, home all weekend."""
    hourly = tuple(1.0 if (h >= 18 or h < 8) else 0.0 for h in range(24))
    return OccupancyRule(zone="home", hourly=hourly, weekend_hourly=(1.0,) * 24)


@dataclass(frozen=True)
class EnvironmentProfile:
    """Sinusoidal daily temperature, clipped-sinusoid lux, steady humidity."""

    zone: str
    temp_min_c: float = 20.0
    temp_max_c: float = 26.0
    humidity_pct: float = 45.0
    lux_max: float = 500.0


@dataclass(frozen=True)
class SimConfig:
    seed: int
    duration_s: int
    sample_interval_s: int = 60
    start_ts: int = DEFAULT_START_TS
    appliances: tuple[ApplianceSchedule, ...] = ()
    occupancy: tuple[OccupancyRule, ...] = ()
    environment: tuple[EnvironmentProfile, ...] = ()
    noise: NoiseModel = field(default_factory=NoiseModel)
    duty_jitter: float = 0.0  # +/- fraction of dacr_max while on

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise ConfigurationError(f"duration_s must be > 0, got {self.duration_s}")
        if self.sample_interval_s <= 0:
            raise ConfigurationError(
                f"sample_interval_s must be > 0, got {self.sample_interval_s}"
            )
        if self.duration_s < self.sample_interval_s:
            raise ConfigurationError("duration_s shorter than one sample interval")
        if not 0 <= self.duty_jitter < 0.5:
            raise ConfigurationError(f"duty_jitter must be in [0, 0.5), got {self.duty_jitter}")
        ids = [s.spec.id for s in self.appliances]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"appliance ids must be distinct, got {ids}")
        zones_with_rules = {r.zone for r in self.occupancy}
        for sched in self.appliances:
            if sched.spec.zone_id not in zones_with_rules:
                raise ConfigurationError(
                    f"appliances[{sched.spec.id}].zone_id {sched.spec.zone_id!r} "
                    "has no occupancy rule"
                )
            for a, b in sched.on_windows:
                if not (0 <= a < b <= 86400):
                    raise ConfigurationError(
                        f"appliances[{sched.spec.id}] window ({a},{b}) out of range"
                    )


@dataclass
class ApplianceTrace:
    spec: ApplianceSpec
    true_w: np.ndarray
    measured_w: np.ndarray
    labels: np.ndarray  # ground truth from the true series


@dataclass
class SimTrace:
    config: SimConfig
    timestamps: np.ndarray  # int64 epoch seconds, shared grid
    appliances: dict[str, ApplianceTrace]
    occupancy: dict[str, np.ndarray]  # zone -> bool array
    environment: dict[str, dict[str, np.ndarray]]  # zone -> {temp_c,humidity_pct,lux}

    @property
    def sample_count(self) -> int:
        return int(self.timestamps.size)


def _stream_rng(seed: int, *names: str) -> np.random.Generator:
    # Independent deterministic substream per (seed, purpose, id).
    tags = [zlib.crc32(n.encode()) for n in names]
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, *tags)))


def _day_and_hour(ts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    second_of_day = ts % 86400
    hour = second_of_day // 3600
    # 1970-01-01 was a Thursday (weekday 3).
    weekday = ((ts // 86400) + 3) % 7
    return second_of_day, hour, weekday


def generate(config: SimConfig) -> SimTrace:
    """Generate a labeled trace; deterministic for a fixed config."""
    config.validate()
    n = config.duration_s // config.sample_interval_s
    ts = config.start_ts + np.arange(n, dtype=np.int64) * config.sample_interval_s
    second_of_day, hour, weekday = _day_and_hour(ts)

    occupancy: dict[str, np.ndarray] = {}
    for rule in config.occupancy:
        rng = _stream_rng(config.seed, "occupancy", rule.zone)
        # One draw per absolute hour, held for the whole hour.
        hour_index = ts // 3600
        occ = np.empty(n, dtype=bool)
        draws: dict[int, bool] = {}
        for i in range(n):
            hi = int(hour_index[i])
            if hi not in draws:
                prob = rule.profile_for(int(weekday[i]))[int(hour[i])]
                draws[hi] = bool(rng.random() < prob)
            occ[i] = draws[hi]
        occupancy[rule.zone] = occ

    environment: dict[str, dict[str, np.ndarray]] = {}
    for env in config.environment:
        rng = _stream_rng(config.seed, "environment", env.zone)
        # Temperature: daily sinusoid, minimum at 04:00, maximum at 16:00.
        phase = 2.0 * np.pi * (second_of_day - 4 * 3600) / 86400.0
        temp = env.temp_min_c + (env.temp_max_c - env.temp_min_c) * 0.5 * (1 - np.cos(phase))
        # Lux: clipped sinusoid, zero outside 06:00-18:00.
        lux = env.lux_max * np.sin(np.pi * (second_of_day - 6 * 3600) / (12 * 3600.0))
        lux = np.clip(lux, 0.0, None)
        humidity = np.clip(
            env.humidity_pct + rng.normal(0.0, 1.5, size=n), 0.0, 100.0
        )
        environment[env.zone] = {
            "temp_c": temp.astype(np.float64),
            "humidity_pct": humidity,
            "lux": lux.astype(np.float64),
        }

    appliances: dict[str, ApplianceTrace] = {}
    for sched in config.appliances:
        spec = sched.spec
        on = np.fromiter(
            (sched.is_on(int(s)) for s in second_of_day), dtype=bool, count=n
        )
        true_w = np.where(on, spec.dacr_max_w, spec.dspc_w).astype(np.float64)
        if config.duty_jitter > 0:
            rng = _stream_rng(config.seed, "jitter", spec.id)
            jitter = rng.uniform(-config.duty_jitter, config.duty_jitter, size=n)
            true_w = np.where(on, spec.dacr_max_w * (1.0 + jitter), true_w)
        if config.noise.relative_sigma > 0:
            rng = _stream_rng(config.seed, "noise", spec.id)
            eps = rng.normal(0.0, config.noise.relative_sigma, size=n)
            measured_w = true_w * (1.0 + eps)
        else:
            measured_w = true_w.copy()
        measured_w = np.clip(measured_w, 0.0, None)
        occ = occupancy[spec.zone_id]
        labels, _ = run_series(spec, ts, true_w, occ)
        appliances[spec.id] = ApplianceTrace(
            spec=spec, true_w=true_w, measured_w=measured_w, labels=labels
        )

    return SimTrace(
        config=config,
        timestamps=ts,
        appliances=appliances,
        occupancy=occupancy,
        environment=environment,
    )


# ---------------------------------------------------------------------------
# Trace output: CSV files, a manifest, and a replayable event stream.


def _fmt(v: float) -> str:
    # repr of a Python float: shortest round-trip text, deterministic.
    return repr(float(v))


def write_csv(trace: SimTrace, outdir: str | Path) -> list[Path]:
    """One CSV per signal plus a manifest.json describing the trace."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    ts = trace.timestamps
    for aid, at in sorted(trace.appliances.items()):
        p = outdir / f"power_{aid}.csv"
        with open(p, "w") as f:
            f.write("ts,true_w,measured_w\n")
            for i in range(ts.size):
                f.write(f"{ts[i]},{_fmt(at.true_w[i])},{_fmt(at.measured_w[i])}\n")
        written.append(p)
        p = outdir / f"labels_{aid}.csv"
        with open(p, "w") as f:
            f.write("ts,label\n")
            for i in range(ts.size):
                f.write(f"{ts[i]},{int(at.labels[i])}\n")
        written.append(p)
    for zone, occ in sorted(trace.occupancy.items()):
        p = outdir / f"occupancy_{zone}.csv"
        with open(p, "w") as f:
            f.write("ts,occupied\n")
            for i in range(ts.size):
                f.write(f"{ts[i]},{1 if occ[i] else 0}\n")
        written.append(p)
    for zone, env in sorted(trace.environment.items()):
        p = outdir / f"env_{zone}.csv"
        with open(p, "w") as f:
            f.write("ts,temp_c,humidity_pct,lux\n")
            for i in range(ts.size):
                f.write(
                    f"{ts[i]},{_fmt(env['temp_c'][i])},"
                    f"{_fmt(env['humidity_pct'][i])},{_fmt(env['lux'][i])}\n"
                )
        written.append(p)
    manifest = {
        "dataset_id": dataset_id(trace.config),
        "seed": trace.config.seed,
        "start_ts": int(trace.config.start_ts),
        "sample_interval_s": trace.config.sample_interval_s,
        "duration_s": trace.config.duration_s,
        "samples": trace.sample_count,
        "noise_relative_sigma": trace.config.noise.relative_sigma,
        "duty_jitter": trace.config.duty_jitter,
        "appliances": [
            {
                "id": s.id,
                "name": s.name,
                "zone": s.zone_id,
                "dacr_max_w": s.dacr_max_w,
                "dacr_min_w": s.dacr_min_w,
                "dspc_w": s.dspc_w,
                "dot_s": s.dot_s,
                "requires_presence": s.requires_presence,
            }
            for s in sorted(
                (a.spec for a in trace.appliances.values()), key=lambda s: s.id
            )
        ],
        "zones": sorted(trace.occupancy.keys()),
        "env_zones": sorted(trace.environment.keys()),
    }
    mp = outdir / "manifest.json"
    mp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(mp)
    return written


def dataset_id(config: SimConfig) -> str:
    return (
        f"sid-seed{config.seed}-{config.duration_s}s-"
        f"{len(config.appliances)}app-sigma{config.noise.relative_sigma:.5f}"
    )


# Event ordering within one timestamp: context before power so a replayed
# pipeline labels each sample against that timestamp's occupancy/environment.
_CHANNEL_ORDER = {"occupancy": 0, "env": 1, "power": 2}


def write_events(trace: SimTrace, path: str | Path, site: str = "home") -> int:
    """Write a replayable JSON-lines event stream; returns the event count.

    Each line is {"topic": ..., "ts": ..., "payload": {...}} matching the
    telemetry wire schema.
    """
    events = []
    ts = trace.timestamps
    for zone, occ in trace.occupancy.items():
        topic = f"em3/{site}/{zone}/occupancy"
        for i in range(ts.size):
            events.append((int(ts[i]), "occupancy", topic, {"ts": int(ts[i]), "occ": int(occ[i])}))
    for zone, env in trace.environment.items():
        topic = f"em3/{site}/{zone}/env"
        for i in range(ts.size):
            events.append(
                (
                    int(ts[i]),
                    "env",
                    topic,
                    {
                        "ts": int(ts[i]),
                        "t": float(env["temp_c"][i]),
                        "h": float(env["humidity_pct"][i]),
                        "lx": float(env["lux"][i]),
                    },
                )
            )
    for aid, at in trace.appliances.items():
        topic = f"em3/{site}/{at.spec.zone_id}/{aid}/power"
        for i in range(ts.size):
            events.append(
                (int(ts[i]), "power", topic, {"ts": int(ts[i]), "w": float(at.measured_w[i])})
            )
    events.sort(key=lambda e: (e[0], _CHANNEL_ORDER[e[1]], e[2]))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for t, _, topic, payload in events:
            f.write(
                json.dumps(
                    {"topic": topic, "ts": t, "payload": payload}, sort_keys=True
                )
                + "\n"
            )
    return len(events)
