"""Canned simulation setups used by the CLI and the test suites.

demo3: three appliances (AC, light, TV) over two zones with an outdoor
environment zone; the light's 8.5 h evening run deliberately crosses its
8 h expected operation time.

dense8: eight appliances cycling many times per day; small enough to train
quickly and rich in turn-on/turn-off transitions, which keeps the rare
classes populated.
"""

from __future__ import annotations

from .appliances import ApplianceSpec
from .simulate import (
    ApplianceSchedule,
    EnvironmentProfile,
    NoiseModel,
    OccupancyRule,
    SimConfig,
)


def _spec(i, name, zone, dacr, dspc, dot, dacr_min=0.0, rp=True):
    return ApplianceSpec(id=i, name=name, zone_id=zone, dacr_max_w=dacr,
                         dspc_w=dspc, dot_s=dot, dacr_min_w=dacr_min,
                         requires_presence=rp)


AC = _spec("ac1", "Air conditioner", "lab1", 1000, 4, 55800, 100)
LIGHT = _spec("light1", "Light", "lab1", 60, 0, 28800)
TV = _spec("tv1", "Television", "lab2", 65, 6, 45720)
DESKTOP = _spec("desktop1", "Desktop", "lab2", 250, 12, 45720)
FRIDGE = _spec("fridge1", "Refrigerator", "kitchen", 180, 0, 63000, rp=False)
MICROWAVE = _spec("microwave1", "Microwave", "kitchen", 1200, 7, 3600, rp=False)
WASHER = _spec("washer1", "Washing machine", "kitchen", 500, 6, 3600, rp=False)
LAPTOP = _spec("laptop1", "Laptop", "lab1", 100, 20, 45720, dacr_min=30)

LAB1_OCCUPANCY = OccupancyRule(zone="lab1", hourly=tuple(
    0.95 if 6 <= h < 12 else 0.1 if 12 <= h < 14 else 0.9 if 14 <= h < 23 else 0.2
    for h in range(24)))
LAB2_OCCUPANCY = OccupancyRule(zone="lab2", hourly=tuple(
    0.9 if 7 <= h < 9 else 0.3 if 9 <= h < 12 else 0.8 if 12 <= h < 24 else 0.15
    for h in range(24)))
KITCHEN_OCCUPANCY = OccupancyRule(zone="kitchen", hourly=tuple(
    0.7 if 6 <= h < 22 else 0.2 for h in range(24)))

INDOOR_ENV = (
    EnvironmentProfile(zone="lab1", temp_min_c=22, temp_max_c=27),
    EnvironmentProfile(zone="lab2", temp_min_c=21, temp_max_c=26),
)
OUTDOOR_ENV = EnvironmentProfile(zone="outdoor", temp_min_c=16, temp_max_c=30,
                                 lux_max=10000)


def _cycling(start_h: float, period_min: int, on_min: int, cycles: int):
    out = []
    a = start_h * 3600
    for _ in range(cycles):
        b = a + on_min * 60
        if b > 86400:
            break
        out.append((int(a), int(b)))
        a += period_min * 60
    return tuple(out)


def demo3_config(seed: int = 7, days: int = 7, interval_s: int = 30,
                 sigma: float = 0.0, jitter: float = 0.10) -> SimConfig:
    return SimConfig(
        seed=seed,
        duration_s=days * 86400,
        sample_interval_s=interval_s,
        appliances=(
            ApplianceSchedule(spec=AC, on_windows=(
                (8 * 3600, 12 * 3600), (13 * 3600, 18 * 3600))),
            ApplianceSchedule(spec=LIGHT, on_windows=(
                (14 * 3600, int(22.5 * 3600)),)),  # 8.5 h, crosses DOT
            ApplianceSchedule(spec=TV, on_windows=(
                (7 * 3600, 9 * 3600), (12 * 3600, 13 * 3600),
                (19 * 3600, int(23.5 * 3600)))),
        ),
        occupancy=(LAB1_OCCUPANCY, LAB2_OCCUPANCY),
        environment=INDOOR_ENV + (OUTDOOR_ENV,),
        noise=NoiseModel(relative_sigma=sigma),
        duty_jitter=jitter,
    )


def dense8_config(seed: int = 7, days: int = 4, interval_s: int = 120,
                  sigma: float = 0.0, jitter: float = 0.12) -> SimConfig:
    return SimConfig(
        seed=seed,
        duration_s=days * 86400,
        sample_interval_s=interval_s,
        appliances=(
            ApplianceSchedule(spec=AC, on_windows=_cycling(6, 100, 70, 10)),
            ApplianceSchedule(spec=LIGHT, on_windows=_cycling(5.5, 90, 60, 12)),
            ApplianceSchedule(spec=TV, on_windows=_cycling(6.0, 75, 45, 14)),
            ApplianceSchedule(spec=DESKTOP, on_windows=_cycling(6.5, 95, 65, 10)),
            ApplianceSchedule(spec=FRIDGE, on_windows=_cycling(0, 60, 40, 24)),
            ApplianceSchedule(spec=MICROWAVE, on_windows=_cycling(6.2, 65, 12, 16)),
            ApplianceSchedule(spec=WASHER, on_windows=_cycling(7.3, 130, 55, 8)),
            ApplianceSchedule(spec=LAPTOP, on_windows=_cycling(6.8, 85, 55, 11)),
        ),
        occupancy=(LAB1_OCCUPANCY, LAB2_OCCUPANCY, KITCHEN_OCCUPANCY),
        environment=INDOOR_ENV + (OUTDOOR_ENV,),
        noise=NoiseModel(relative_sigma=sigma),
        duty_jitter=jitter,
    )


PRESETS = {"demo3": demo3_config, "dense8": dense8_config}
