"""Micro-moment rule engine.

Turns per-appliance power and occupancy streams into one of five
consumption labels per sample:

    0 good usage    1 turn on    2 turn off    3 excessive    4 while outside

Five rules are evaluated in a fixed order and each matching rule overwrites
the label, so the last matching rule wins (rule 5 is strongest). A sample no
rule matches keeps label 0.

    rule 1  good usage:     dacr_min <= p(t) <= 0.95 * dacr_max
    rule 2  turn on:        p(t) >= dacr_min  and  p(t-1) <= dspc
    rule 3  turn off:       p(t) <= dspc      and  p(t-1) >= dacr_min
    rule 4  excessive:      p(t) >= 0.95 * dacr_max  or  on-clock >= dot
    rule 5  while outside:  not occupied  and  p(t) >= max(0.95 * dspc, 2 W)
                            (only for appliances that require presence)

The 2 W floor in rule 5 keeps devices with a 0 W standby draw from being
labeled 4 while simply off. The on-clock accumulates seconds while
p > dspc and resets to 0 the first full sample at or below dspc, so an OFF
sample can never trip rule 4's duration clause.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .appliances import ApplianceSpec
from .errors import OrderingError, ValidationError

EXCESSIVE_FRACTION = 0.95  # of dacr_max_w, rule 1 upper edge / rule 4 trigger
ABSENCE_FLOOR_W = 2.0  # rule 5 minimum draw for 0 W-standby devices


class MicroMoment(IntEnum):
    GOOD_USAGE = 0
    TURN_ON = 1
    TURN_OFF = 2
    EXCESSIVE = 3
    WHILE_OUTSIDE = 4


@dataclass(frozen=True)
class ApplianceState:
    """Carry-over between consecutive samples of one appliance.

    previous_watts is 0.0 before the first sample (no prior observation), so
    a trace that starts with the appliance already on labels its first
    sample as a turn-on.
    """

    previous_watts: float = 0.0
    operation_clock: float = 0.0  # seconds of continuous > dspc draw
    last_timestamp: float | None = None


def label_sample(
    spec: ApplianceSpec,
    state: ApplianceState,
    p_t: float,
    occupied: bool,
    ts: float,
) -> tuple[MicroMoment, ApplianceState]:
    """Label one sample and return the advanced state.

    Raises OrderingError when ts does not advance past state.last_timestamp
    and ValidationError for negative watts.
    """
    if p_t < 0:
        raise ValidationError(f"{spec.id}: negative watts {p_t}")
    if state.last_timestamp is not None and ts <= state.last_timestamp:
        raise OrderingError(
            f"{spec.id}: timestamp {ts} does not advance past {state.last_timestamp}"
        )

    if p_t > spec.dspc_w:
        dt = 0.0 if state.last_timestamp is None else ts - state.last_timestamp
        clock = state.operation_clock + dt
    else:
        clock = 0.0

    p_prev = state.previous_watts
    excessive_w = EXCESSIVE_FRACTION * spec.dacr_max_w

    label = MicroMoment.GOOD_USAGE  # default when no rule matches
    if spec.dacr_min_w <= p_t <= excessive_w:
        label = MicroMoment.GOOD_USAGE
    if p_t >= spec.dacr_min_w and p_prev <= spec.dspc_w:
        label = MicroMoment.TURN_ON
    if p_t <= spec.dspc_w and p_prev >= spec.dacr_min_w:
        label = MicroMoment.TURN_OFF
    if p_t >= excessive_w or clock >= spec.dot_s:
        label = MicroMoment.EXCESSIVE
    if (
        spec.requires_presence
        and not occupied
        and p_t >= max(EXCESSIVE_FRACTION * spec.dspc_w, ABSENCE_FLOOR_W)
    ):
        label = MicroMoment.WHILE_OUTSIDE

    new_state = ApplianceState(
        previous_watts=p_t, operation_clock=clock, last_timestamp=ts
    )
    return label, new_state


def run_series(
    spec: ApplianceSpec,
    timestamps: Sequence[float],
    watts: Sequence[float],
    occupied: Sequence[bool],
    state: ApplianceState | None = None,
):
    """Thread label_sample over aligned series.

    Returns (labels int8 array, operation-clock float array); the clock
    values are what rule 4 saw at each sample, which the classifier feature
    builder reuses.
    """
    n = len(timestamps)
    if not (len(watts) == n and len(occupied) == n):
        raise ValidationError(
            f"misaligned series: {n} timestamps, {len(watts)} watts, "
            f"{len(occupied)} occupancy"
        )
    labels = np.empty(n, dtype=np.int8)
    clocks = np.empty(n, dtype=np.float64)
    st = state or ApplianceState()
    for i in range(n):
        lab, st = label_sample(spec, st, float(watts[i]), bool(occupied[i]), float(timestamps[i]))
        labels[i] = int(lab)
        clocks[i] = st.operation_clock
    return labels, clocks


def extract_series(
    spec: ApplianceSpec,
    timestamps: Sequence[float],
    watts: Sequence[float],
    occupied: Sequence[bool],
) -> np.ndarray:
    """Label an aligned power/occupancy series; output length = input length."""
    labels, _ = run_series(spec, timestamps, watts, occupied)
    return labels


def iter_labels(
    spec: ApplianceSpec,
    samples: Iterable[tuple[float, float, bool]],
) -> Iterable[tuple[float, MicroMoment]]:
    """Streaming variant: yields (ts, label) for (ts, watts, occupied) tuples."""
    st = ApplianceState()
    for ts, p, occ in samples:
        lab, st = label_sample(spec, st, p, occ, ts)
        yield ts, lab
