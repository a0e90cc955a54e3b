"""Habit learning: association rules over user action logs.

User actions (turn_on / turn_off / extensive_use of an appliance) are
recorded together with discretized circumstances (time-of-day band,
temperature band, presence, weekday/weekend, optionally a humidity band).
Apriori-style frequent-itemset mining over these baskets yields rules

    circumstances -> repeated action      (support, confidence)

that the recommender uses to avoid fighting entrenched routines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from itertools import combinations
from typing import Iterable, Sequence

from .errors import ValidationError

VERBS = ("turn_on", "turn_off", "extensive_use")

TIME_BANDS = ((0, 6, "night"), (6, 12, "morning"), (12, 18, "afternoon"), (18, 24, "evening"))
TEMP_BAND_WIDTH_C = 3
HUMIDITY_BAND_WIDTH = 20

_ACTION_PREFIX = "action:"


@dataclass(frozen=True)
class ActionEvent:
    user_id: str
    appliance_id: str
    verb: str
    context: frozenset[str]
    ts: int

    def __post_init__(self):
        if self.verb not in VERBS:
            raise ValidationError(f"unknown verb {self.verb!r}; expected one of {VERBS}")

    @property
    def action_atom(self) -> str:
        return f"{_ACTION_PREFIX}{self.appliance_id}:{self.verb}"

    def basket(self) -> frozenset[str]:
        return self.context | {self.action_atom}


@dataclass(frozen=True)
class HabitRule:
    lhs: frozenset[str]
    appliance_id: str
    verb: str
    support: float
    confidence: float

    def to_dict(self) -> dict:
        return {
            "lhs": sorted(self.lhs),
            "appliance_id": self.appliance_id,
            "verb": self.verb,
            "support": self.support,
            "confidence": self.confidence,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def time_band(hour: int) -> str:
    for lo, hi, name in TIME_BANDS:
        if lo <= hour < hi:
            return name
    raise ValidationError(f"hour {hour} out of range")


def temp_band(temperature_c: float) -> str:
    if not -40 <= temperature_c <= 60:
        raise ValidationError(f"temperature {temperature_c} degC outside physical range")
    lo = int(temperature_c // TEMP_BAND_WIDTH_C) * TEMP_BAND_WIDTH_C
    return f"temp[{lo},{lo + TEMP_BAND_WIDTH_C})"


def humidity_band(humidity_pct: float) -> str:
    if not 0 <= humidity_pct <= 100:
        raise ValidationError(f"humidity {humidity_pct} % outside [0,100]")
    lo = min(int(humidity_pct // HUMIDITY_BAND_WIDTH) * HUMIDITY_BAND_WIDTH, 80)
    return f"rh[{lo},{lo + HUMIDITY_BAND_WIDTH})"


def discretize(
    user_id: str,
    appliance_id: str,
    verb: str,
    ts: int,
    temperature_c: float | None = None,
    occupied: bool | None = None,
    humidity_pct: float | None = None,
) -> ActionEvent:
    """Turn numeric circumstances into the fixed predicate vocabulary.

    Optional signals simply contribute no predicate when absent.
    """
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    context = {time_band(dt.hour), "weekend" if dt.weekday() >= 5 else "weekday"}
    if temperature_c is not None:
        context.add(temp_band(temperature_c))
    if occupied is not None:
        context.add("present" if occupied else "absent")
    if humidity_pct is not None:
        context.add(humidity_band(humidity_pct))
    return ActionEvent(
        user_id=user_id,
        appliance_id=appliance_id,
        verb=verb,
        context=frozenset(context),
        ts=int(ts),
    )


def actions_from_labels(
    user_id: str,
    appliance_id: str,
    timestamps: Sequence[int],
    labels: Sequence[int],
    occupied: Sequence[bool] | None = None,
    temperature_c: Sequence[float] | None = None,
) -> list[ActionEvent]:
    """Derive action events from a micro-moment label series.

    Label 1 -> turn_on, label 2 -> turn_off; the first sample of every
    label-3 episode -> extensive_use.
    """
    events = []
    prev = None
    for i, lab in enumerate(labels):
        verb = None
        if lab == 1:
            verb = "turn_on"
        elif lab == 2:
            verb = "turn_off"
        elif lab == 3 and prev != 3:
            verb = "extensive_use"
        if verb is not None:
            events.append(
                discretize(
                    user_id,
                    appliance_id,
                    verb,
                    int(timestamps[i]),
                    temperature_c=None if temperature_c is None else float(temperature_c[i]),
                    occupied=None if occupied is None else bool(occupied[i]),
                )
            )
        prev = lab
    return events


def frequent_itemsets(
    baskets: Sequence[frozenset[str]], min_support: float
) -> dict[frozenset[str], int]:
    """Level-wise apriori: all itemsets with support >= min_support.

    Returns itemset -> absolute count. Candidate (k+1)-itemsets are joined
    from frequent k-itemsets and pruned unless every k-subset is frequent.
    """
    n = len(baskets)
    if n == 0:
        return {}
    counts: dict[frozenset[str], int] = {}
    singles: dict[frozenset[str], int] = {}
    for b in baskets:
        for item in b:
            key = frozenset((item,))
            singles[key] = singles.get(key, 0) + 1
    frequent = {s: c for s, c in singles.items() if c / n >= min_support}
    counts.update(frequent)

    current = set(frequent)
    k = 2
    while current:
        candidates = set()
        for a, b in combinations(sorted(current, key=sorted), 2):
            u = a | b
            if len(u) != k:
                continue
            if all(frozenset(sub) in current for sub in combinations(u, k - 1)):
                candidates.add(u)
        if not candidates:
            break
        tallies = dict.fromkeys(candidates, 0)
        for basket in baskets:
            for cand in candidates:
                if cand <= basket:
                    tallies[cand] += 1
        current = {c for c, cnt in tallies.items() if cnt / n >= min_support}
        counts.update({c: tallies[c] for c in current})
        k += 1
    return counts


def _split_action(atom: str) -> tuple[str, str]:
    body = atom[len(_ACTION_PREFIX):]
    appliance, verb = body.rsplit(":", 1)
    return appliance, verb


def mine(
    events: Iterable[ActionEvent],
    min_support: float = 0.1,
    min_confidence: float = 0.6,
) -> list[HabitRule]:
    """Mine circumstance -> action rules meeting both thresholds.

    Every rule has a non-empty set of context predicates on the left and a
    single action on the right. Output order is total: confidence desc,
    support desc, then lexicographic left-hand side.
    """
    for name, value in (("min_support", min_support), ("min_confidence", min_confidence)):
        if not 0 < value <= 1:
            raise ValidationError(f"{name} must be in (0,1], got {value}")
    events = list(events)
    if not events:
        return []
    baskets = [e.basket() for e in events]
    n = len(baskets)
    counts = frequent_itemsets(baskets, min_support)

    rules = []
    for itemset, count in counts.items():
        actions = [i for i in itemset if i.startswith(_ACTION_PREFIX)]
        if len(actions) != 1 or len(itemset) < 2:
            continue
        action = actions[0]
        lhs = itemset - {action}
        if any(i.startswith(_ACTION_PREFIX) for i in lhs):
            continue
        lhs_count = counts.get(lhs)
        if lhs_count is None:
            continue  # cannot happen for frequent itemsets (anti-monotone)
        confidence = count / lhs_count
        if confidence < min_confidence:
            continue
        appliance, verb = _split_action(action)
        rules.append(
            HabitRule(
                lhs=lhs,
                appliance_id=appliance,
                verb=verb,
                support=count / n,
                confidence=confidence,
            )
        )
    rules.sort(
        key=lambda r: (-r.confidence, -r.support, sorted(r.lhs), r.appliance_id, r.verb)
    )
    return rules
