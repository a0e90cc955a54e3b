"""Action triggering: turns live state into explainable recommendations.

Three triggers watch the latest per-appliance power + label, room
occupancy, and environment:

    T1_ac_outdoor_cooler  cooling runs while it is cooler outside and the
                          user is present: suggest opening the window.
    T2_light_daylight     a light burns against plentiful daylight with the
                          user present: suggest opening the curtains.
    T3_on_while_away      anything labeled 4 (on while the zone is empty):
                          suggest turning it off.

Each recommendation carries an action, the reason it fired, a persuasion
fact (eco = kg CO2 per hour, econ = cost per hour), and a saving estimate
(cost = kWh/h x tariff, exactly). Accept/reject/ignore feedback shapes
future behavior: three consecutive rejects of one (user, trigger) silence
it for 24 h, a pending recommendation ignored for 30 min auto-expires as
an ignore, and advice contradicting a high-confidence mined habit is paced
to once per day.

All methods take explicit `now` so callers control the clock (the service
passes stream time, making replay deterministic).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .appliances import ApplianceSpec
from .errors import ConflictError, NotFoundError, ValidationError
from .habits import HabitRule, time_band, temp_band

log = logging.getLogger(__name__)

OUTDOOR_ZONE = "outdoor"

T1 = "T1_ac_outdoor_cooler"
T2 = "T2_light_daylight"
T3 = "T3_on_while_away"
TRIGGER_IDS = (T1, T2, T3)

VERDICTS = ("accept", "reject", "ignore")
STATUSES = ("pending", "accepted", "rejected", "ignored", "expired")

_AC_WORDS = ("air_cond", "aircond", "air cond", "cooler")
_LIGHT_WORDS = ("light", "lamp")


@dataclass
class RecommenderConfig:
    # tariff and co2_factor are plain configuration with no authoritative
    # source; they must stay overridable and are never presented as truth.
    tariff: float = 0.12            # currency per kWh
    co2_factor: float = 0.45        # kg CO2 per kWh
    t1_margin_c: float = 1.0
    t2_lux_threshold: float = 350.0
    cooldown_s: int = 1800
    feedback_timeout_s: int = 1800
    suppression_rejects: int = 3
    suppression_s: int = 86400
    habit_confidence_demote: float = 0.9
    habit_demote_interval_s: int = 86400
    snapshot_max_age_s: int = 60
    auto_off_on_accept: bool = False
    appliance_classes: dict = field(default_factory=dict)  # id -> "ac"|"light"|...


def device_class(spec: ApplianceSpec, overrides: dict | None = None) -> str:
    if overrides and spec.id in overrides:
        return overrides[spec.id]
    low = f"{spec.id} {spec.name}".lower()
    if any(w in low for w in _AC_WORDS) or low.startswith("ac") or " ac " in low:
        return "ac"
    if any(w in low for w in _LIGHT_WORDS):
        return "light"
    return "other"


@dataclass
class ApplianceReading:
    spec: ApplianceSpec
    watts: float
    label: int
    ts: int


@dataclass
class ZoneReading:
    zone: str
    occupied: bool
    ts: int


@dataclass
class EnvReading:
    zone: str
    temp_c: float
    humidity_pct: float
    lux: float
    ts: int


@dataclass
class Snapshot:
    appliances: dict[str, ApplianceReading]
    occupancy: dict[str, ZoneReading]
    environment: dict[str, EnvReading]
    user_id: str = "user"

    def timestamps(self) -> list[int]:
        out = [r.ts for r in self.appliances.values()]
        out += [r.ts for r in self.occupancy.values()]
        out += [r.ts for r in self.environment.values()]
        return out


@dataclass
class Persuasion:
    style: str  # eco | econ
    fact_text: str
    value: float


@dataclass
class Recommendation:
    id: str
    trigger_id: str
    appliance_id: str
    action_text: str
    reason_text: str
    persuasion: Persuasion
    est_saving_energy_kwh_per_h: float
    est_saving_cost_per_h: float
    created_at: int
    status: str = "pending"
    user_id: str = "user"
    snapshot_ts: int = 0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "trigger_id": self.trigger_id,
            "appliance_id": self.appliance_id,
            "action_text": self.action_text,
            "reason_text": self.reason_text,
            "persuasion": {
                "style": self.persuasion.style,
                "fact_text": self.persuasion.fact_text,
                "value": self.persuasion.value,
            },
            "est_saving_energy_kwh_per_h": self.est_saving_energy_kwh_per_h,
            "est_saving_cost_per_h": self.est_saving_cost_per_h,
            "created_at": self.created_at,
            "status": self.status,
            "user_id": self.user_id,
            "snapshot_ts": self.snapshot_ts,
        }


@dataclass
class FeedbackStats:
    user_id: str
    trigger_id: str
    accepts: int = 0
    rejects: int = 0
    ignores: int = 0
    consecutive_rejects: int = 0
    suppressed_until: int = 0

    def to_dict(self) -> dict:
        return {
            "user_id": self.user_id, "trigger_id": self.trigger_id,
            "accepts": self.accepts, "rejects": self.rejects,
            "ignores": self.ignores,
            "consecutive_rejects": self.consecutive_rejects,
            "suppressed_until": self.suppressed_until,
        }


class RecommendationEngine:
    """Stateful trigger evaluator; serialized per zone by the caller."""

    def __init__(self, config: RecommenderConfig | None = None, store=None,
                 command_publisher=None):
        self.config = config or RecommenderConfig()
        self.store = store
        self.command_publisher = command_publisher
        self.habit_rules: list[HabitRule] = []
        self._all: dict[str, Recommendation] = {}
        self._pending: dict[tuple[str, str], str] = {}  # (appliance, trigger) -> rec id
        self._last_fired: dict[tuple[str, str], int] = {}
        self._stats: dict[tuple[str, str], FeedbackStats] = {}
        self._style_cursor: dict[str, int] = {}
        self._next_id = 1
        self.health = {"stale_snapshots": 0, "evaluations": 0, "fired": 0}
        if store is not None:
            for rec in store.kb_list("feedback_stat"):
                st = FeedbackStats(**rec.value)
                self._stats[(st.user_id, st.trigger_id)] = st

    # -- composition --------------------------------------------------------

    def compose(self, trigger_id: str, spec: ApplianceSpec, watts: float,
                action_text: str, reason_text: str, style: str, now: int,
                user_id: str = "user", snapshot_ts: int | None = None) -> Recommendation:
        """Fill in persuasion fact and saving estimate for a trigger hit."""
        if style not in ("eco", "econ"):
            raise ValidationError(f"persuasion style must be eco or econ, got {style!r}")
        kwh_per_h = watts / 1000.0
        cost_per_h = kwh_per_h * self.config.tariff
        if style == "econ":
            value = cost_per_h
            fact = f"Keeping it on costs about {value:.4f} per hour."
        else:
            value = kwh_per_h * self.config.co2_factor
            fact = f"Keeping it on emits about {value:.4f} kg of CO2 per hour."
        rec = Recommendation(
            id=f"r{self._next_id:06d}",
            trigger_id=trigger_id,
            appliance_id=spec.id,
            action_text=action_text,
            reason_text=reason_text,
            persuasion=Persuasion(style=style, fact_text=fact, value=value),
            est_saving_energy_kwh_per_h=kwh_per_h,
            est_saving_cost_per_h=cost_per_h,
            created_at=int(now),
            user_id=user_id,
            snapshot_ts=int(snapshot_ts if snapshot_ts is not None else now),
        )
        self._next_id += 1
        return rec

    def _style_for(self, user_id: str) -> str:
        if self.store is not None:
            try:
                pref = self.store.kb_get("preference", f"{user_id}/persuasion_style")
                if pref.value.get("style") in ("eco", "econ"):
                    return pref.value["style"]
            except NotFoundError:
                pass
        cursor = self._style_cursor.get(user_id, 0)
        self._style_cursor[user_id] = cursor + 1
        return ("eco", "econ")[cursor % 2]

    # -- trigger evaluation --------------------------------------------------

    def stats_for(self, user_id: str, trigger_id: str) -> FeedbackStats:
        key = (user_id, trigger_id)
        if key not in self._stats:
            self._stats[key] = FeedbackStats(user_id=user_id, trigger_id=trigger_id)
        return self._stats[key]

    def _habit_demoted(self, spec: ApplianceSpec, snapshot: Snapshot, now: int) -> bool:
        """True when advice against this appliance fights a strong habit."""
        context = {time_band(int(now % 86400 // 3600)),
                   "weekend" if ((now // 86400) + 3) % 7 >= 5 else "weekday"}
        zone_occ = snapshot.occupancy.get(spec.zone_id)
        if zone_occ is not None:
            context.add("present" if zone_occ.occupied else "absent")
        env = snapshot.environment.get(spec.zone_id)
        if env is not None:
            context.add(temp_band(env.temp_c))
        for rule in self.habit_rules:
            if (
                rule.appliance_id == spec.id
                and rule.verb in ("turn_on", "extensive_use")
                and rule.confidence >= self.config.habit_confidence_demote
                and rule.lhs <= context
            ):
                return True
        return False

    def _gated(self, key: tuple[str, str], user_id: str, now: int,
               demoted: bool) -> bool:
        if key in self._pending:
            return True
        stats = self._stats.get((user_id, key[1]))
        if stats is not None and stats.suppressed_until > now:
            return True
        last = self._last_fired.get(key)
        if last is not None and now - last < self.config.cooldown_s:
            return True
        if demoted and last is not None and now - last < self.config.habit_demote_interval_s:
            return True
        return False

    def evaluate_triggers(self, snapshot: Snapshot, now: int) -> list[Recommendation]:
        """Run T1/T2/T3 over a snapshot; returns newly fired recommendations."""
        now = int(now)
        stamps = snapshot.timestamps()
        if stamps and max(stamps) - min(stamps) > self.config.snapshot_max_age_s:
            self.health["stale_snapshots"] += 1
            log.warning("skipping trigger evaluation: snapshot spans %d s",
                        max(stamps) - min(stamps))
            return []
        self.health["evaluations"] += 1
        self.expire_pending(now)
        outdoor = snapshot.environment.get(OUTDOOR_ZONE)
        fired: list[Recommendation] = []
        user = snapshot.user_id

        for aid in sorted(snapshot.appliances):
            reading = snapshot.appliances[aid]
            spec = reading.spec
            zone_occ = snapshot.occupancy.get(spec.zone_id)
            indoor = snapshot.environment.get(spec.zone_id)
            is_on = reading.watts > spec.dspc_w
            cls = device_class(spec, self.config.appliance_classes)
            candidates = []

            if (
                cls == "ac" and is_on
                and zone_occ is not None and zone_occ.occupied
                and outdoor is not None and indoor is not None
                and outdoor.temp_c + self.config.t1_margin_c < indoor.temp_c
            ):
                candidates.append((
                    T1,
                    f"Open the window instead of using the {spec.name}.",
                    f"It is {outdoor.temp_c:.1f} degC outside, cooler than the "
                    f"{indoor.temp_c:.1f} degC inside.",
                ))

            if (
                cls == "light" and is_on
                and zone_occ is not None and zone_occ.occupied
                and outdoor is not None
                and outdoor.lux >= self.config.t2_lux_threshold
            ):
                candidates.append((
                    T2,
                    f"Open the curtains instead of using the {spec.name}.",
                    f"There is enough natural light outside ({outdoor.lux:.0f} lux).",
                ))

            if reading.label == 4:
                candidates.append((
                    T3,
                    f"Turn off the {spec.name}.",
                    f"The {spec.name} is on while you are away.",
                ))

            for trigger_id, action, reason in candidates:
                key = (aid, trigger_id)
                demoted = self._habit_demoted(spec, snapshot, now)
                if self._gated(key, user, now, demoted):
                    continue
                rec = self.compose(
                    trigger_id, spec, reading.watts, action, reason,
                    style=self._style_for(user), now=now, user_id=user,
                    snapshot_ts=reading.ts,
                )
                self._all[rec.id] = rec
                self._pending[key] = rec.id
                self._last_fired[key] = now
                fired.append(rec)
                self.health["fired"] += 1
                self._persist_rec(rec)
        return fired

    # -- feedback -------------------------------------------------------------

    def record_feedback(self, rec_id: str, verdict: str, now: int) -> FeedbackStats:
        """Apply a user verdict to a pending recommendation."""
        if verdict not in VERDICTS:
            raise ValidationError(f"verdict must be one of {VERDICTS}, got {verdict!r}")
        rec = self._all.get(rec_id)
        if rec is None:
            raise NotFoundError(f"no recommendation {rec_id!r}")
        if rec.status != "pending":
            raise ConflictError(f"recommendation {rec_id} already {rec.status}")
        now = int(now)
        rec.status = {"accept": "accepted", "reject": "rejected", "ignore": "ignored"}[verdict]
        self._pending.pop((rec.appliance_id, rec.trigger_id), None)
        stats = self.stats_for(rec.user_id, rec.trigger_id)
        if verdict == "accept":
            stats.accepts += 1
            stats.consecutive_rejects = 0
            if (
                rec.trigger_id == T3
                and self.config.auto_off_on_accept
                and self.command_publisher is not None
            ):
                self._publish_off(rec)
        elif verdict == "reject":
            stats.rejects += 1
            stats.consecutive_rejects += 1
            if stats.consecutive_rejects >= self.config.suppression_rejects:
                stats.suppressed_until = now + self.config.suppression_s
                stats.consecutive_rejects = 0
        else:
            stats.ignores += 1
        self._persist_rec(rec)
        self._persist_stats(stats)
        return stats

    def _publish_off(self, rec: Recommendation):
        try:
            self.command_publisher(rec.appliance_id, "OFF")
        except Exception as e:  # command failure must not lose the feedback
            log.warning("auto-off for %s failed: %s", rec.appliance_id, e)

    def expire_pending(self, now: int) -> list[str]:
        """Auto-expire pendings without feedback for 30 min (counts as ignore)."""
        now = int(now)
        expired = []
        for rec_id, rec in list(self._all.items()):
            if rec.status != "pending":
                continue
            if now - rec.created_at >= self.config.feedback_timeout_s:
                rec.status = "ignored"
                self._pending.pop((rec.appliance_id, rec.trigger_id), None)
                stats = self.stats_for(rec.user_id, rec.trigger_id)
                stats.ignores += 1
                self._persist_rec(rec)
                self._persist_stats(stats)
                expired.append(rec_id)
        return expired

    # -- queries / persistence -------------------------------------------------

    def recommendations(self, status: str | None = None) -> list[Recommendation]:
        recs = sorted(self._all.values(), key=lambda r: r.id)
        if status is None:
            return recs
        if status not in STATUSES:
            raise ValidationError(f"unknown status {status!r}")
        return [r for r in recs if r.status == status]

    def get(self, rec_id: str) -> Recommendation:
        rec = self._all.get(rec_id)
        if rec is None:
            raise NotFoundError(f"no recommendation {rec_id!r}")
        return rec

    def set_habit_rules(self, rules: list[HabitRule]) -> None:
        self.habit_rules = list(rules)

    def feedback_stats(self) -> list[FeedbackStats]:
        return [s for _, s in sorted(self._stats.items())]

    def _persist_rec(self, rec: Recommendation):
        if self.store is not None:
            self.store.kb_put("recommendation", rec.id, rec.to_dict())

    def _persist_stats(self, stats: FeedbackStats):
        if self.store is not None:
            self.store.kb_put(
                "feedback_stat", f"{stats.user_id}/{stats.trigger_id}", stats.to_dict()
            )
