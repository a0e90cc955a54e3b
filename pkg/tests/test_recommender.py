"""Recommendation engine tests: scenario triggers, composition arithmetic,
feedback/suppression walk-throughs, and habit-aware pacing."""

import pytest

from emedge.appliances import ApplianceSpec
from emedge.errors import ConflictError, NotFoundError, ValidationError
from emedge.habits import HabitRule
from emedge.recommender import (
    T1,
    T2,
    T3,
    ApplianceReading,
    EnvReading,
    RecommendationEngine,
    RecommenderConfig,
    Snapshot,
    ZoneReading,
    device_class,
)

AC = ApplianceSpec(
    id="ac1", name="Air conditioner", zone_id="lab1", dacr_max_w=1000,
    dspc_w=4, dot_s=55800, dacr_min_w=100, requires_presence=True,
)
LIGHT = ApplianceSpec(
    id="light1", name="Light", zone_id="lab1", dacr_max_w=60, dspc_w=0,
    dot_s=28800, requires_presence=True,
)
CHARGER = ApplianceSpec(
    id="charger1", name="Phone charger", zone_id="lab1", dacr_max_w=10,
    dspc_w=0.5, dot_s=14400, requires_presence=False,
)

NOW = 1_700_000_000


def snapshot(
    appliances,
    occupied=True,
    indoor_temp=26.0,
    outdoor_temp=22.0,
    outdoor_lux=500.0,
    ts=NOW,
):
    return Snapshot(
        appliances={a.spec.id: a for a in appliances},
        occupancy={"lab1": ZoneReading(zone="lab1", occupied=occupied, ts=ts)},
        environment={
            "lab1": EnvReading(zone="lab1", temp_c=indoor_temp, humidity_pct=45,
                               lux=150.0, ts=ts),
            "outdoor": EnvReading(zone="outdoor", temp_c=outdoor_temp,
                                  humidity_pct=50, lux=outdoor_lux, ts=ts),
        },
    )


def reading(spec, watts, label=0, ts=NOW):
    return ApplianceReading(spec=spec, watts=watts, label=label, ts=ts)


class TestScenarioTriggers:
    def test_t1_ac_with_cooler_outdoors(self):
        engine = RecommendationEngine()
        snap = snapshot([reading(AC, 1000.0)], indoor_temp=26, outdoor_temp=22)
        recs = engine.evaluate_triggers(snap, NOW)
        assert [r.trigger_id for r in recs] == [T1]
        rec = recs[0]
        assert "window" in rec.action_text.lower()
        assert "22.0" in rec.reason_text and "26.0" in rec.reason_text
        assert rec.persuasion.fact_text
        assert rec.est_saving_cost_per_h == 1000.0 / 1000.0 * engine.config.tariff

    def test_t1_negated_when_warmer_outside(self):
        engine = RecommendationEngine()
        snap = snapshot([reading(AC, 1000.0)], indoor_temp=24, outdoor_temp=30)
        assert engine.evaluate_triggers(snap, NOW) == []

    def test_t1_margin_boundary(self):
        engine = RecommendationEngine()
        # margin 1.0: outdoor 25.0 + 1.0 < 26.0 is false -> no fire
        snap = snapshot([reading(AC, 500.0)], indoor_temp=26, outdoor_temp=25)
        assert engine.evaluate_triggers(snap, NOW) == []

    def test_t1_requires_presence(self):
        engine = RecommendationEngine()
        snap = snapshot([reading(AC, 1000.0)], occupied=False)
        assert engine.evaluate_triggers(snap, NOW) == []

    def test_t2_light_against_daylight(self):
        engine = RecommendationEngine()
        snap = snapshot([reading(LIGHT, 60.0)], outdoor_lux=800.0)
        recs = engine.evaluate_triggers(snap, NOW)
        assert [r.trigger_id for r in recs] == [T2]
        assert "curtains" in recs[0].action_text.lower()

    def test_t2_negated_at_night(self):
        engine = RecommendationEngine()
        snap = snapshot([reading(LIGHT, 60.0)], outdoor_lux=0.0)
        assert engine.evaluate_triggers(snap, NOW) == []

    def test_t3_fires_iff_label_4(self):
        engine = RecommendationEngine()
        snap = snapshot([reading(CHARGER, 8.0, label=4)], occupied=False)
        recs = engine.evaluate_triggers(snap, NOW)
        assert [r.trigger_id for r in recs] == [T3]
        assert "away" in recs[0].reason_text
        engine2 = RecommendationEngine()
        snap2 = snapshot([reading(CHARGER, 8.0, label=0)], occupied=False)
        assert engine2.evaluate_triggers(snap2, NOW) == []

    def test_stale_snapshot_skipped_with_health_note(self):
        engine = RecommendationEngine()
        snap = snapshot([reading(AC, 1000.0, ts=NOW - 300)])
        assert engine.evaluate_triggers(snap, NOW) == []
        assert engine.health["stale_snapshots"] == 1

    def test_no_duplicate_pending_per_appliance_trigger(self):
        engine = RecommendationEngine()
        snap = snapshot([reading(AC, 1000.0)])
        first = engine.evaluate_triggers(snap, NOW)
        assert len(first) == 1
        again = engine.evaluate_triggers(snapshot([reading(AC, 1000.0, ts=NOW + 30)]), NOW + 30)
        assert again == []


class TestCompose:
    def test_econ_fact_arithmetic(self):
        engine = RecommendationEngine(RecommenderConfig(tariff=0.12))
        rec = engine.compose(T1, AC, 1000.0, "a", "r", "econ", NOW)
        assert rec.persuasion.value == pytest.approx(0.12)
        assert rec.est_saving_cost_per_h == pytest.approx(0.12)
        assert rec.est_saving_cost_per_h == rec.est_saving_energy_kwh_per_h * 0.12

    def test_eco_fact_arithmetic(self):
        engine = RecommendationEngine(RecommenderConfig(co2_factor=0.45))
        rec = engine.compose(T2, ApplianceSpec(
            id="tv1", name="Television", zone_id="z", dacr_max_w=65, dspc_w=6,
            dot_s=45720, requires_presence=True), 65.0, "a", "r", "eco", NOW)
        assert rec.persuasion.value == pytest.approx(0.029, abs=5e-4)

    def test_zero_watt_zero_facts(self):
        engine = RecommendationEngine()
        rec = engine.compose(T3, CHARGER, 0.0, "a", "r", "econ", NOW)
        assert rec.persuasion.value == 0.0
        assert rec.est_saving_cost_per_h == 0.0

    def test_style_alternates_without_preference(self):
        engine = RecommendationEngine()
        styles = [engine._style_for("u") for _ in range(4)]
        assert styles == ["eco", "econ", "eco", "econ"]

    def test_bad_style_rejected(self):
        engine = RecommendationEngine()
        with pytest.raises(ValidationError):
            engine.compose(T1, AC, 10.0, "a", "r", "classy", NOW)


class TestFeedback:
    def fire_t1(self, engine, now):
        recs = engine.evaluate_triggers(
            snapshot([reading(AC, 1000.0, ts=now)], ts=now), now
        )
        return recs[0] if recs else None

    def test_three_rejects_suppress_for_24h_then_fire_again(self):
        engine = RecommendationEngine()
        now = NOW
        for _ in range(3):
            rec = self.fire_t1(engine, now)
            assert rec is not None
            engine.record_feedback(rec.id, "reject", now + 60)
            now += engine.config.cooldown_s + 60
        stats = engine.stats_for("user", T1)
        assert stats.suppressed_until > now
        assert stats.suppressed_until == pytest.approx(now - engine.config.cooldown_s + engine.config.suppression_s, abs=120)
        # 4th evaluation inside the suppression window: silent
        assert self.fire_t1(engine, now) is None
        # after the 24 h window it fires again
        later = stats.suppressed_until + 1
        assert self.fire_t1(engine, later) is not None

    def test_accept_resets_consecutive_rejects(self):
        engine = RecommendationEngine()
        now = NOW
        for verdict in ("reject", "reject", "accept"):
            rec = self.fire_t1(engine, now)
            engine.record_feedback(rec.id, verdict, now + 60)
            now += engine.config.cooldown_s + 60
        stats = engine.stats_for("user", T1)
        assert stats.consecutive_rejects == 0
        assert stats.suppressed_until == 0
        assert stats.accepts == 1 and stats.rejects == 2

    def test_unknown_id_and_double_feedback(self):
        engine = RecommendationEngine()
        with pytest.raises(NotFoundError):
            engine.record_feedback("nope", "accept", NOW)
        rec = self.fire_t1(engine, NOW)
        engine.record_feedback(rec.id, "accept", NOW + 10)
        with pytest.raises(ConflictError):
            engine.record_feedback(rec.id, "reject", NOW + 20)

    def test_timeout_expires_as_ignore(self):
        engine = RecommendationEngine()
        rec = self.fire_t1(engine, NOW)
        expired = engine.expire_pending(NOW + engine.config.feedback_timeout_s)
        assert expired == [rec.id]
        assert engine.get(rec.id).status == "ignored"
        assert engine.stats_for("user", T1).ignores == 1

    def test_accept_on_t3_publishes_off(self):
        sent = []
        engine = RecommendationEngine(
            RecommenderConfig(auto_off_on_accept=True),
            command_publisher=lambda aid, cmd: sent.append((aid, cmd)),
        )
        snap = snapshot([reading(CHARGER, 8.0, label=4)], occupied=False)
        rec = engine.evaluate_triggers(snap, NOW)[0]
        engine.record_feedback(rec.id, "accept", NOW + 5)
        assert sent == [("charger1", "OFF")]


class TestHabitDemotion:
    def test_contradicting_strong_habit_paces_to_daily(self):
        engine = RecommendationEngine()
        engine.set_habit_rules([
            HabitRule(lhs=frozenset({"weekday"}), appliance_id="ac1",
                      verb="turn_on", support=0.4, confidence=0.95),
        ])
        # NOW is a Tuesday; the habit's lhs {weekday} holds in context.
        first = engine.evaluate_triggers(snapshot([reading(AC, 1000.0)]), NOW)
        assert len(first) == 1
        engine.record_feedback(first[0].id, "ignore", NOW + 10)
        # past cooldown but within the daily pace: silent
        t2 = NOW + engine.config.cooldown_s + 60
        assert engine.evaluate_triggers(
            snapshot([reading(AC, 1000.0, ts=t2)], ts=t2), t2) == []
        # a day later it may fire again
        t3 = NOW + engine.config.habit_demote_interval_s + 60
        assert len(engine.evaluate_triggers(
            snapshot([reading(AC, 1000.0, ts=t3)], ts=t3), t3)) == 1

    def test_weak_habit_does_not_demote(self):
        engine = RecommendationEngine()
        engine.set_habit_rules([
            HabitRule(lhs=frozenset({"weekday"}), appliance_id="ac1",
                      verb="turn_on", support=0.4, confidence=0.7),
        ])
        first = engine.evaluate_triggers(snapshot([reading(AC, 1000.0)]), NOW)
        engine.record_feedback(first[0].id, "ignore", NOW + 10)
        t2 = NOW + engine.config.cooldown_s + 60
        assert len(engine.evaluate_triggers(
            snapshot([reading(AC, 1000.0, ts=t2)], ts=t2), t2)) == 1


def test_device_class_keywords_and_override():
    assert device_class(AC) == "ac"
    assert device_class(LIGHT) == "light"
    assert device_class(CHARGER) == "other"
    assert device_class(CHARGER, {"charger1": "light"}) == "light"
