import assert from "node:assert/strict";
import { test } from "node:test";

import {
  applyEvent,
  beginVerdict,
  initialModel,
  loadAppliances,
  loadRecommendations,
  pendingCards,
  settleVerdict,
} from "../src/state.js";
import type { ApplianceInfo, Recommendation, StreamEvent } from "../src/types.js";

const APPLIANCE: ApplianceInfo = {
  id: "ac1",
  name: "Air conditioner",
  zone: "lab1",
  dacr_max_w: 1000,
  dacr_min_w: 100,
  dspc_w: 4,
  dot_s: 55800,
  requires_presence: true,
  latest: { watts: 900, label: 0, ts: 1000 },
};

function rec(id = "r000001", status: Recommendation["status"] = "pending"): Recommendation {
  return {
    id,
    trigger_id: "T3_on_while_away",
    appliance_id: "ac1",
    action_text: "Turn off the Air conditioner.",
    reason_text: "The Air conditioner is on while you are away.",
    persuasion: { style: "econ", fact_text: "Keeping it on costs about 0.12 per hour.", value: 0.12 },
    est_saving_energy_kwh_per_h: 1.0,
    est_saving_cost_per_h: 0.12,
    created_at: 1000,
    status,
    user_id: "user",
    snapshot_ts: 1000,
  };
}

function ev(seq: number, kind: string, payload: Record<string, unknown>): StreamEvent {
  return { seq, kind, payload };
}

test("sample events update tiles and the live ring", () => {
  const m = initialModel();
  loadAppliances(m, [APPLIANCE]);
  const changed = applyEvent(m, ev(1, "sample", {
    stream: "power/qu/lab1/ac1", ts: 1060, value: { w: 42.5 },
  }));
  assert.equal(changed, true);
  const tile = m.tiles.get("ac1")!;
  assert.equal(tile.watts, 42.5);
  assert.equal(tile.ts, 1060);
  assert.deepEqual(m.liveSamples.get("ac1"), [{ ts: 1060, watts: 42.5 }]);
});

test("live ring drops samples older than one hour", () => {
  const m = initialModel();
  loadAppliances(m, [APPLIANCE]);
  applyEvent(m, ev(1, "sample", { stream: "power/qu/lab1/ac1", ts: 1000, value: { w: 1 } }));
  applyEvent(m, ev(2, "sample", { stream: "power/qu/lab1/ac1", ts: 1000 + 3601, value: { w: 2 } }));
  assert.deepEqual(m.liveSamples.get("ac1")!.map((s) => s.watts), [2]);
});

test("label and env events update their panels", () => {
  const m = initialModel();
  loadAppliances(m, [APPLIANCE]);
  applyEvent(m, ev(1, "label", { appliance_id: "ac1", ts: 1060, label: 4 }));
  assert.equal(m.tiles.get("ac1")!.label, 4);
  applyEvent(m, ev(2, "sample", {
    stream: "env/qu/lab1", ts: 1060, value: { t: 24.5, h: 40, lx: 120 },
  }));
  assert.equal(m.env.get("lab1")!.tempC, 24.5);
});

test("duplicate seq is ignored (resume replays)", () => {
  const m = initialModel();
  loadAppliances(m, [APPLIANCE]);
  const e = ev(5, "sample", { stream: "power/qu/lab1/ac1", ts: 1060, value: { w: 7 } });
  assert.equal(applyEvent(m, e), true);
  assert.equal(applyEvent(m, e), false);
  assert.equal(m.liveSamples.get("ac1")!.length, 1);
  assert.equal(m.lastSeq, 5);
});

test("recommendation events appear as pending cards", () => {
  const m = initialModel();
  applyEvent(m, ev(1, "recommendation", rec() as unknown as Record<string, unknown>));
  const cards = pendingCards(m);
  assert.equal(cards.length, 1);
  assert.equal(cards[0].rec.trigger_id, "T3_on_while_away");
  assert.equal(cards[0].verdict, null);
});

test("verdict guard: first click wins, further clicks no-op", () => {
  const m = initialModel();
  loadRecommendations(m, [rec()]);
  assert.equal(beginVerdict(m, "r000001", "reject"), true);
  assert.equal(beginVerdict(m, "r000001", "accept"), false); // double click
  const card = m.cards.get("r000001")!;
  assert.equal(card.verdict, "reject");
  assert.equal(card.busy, true);
  settleVerdict(m, "r000001", "applied");
  assert.equal(card.busy, false);
  assert.equal(card.rec.status, "rejected");
  assert.equal(beginVerdict(m, "r000001", "accept"), false); // resolved
});

test("failed post re-enables the card", () => {
  const m = initialModel();
  loadRecommendations(m, [rec()]);
  beginVerdict(m, "r000001", "accept");
  settleVerdict(m, "r000001", "failed");
  const card = m.cards.get("r000001")!;
  assert.equal(card.verdict, null);
  assert.equal(card.rec.status, "pending");
  assert.equal(beginVerdict(m, "r000001", "accept"), true);
});

test("server truth wins when reloading recommendations", () => {
  const m = initialModel();
  loadRecommendations(m, [rec()]);
  loadRecommendations(m, [rec("r000001", "rejected")]);
  const card = m.cards.get("r000001")!;
  assert.equal(card.rec.status, "rejected");
  assert.equal(card.verdict, "reject");
  assert.equal(pendingCards(m).length, 0);
});

test("feedback events resolve cards", () => {
  const m = initialModel();
  loadRecommendations(m, [rec()]);
  applyEvent(m, ev(3, "feedback", { recommendation_id: "r000001", verdict: "accept" }));
  const card = m.cards.get("r000001")!;
  assert.equal(card.rec.status, "accepted");
  assert.equal(card.verdict, "accept");
});
