// The view model: everything the page shows, derived purely from API
// responses and stream events. Reducers mutate in place and report whether
// anything changed so the renderer can skip idle frames.

import type {
  ApplianceInfo,
  Recommendation,
  StreamEvent,
  Verdict,
} from "./types.js";

export interface Tile {
  id: string;
  name: string;
  zone: string;
  dacrMaxW: number;
  watts: number | null;
  label: number | null;
  ts: number | null;
}

export interface CardState {
  rec: Recommendation;
  verdict: Verdict | null; // set locally the moment a button is clicked
  busy: boolean; // a POST is in flight; guards double clicks
}

export interface EnvState {
  zone: string;
  tempC: number;
  humidityPct: number;
  lux: number;
  ts: number;
}

export interface LiveSample {
  ts: number;
  watts: number;
}

export interface ViewModel {
  tiles: Map<string, Tile>;
  cards: Map<string, CardState>;
  env: Map<string, EnvState>;
  liveSamples: Map<string, LiveSample[]>; // per appliance, ring of raw power
  lastSeq: number;
  connection: "connecting" | "live" | "stale";
}

export const LIVE_WINDOW_S = 3600; // raw samples kept for <= 1 h charts

export function initialModel(): ViewModel {
  return {
    tiles: new Map(),
    cards: new Map(),
    env: new Map(),
    liveSamples: new Map(),
    lastSeq: 0,
    connection: "connecting",
  };
}

export function loadAppliances(model: ViewModel, appliances: ApplianceInfo[]): void {
  for (const a of appliances) {
    model.tiles.set(a.id, {
      id: a.id,
      name: a.name,
      zone: a.zone,
      dacrMaxW: a.dacr_max_w,
      watts: a.latest?.watts ?? null,
      label: a.latest?.label ?? null,
      ts: a.latest?.ts ?? null,
    });
  }
}

export function loadRecommendations(model: ViewModel, recs: Recommendation[]): void {
  for (const rec of recs) {
    const existing = model.cards.get(rec.id);
    model.cards.set(rec.id, {
      rec,
      // server truth wins; a non-pending status implies a recorded verdict
      verdict: rec.status === "pending" ? (existing?.verdict ?? null) : verdictFor(rec.status),
      busy: false,
    });
  }
}

function verdictFor(status: Recommendation["status"]): Verdict | null {
  switch (status) {
    case "accepted":
      return "accept";
    case "rejected":
      return "reject";
    case "ignored":
    case "expired":
      return "ignore";
    default:
      return null;
  }
}

function pushLiveSample(model: ViewModel, applianceId: string, ts: number, watts: number): void {
  let ring = model.liveSamples.get(applianceId);
  if (!ring) {
    ring = [];
    model.liveSamples.set(applianceId, ring);
  }
  ring.push({ ts, watts });
  const cutoff = ts - LIVE_WINDOW_S;
  while (ring.length && ring[0].ts < cutoff) ring.shift();
}

export function applyEvent(model: ViewModel, ev: StreamEvent): boolean {
  if (ev.seq <= model.lastSeq) return false; // replayed duplicate
  model.lastSeq = ev.seq;
  switch (ev.kind) {
    case "sample": {
      const stream = String(ev.payload.stream ?? "");
      const ts = Number(ev.payload.ts);
      const value = (ev.payload.value ?? {}) as Record<string, number>;
      const parts = stream.split("/");
      if (parts[0] === "power" && parts.length === 4) {
        const tile = model.tiles.get(parts[3]);
        if (tile) {
          tile.watts = value.w;
          tile.ts = ts;
        }
        pushLiveSample(model, parts[3], ts, value.w);
        return true;
      }
      if (parts[0] === "env" && parts.length === 3) {
        model.env.set(parts[2], {
          zone: parts[2],
          tempC: value.t,
          humidityPct: value.h,
          lux: value.lx,
          ts,
        });
        return true;
      }
      return parts[0] === "occupancy";
    }
    case "label": {
      const tile = model.tiles.get(String(ev.payload.appliance_id));
      if (tile) {
        tile.label = Number(ev.payload.label);
        return true;
      }
      return false;
    }
    case "recommendation": {
      const rec = ev.payload as unknown as Recommendation;
      const existing = model.cards.get(rec.id);
      model.cards.set(rec.id, {
        rec,
        verdict: existing?.verdict ?? verdictFor(rec.status),
        busy: existing?.busy ?? false,
      });
      return true;
    }
    case "feedback": {
      const id = String(ev.payload.recommendation_id);
      const card = model.cards.get(id);
      if (card) {
        const verdict = ev.payload.verdict as Verdict;
        card.verdict = verdict;
        card.busy = false;
        card.rec.status = (
          { accept: "accepted", reject: "rejected", ignore: "ignored" } as const
        )[verdict];
        return true;
      }
      return false;
    }
    default:
      return ev.kind === "health";
  }
}

// Client-side guard: the first click claims the card; further clicks are
// no-ops until the server answers.
export function beginVerdict(model: ViewModel, recId: string, verdict: Verdict): boolean {
  const card = model.cards.get(recId);
  if (!card || card.busy || card.verdict !== null) return false;
  card.busy = true;
  card.verdict = verdict;
  return true;
}

export function settleVerdict(
  model: ViewModel,
  recId: string,
  outcome: "applied" | "conflict" | "failed",
): void {
  const card = model.cards.get(recId);
  if (!card) return;
  card.busy = false;
  if (outcome === "applied") {
    const status = (
      { accept: "accepted", reject: "rejected", ignore: "ignored" } as const
    )[card.verdict as Verdict];
    card.rec.status = status;
  } else if (outcome === "failed") {
    card.verdict = null; // conflict resolution refetches server truth instead
  }
}

export function pendingCards(model: ViewModel): CardState[] {
  return [...model.cards.values()]
    .filter((c) => c.rec.status === "pending")
    .sort((a, b) => a.rec.id.localeCompare(b.rec.id));
}

export function historyCards(model: ViewModel): CardState[] {
  return [...model.cards.values()]
    .filter((c) => c.rec.status !== "pending")
    .sort((a, b) => b.rec.id.localeCompare(a.rec.id));
}
