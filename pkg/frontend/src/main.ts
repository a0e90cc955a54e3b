// Page bootstrap: initial fetches, live stream wiring, event delegation.

import { ApiClient } from "./api.js";
import { consumptionSvg, bucketSeries, liveSeries } from "./chart.js";
import {
  applyEvent,
  beginVerdict,
  historyCards,
  initialModel,
  loadAppliances,
  loadRecommendations,
  pendingCards,
  settleVerdict,
} from "./state.js";
import { EventStream } from "./sse.js";
import { renderCard, renderConnection, renderEnvPanel, renderTile } from "./render.js";
import type { Verdict } from "./types.js";

const RANGES: Record<string, number> = {
  "1h": 3600,
  "6h": 6 * 3600,
  "24h": 24 * 3600,
};

const model = initialModel();
const api = new ApiClient("");
let chartAppliance: string | null = null;
let chartRange = "6h";
let renderQueued = false;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function scheduleRender(): void {
  if (renderQueued) return;
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    render();
  });
}

function render(): void {
  el("connection").innerHTML = renderConnection(model);
  el("tiles").innerHTML = [...model.tiles.values()]
    .sort((a, b) => a.id.localeCompare(b.id))
    .map(renderTile)
    .join("");
  el("cards").innerHTML =
    pendingCards(model).map(renderCard).join("") || `<p class="empty">no advice right now</p>`;
  el("history").innerHTML = historyCards(model).slice(0, 12).map(renderCard).join("");
  el("env").innerHTML = renderEnvPanel(
    [...model.env.values()].sort((a, b) => a.zone.localeCompare(b.zone)),
  );
}

async function drawChart(): Promise<void> {
  if (!chartAppliance) return;
  const rangeS = RANGES[chartRange] ?? RANGES["6h"];
  const title = `${chartAppliance} – last ${chartRange}`;
  let svg: string;
  if (rangeS <= 3600) {
    // short windows draw the raw samples collected from the live stream
    const ring = model.liveSamples.get(chartAppliance) ?? [];
    const { ts, values } = liveSeries(ring);
    svg = consumptionSvg(ts, values);
  } else {
    const tile = model.tiles.get(chartAppliance);
    const now = tile?.ts ?? Math.floor(Date.now() / 1000);
    const buckets = await api.getConsumption(chartAppliance, now - rangeS, now + 300);
    const { ts, values } = bucketSeries(buckets, "mean_watts");
    svg = consumptionSvg(ts, values);
  }
  el("chart-title").textContent = title;
  el("chart").innerHTML = svg;
}

async function submitVerdict(recId: string, verdict: Verdict): Promise<void> {
  if (!beginVerdict(model, recId, verdict)) return; // double-click guard
  scheduleRender();
  const result = await api.postFeedback(recId, verdict);
  if (result.ok) {
    settleVerdict(model, recId, "applied");
  } else if (result.status === 409) {
    // someone else resolved it: adopt server truth
    settleVerdict(model, recId, "conflict");
    loadRecommendations(model, await api.getRecommendations());
  } else {
    settleVerdict(model, recId, "failed");
  }
  scheduleRender();
}

function onClick(evt: Event): void {
  const target = evt.target as HTMLElement;
  const verdict = target.dataset.verdict as Verdict | undefined;
  const recId = target.dataset.rec;
  if (verdict && recId) {
    void submitVerdict(recId, verdict);
    return;
  }
  const command = target.dataset.command as "ON" | "OFF" | undefined;
  const applianceId = target.dataset.appliance;
  if (command && applianceId) {
    void api.postCommand(applianceId, command);
    return;
  }
  if (target.dataset.range) {
    chartRange = target.dataset.range;
    void drawChart();
    return;
  }
  const tile = target.closest<HTMLElement>("[data-appliance]");
  if (tile?.dataset.appliance && !command) {
    chartAppliance = tile.dataset.appliance;
    void drawChart();
  }
}

async function boot(): Promise<void> {
  loadAppliances(model, await api.getAppliances());
  loadRecommendations(model, await api.getRecommendations());
  chartAppliance = [...model.tiles.keys()].sort()[0] ?? null;
  render();
  void drawChart();

  const stream = new EventStream("/api/events", {
    lastEventId: 0,
    onEvent: (ev) => {
      if (applyEvent(model, ev)) scheduleRender();
    },
    onStatus: (status) => {
      model.connection = status;
      scheduleRender();
    },
  });
  stream.start();
  document.body.addEventListener("click", onClick);
  setInterval(() => void drawChart(), 60_000);
}

void boot();
