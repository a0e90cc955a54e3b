// Pure HTML renderers: view model in, markup out. The DOM glue in main.ts
// swaps innerHTML and wires events by data attributes, so everything here
// is unit-testable as strings.

import type { CardState, EnvState, Tile, ViewModel } from "./state.js";
import {
  formatClock,
  formatCo2PerHour,
  formatCostPerHour,
  formatHumidity,
  formatLabel,
  formatLux,
  formatTemp,
  formatWatts,
  labelClass,
} from "./format.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTile(tile: Tile): string {
  const on = tile.watts !== null && tile.watts > 0;
  return [
    `<article class="tile ${labelClass(tile.label)}" data-appliance="${escapeHtml(tile.id)}">`,
    `<header><h3>${escapeHtml(tile.name)}</h3><span class="zone">${escapeHtml(tile.zone)}</span></header>`,
    `<p class="watts">${formatWatts(tile.watts)}</p>`,
    `<p class="label">${escapeHtml(formatLabel(tile.label))}</p>`,
    `<p class="ts">as of ${formatClock(tile.ts)}</p>`,
    `<div class="controls">`,
    `<button data-command="ON" data-appliance="${escapeHtml(tile.id)}" ${on ? "disabled" : ""}>on</button>`,
    `<button data-command="OFF" data-appliance="${escapeHtml(tile.id)}" ${on ? "" : "disabled"}>off</button>`,
    `</div>`,
    `</article>`,
  ].join("");
}

// Cards carry two sections: the explanation (what to do and why it fired)
// and the persuasion (impact fact plus the saving estimate).
export function renderCard(card: CardState): string {
  const rec = card.rec;
  const resolved = card.verdict !== null || rec.status !== "pending";
  const disable = resolved || card.busy ? "disabled" : "";
  const persuasionLine =
    rec.persuasion.style === "econ"
      ? formatCostPerHour(rec.persuasion.value)
      : formatCo2PerHour(rec.persuasion.value);
  return [
    `<article class="card status-${rec.status}" data-rec="${escapeHtml(rec.id)}">`,
    `<section class="explain">`,
    `<h3>${escapeHtml(rec.action_text)}</h3>`,
    `<p class="reason">${escapeHtml(rec.reason_text)}</p>`,
    `</section>`,
    `<section class="persuade">`,
    `<p class="fact">${escapeHtml(rec.persuasion.fact_text)}</p>`,
    `<p class="cost">savings ≈ ${formatCostPerHour(rec.est_saving_cost_per_h)} ` +
      `(${rec.est_saving_energy_kwh_per_h.toFixed(3)} kWh/h)</p>`,
    `</section>`,
    `<footer class="verdicts">`,
    `<button data-verdict="accept" data-rec="${escapeHtml(rec.id)}" ${disable}>accept</button>`,
    `<button data-verdict="reject" data-rec="${escapeHtml(rec.id)}" ${disable}>reject</button>`,
    `<button data-verdict="ignore" data-rec="${escapeHtml(rec.id)}" ${disable}>ignore</button>`,
    resolved ? `<span class="resolved">${escapeHtml(rec.status)}</span>` : "",
    `</footer>`,
    `</article>`,
  ].join("");
}

export function renderEnvPanel(env: EnvState[]): string {
  if (env.length === 0) return `<p class="empty">no environment data yet</p>`;
  return env
    .map(
      (e) =>
        `<article class="gauge" data-zone="${escapeHtml(e.zone)}">` +
        `<h3>${escapeHtml(e.zone)}</h3>` +
        `<p>${formatTemp(e.tempC)} · ${formatHumidity(e.humidityPct)} · ${formatLux(e.lux)}</p>` +
        `<p class="ts">as of ${formatClock(e.ts)}</p>` +
        `</article>`,
    )
    .join("");
}

export function renderConnection(model: ViewModel): string {
  const cls = { connecting: "badge-wait", live: "badge-live", stale: "badge-stale" }[
    model.connection
  ];
  const text = model.connection === "stale" ? "stale – reconnecting" : model.connection;
  return `<span class="badge ${cls}">${text}</span>`;
}
