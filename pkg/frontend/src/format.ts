// Small display formatters. Values pass through unchanged numerically;
// only their textual presentation is decided here.

import { LABEL_NAMES } from "./types.js";

export function formatWatts(watts: number | null): string {
  if (watts === null || Number.isNaN(watts)) return "–";
  if (watts >= 1000) return `${(watts / 1000).toFixed(2)} kW`;
  return `${watts.toFixed(1)} W`;
}

export function formatEnergyWh(wh: number): string {
  if (wh >= 1000) return `${(wh / 1000).toFixed(2)} kWh`;
  return `${wh.toFixed(1)} Wh`;
}

export function formatCostPerHour(cost: number): string {
  return `${cost.toFixed(4)}/h`;
}

export function formatCo2PerHour(kg: number): string {
  return `${kg.toFixed(4)} kg CO2/h`;
}

export function formatLabel(label: number | null): string {
  if (label === null) return "no data";
  return LABEL_NAMES[label] ?? `label ${label}`;
}

export function labelClass(label: number | null): string {
  if (label === null) return "label-none";
  return ["label-good", "label-on", "label-off", "label-excessive", "label-away"][label]
    ?? "label-none";
}

export function formatClock(ts: number | null): string {
  if (ts === null) return "–";
  const d = new Date(ts * 1000);
  return d.toISOString().slice(11, 19) + " UTC";
}

export function formatTemp(c: number): string {
  return `${c.toFixed(1)} °C`;
}

export function formatHumidity(pct: number): string {
  return `${pct.toFixed(0)} %`;
}

export function formatLux(lux: number): string {
  return lux >= 1000 ? `${(lux / 1000).toFixed(1)} klx` : `${lux.toFixed(0)} lx`;
}
