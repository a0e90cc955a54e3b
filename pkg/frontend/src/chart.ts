// SVG chart geometry. One input point produces exactly one plotted point:
// buckets and raw samples are projected to pixels, never resampled or
// interpolated, so the chart is a faithful picture of the API data.

import type { Bucket } from "./types.js";
import type { LiveSample } from "./state.js";

export interface ChartPoint {
  x: number;
  y: number;
}

export interface ChartGeometry {
  points: ChartPoint[];
  yMax: number;
  xMin: number;
  xMax: number;
}

export function project(
  ts: number[],
  values: number[],
  width: number,
  height: number,
  pad = 4,
): ChartGeometry {
  if (ts.length !== values.length) {
    throw new Error(`misaligned series: ${ts.length} vs ${values.length}`);
  }
  if (ts.length === 0) {
    return { points: [], yMax: 0, xMin: 0, xMax: 0 };
  }
  const xMin = ts[0];
  const xMax = ts[ts.length - 1];
  const yMax = Math.max(...values, 1e-9);
  const xSpan = Math.max(xMax - xMin, 1);
  const points = ts.map((t, i) => ({
    x: pad + ((t - xMin) / xSpan) * (width - 2 * pad),
    y: height - pad - (values[i] / yMax) * (height - 2 * pad),
  }));
  return { points, yMax, xMin, xMax };
}

export function polylineAttr(points: ChartPoint[]): string {
  return points.map((p) => `${p.x.toFixed(2)},${p.y.toFixed(2)}`).join(" ");
}

export function bucketSeries(buckets: Bucket[], field: keyof Bucket): {
  ts: number[];
  values: number[];
} {
  const ts: number[] = [];
  const values: number[] = [];
  for (const b of buckets) {
    const v = b[field];
    if (typeof v === "number") {
      ts.push(b.bucket_start);
      values.push(v);
    }
  }
  return { ts, values };
}

export function liveSeries(samples: LiveSample[]): { ts: number[]; values: number[] } {
  return { ts: samples.map((s) => s.ts), values: samples.map((s) => s.watts) };
}

export function consumptionSvg(
  ts: number[],
  values: number[],
  width = 560,
  height = 120,
): string {
  const geom = project(ts, values, width, height);
  if (geom.points.length === 0) {
    return `<svg viewBox="0 0 ${width} ${height}" class="chart empty"><text x="8" y="20">no data in range</text></svg>`;
  }
  const line = polylineAttr(geom.points);
  return [
    `<svg viewBox="0 0 ${width} ${height}" class="chart" preserveAspectRatio="none">`,
    `<polyline points="${line}" fill="none" stroke="currentColor" stroke-width="1.5"/>`,
    `<text x="8" y="14" class="chart-max">${geom.yMax.toFixed(1)}</text>`,
    `</svg>`,
  ].join("");
}
