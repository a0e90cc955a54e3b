import assert from "node:assert/strict";
import { test } from "node:test";

import {
  formatCostPerHour,
  formatLabel,
  formatLux,
  formatWatts,
  labelClass,
} from "../src/format.js";

test("watts formatting switches to kW at 1000", () => {
  assert.equal(formatWatts(60), "60.0 W");
  assert.equal(formatWatts(1200), "1.20 kW");
  assert.equal(formatWatts(null), "–");
});

test("labels map to the five class names", () => {
  assert.equal(formatLabel(0), "good usage");
  assert.equal(formatLabel(4), "while outside");
  assert.equal(formatLabel(null), "no data");
  assert.equal(labelClass(4), "label-away");
});

test("cost and lux formatting", () => {
  assert.equal(formatCostPerHour(0.12), "0.1200/h");
  assert.equal(formatLux(9500), "9.5 klx");
  assert.equal(formatLux(300), "300 lx");
});
