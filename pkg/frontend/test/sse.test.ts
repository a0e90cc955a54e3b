import assert from "node:assert/strict";
import { test } from "node:test";

import { frameToEvent, parseSseBuffer } from "../src/sse.js";

test("parses complete frames and keeps the tail", () => {
  const { frames, rest } = parseSseBuffer(
    'id: 1\nevent: sample\ndata: {"a":1}\n\nid: 2\nevent: label\ndata: {"b":2}\n\nid: 3\nev',
  );
  assert.equal(frames.length, 2);
  assert.deepEqual(frames[0], { id: "1", event: "sample", data: '{"a":1}' });
  assert.deepEqual(frames[1], { id: "2", event: "label", data: '{"b":2}' });
  assert.equal(rest, "id: 3\nev");
});

test("chunk split mid-frame reassembles", () => {
  const whole = 'id: 7\nevent: recommendation\ndata: {"x":"y"}\n\n';
  for (let cut = 1; cut < whole.length - 1; cut++) {
    const first = parseSseBuffer(whole.slice(0, cut));
    assert.equal(first.frames.length, 0);
    const second = parseSseBuffer(first.rest + whole.slice(cut));
    assert.equal(second.frames.length, 1);
    assert.equal(second.frames[0].id, "7");
    assert.equal(second.rest, "");
  }
});

test("comment keepalives are dropped", () => {
  const { frames, rest } = parseSseBuffer(": keepalive\n\nid: 4\nevent: health\ndata: {}\n\n");
  assert.equal(frames.length, 1);
  assert.equal(frames[0].event, "health");
  assert.equal(rest, "");
});

test("multi-line data joins with newlines", () => {
  const { frames } = parseSseBuffer("id: 1\nevent: x\ndata: a\ndata: b\n\n");
  assert.equal(frames[0].data, "a\nb");
});

test("frameToEvent parses JSON payload and sequence", () => {
  const ev = frameToEvent({ id: "42", event: "sample", data: '{"ts":9}' });
  assert.deepEqual(ev, { seq: 42, kind: "sample", payload: { ts: 9 } });
  assert.equal(frameToEvent({ id: "42", event: "x", data: "not json" }), null);
  assert.equal(frameToEvent({ event: "x", data: "{}" }), null); // no id
});

test("crlf line endings are tolerated", () => {
  const { frames } = parseSseBuffer('id: 1\r\nevent: sample\r\ndata: {"a":1}\r\n\n');
  assert.equal(frames.length, 1);
  assert.equal(frames[0].data, '{"a":1}');
});
