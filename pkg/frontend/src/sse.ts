// Server-sent events over fetch streaming. Browsers have EventSource, but
// reading the stream manually keeps one code path for the browser and the
// node test-runner, and lets us resume precisely with Last-Event-ID.

import type { StreamEvent } from "./types.js";

export interface SseFrame {
  id?: string;
  event: string;
  data: string;
}

export interface ParseResult {
  frames: SseFrame[];
  rest: string; // unterminated tail, carried into the next chunk
}

// Incremental frame parser: feed it buffered text, get completed frames
// back plus the remainder. Comment lines (":") are dropped.
export function parseSseBuffer(buffer: string): ParseResult {
  const frames: SseFrame[] = [];
  const parts = buffer.split("\n\n");
  const rest = parts.pop() ?? "";
  for (const block of parts) {
    const frame: SseFrame = { event: "message", data: "" };
    const dataLines: string[] = [];
    for (const rawLine of block.split("\n")) {
      const line = rawLine.endsWith("\r") ? rawLine.slice(0, -1) : rawLine;
      if (!line || line.startsWith(":")) continue;
      const colon = line.indexOf(":");
      const field = colon < 0 ? line : line.slice(0, colon);
      let value = colon < 0 ? "" : line.slice(colon + 1);
      if (value.startsWith(" ")) value = value.slice(1);
      if (field === "id") frame.id = value;
      else if (field === "event") frame.event = value;
      else if (field === "data") dataLines.push(value);
    }
    frame.data = dataLines.join("\n");
    if (frame.id !== undefined || frame.data !== "" || frame.event !== "message") {
      frames.push(frame);
    }
  }
  return { frames, rest };
}

export function frameToEvent(frame: SseFrame): StreamEvent | null {
  if (!frame.id) return null;
  let payload: Record<string, unknown>;
  try {
    payload = JSON.parse(frame.data) as Record<string, unknown>;
  } catch {
    return null;
  }
  return { seq: Number(frame.id), kind: frame.event, payload };
}

export type StreamStatus = "connecting" | "live" | "stale";

export interface EventStreamOptions {
  lastEventId?: number;
  onEvent: (ev: StreamEvent) => void;
  onStatus?: (status: StreamStatus) => void;
  fetchImpl?: typeof fetch;
  maxBackoffMs?: number;
}

export class EventStream {
  private closed = false;
  private attempt = 0;
  private controller: AbortController | null = null;
  lastEventId: number;

  constructor(private url: string, private opts: EventStreamOptions) {
    this.lastEventId = opts.lastEventId ?? 0;
  }

  start(): void {
    void this.loop();
  }

  close(): void {
    this.closed = true;
    this.controller?.abort();
  }

  private status(s: StreamStatus) {
    this.opts.onStatus?.(s);
  }

  private async loop(): Promise<void> {
    const fetchImpl = this.opts.fetchImpl ?? fetch;
    while (!this.closed) {
      this.status(this.attempt === 0 ? "connecting" : "stale");
      try {
        this.controller = new AbortController();
        const resp = await fetchImpl(this.url, {
          headers: { "Last-Event-ID": String(this.lastEventId) },
          signal: this.controller.signal,
        });
        if (!resp.ok || !resp.body) throw new Error(`stream ${resp.status}`);
        this.status("live");
        this.attempt = 0;
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        while (!this.closed) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          const { frames, rest } = parseSseBuffer(buffer);
          buffer = rest;
          for (const frame of frames) {
            const ev = frameToEvent(frame);
            if (ev) {
              this.lastEventId = ev.seq;
              this.opts.onEvent(ev);
            }
          }
        }
        if (this.closed) {
          void reader.cancel().catch(() => undefined);
          return;
        }
      } catch {
        // fall through to reconnect
      }
      if (this.closed) return;
      this.status("stale");
      this.attempt += 1;
      const delay = Math.min(1000 * 2 ** (this.attempt - 1), this.opts.maxBackoffMs ?? 30_000);
      await new Promise((resolve) => setTimeout(resolve, delay));
    }
  }
}
