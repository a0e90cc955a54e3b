"""Telemetry transport: topic grammar, wire parsing, pub/sub, and replay.

Topic grammar (site/zone/appliance are single path levels):

    em3/<site>/<zone>/<appliance>/power      {"ts": int, "w": float}
    em3/<site>/<zone>/occupancy              {"ts": int, "occ": 0|1}
    em3/<site>/<zone>/env                    {"ts": int, "t": C, "h": %, "lx": lux}
    em3/<site>/<zone>/<appliance>/set        "ON" | "OFF"

Sources are pluggable: an in-process broker (tests, loopback), JSON-lines
replay files, or a real MQTT broker via the optional paho-mqtt adapter.
Ingest normalizes messages into TelemetrySample values and enforces
per-stream timestamp order with a bounded reorder buffer: arrivals out of
order by more than the window are dropped and counted, never delivered
backwards.
"""

from __future__ import annotations

import heapq
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

from .errors import BackpressureError, ConfigurationError, MalformedMessage, ValidationError

log = logging.getLogger(__name__)

TOPIC_ROOT = "em3"
CHANNELS = ("power", "occupancy", "env", "set")

REORDER_WINDOW_S = 30
COMMAND_QUEUE_LIMIT = 100
BACKOFF_BASE_S = 1.0
BACKOFF_CAP_S = 60.0


def backoff_delay(attempt: int) -> float:
    """Exponential reconnect delay: 1, 2, 4, ... capped at 60 s."""
    if attempt < 1:
        raise ValidationError(f"attempt must be >= 1, got {attempt}")
    return min(BACKOFF_BASE_S * 2 ** (attempt - 1), BACKOFF_CAP_S)


@dataclass(frozen=True)
class TopicAddress:
    site: str
    zone: str
    appliance: str | None
    channel: str

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValidationError(f"unknown channel {self.channel!r}")
        needs_appliance = self.channel in ("power", "set")
        if needs_appliance and not self.appliance:
            raise ValidationError(f"{self.channel} topics need an appliance level")
        if not needs_appliance and self.appliance:
            raise ValidationError(f"{self.channel} topics take no appliance level")
        for part in (self.site, self.zone, self.appliance or "x"):
            if not part or "/" in part or part in ("+", "#"):
                raise ValidationError(f"bad topic level {part!r}")

    def topic(self) -> str:
        if self.appliance:
            return f"{TOPIC_ROOT}/{self.site}/{self.zone}/{self.appliance}/{self.channel}"
        return f"{TOPIC_ROOT}/{self.site}/{self.zone}/{self.channel}"

    @classmethod
    def parse(cls, topic: str) -> "TopicAddress":
        parts = topic.split("/")
        if len(parts) == 4 and parts[0] == TOPIC_ROOT and parts[3] in ("occupancy", "env"):
            return cls(site=parts[1], zone=parts[2], appliance=None, channel=parts[3])
        if len(parts) == 5 and parts[0] == TOPIC_ROOT and parts[4] in ("power", "set"):
            return cls(site=parts[1], zone=parts[2], appliance=parts[3], channel=parts[4])
        raise MalformedMessage(f"unparseable topic {topic!r}")


@dataclass(frozen=True)
class TelemetrySample:
    kind: str  # power | occupancy | environment
    site_id: str
    zone_id: str
    appliance_id: str | None
    ts: int
    watts: float | None = None
    occupied: bool | None = None
    temp_c: float | None = None
    humidity_pct: float | None = None
    lux: float | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.watts is None or self.watts < 0:
                raise MalformedMessage(f"power sample needs watts >= 0, got {self.watts}")
            if not self.appliance_id:
                raise MalformedMessage("power sample needs an appliance id")
        elif self.kind == "occupancy":
            if self.occupied is None:
                raise MalformedMessage("occupancy sample needs a boolean")
        elif self.kind == "environment":
            if self.humidity_pct is None or not 0 <= self.humidity_pct <= 100:
                raise MalformedMessage(f"humidity {self.humidity_pct} outside [0,100]")
            if self.lux is None or self.lux < 0:
                raise MalformedMessage(f"lux {self.lux} must be >= 0")
            if self.temp_c is None:
                raise MalformedMessage("environment sample needs a temperature")
        else:
            raise MalformedMessage(f"unknown sample kind {self.kind!r}")

    @property
    def stream_id(self) -> str:
        if self.kind == "power":
            return f"power/{self.site_id}/{self.zone_id}/{self.appliance_id}"
        if self.kind == "occupancy":
            return f"occupancy/{self.site_id}/{self.zone_id}"
        return f"env/{self.site_id}/{self.zone_id}"

    def value_dict(self) -> dict:
        if self.kind == "power":
            return {"w": self.watts}
        if self.kind == "occupancy":
            return {"occ": 1 if self.occupied else 0}
        return {"t": self.temp_c, "h": self.humidity_pct, "lx": self.lux}


def parse_message(topic: str, payload) -> TelemetrySample:
    """Normalize one wire message; raises MalformedMessage on any defect."""
    addr = TopicAddress.parse(topic)
    if addr.channel == "set":
        raise MalformedMessage(f"command topic {topic!r} is not telemetry")
    if isinstance(payload, (bytes, bytearray)):
        payload = payload.decode("utf-8", errors="replace")
    if isinstance(payload, str):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as e:
            raise MalformedMessage(f"payload on {topic} is not JSON: {e}")
    if not isinstance(payload, dict):
        raise MalformedMessage(f"payload on {topic} must be a JSON object")
    try:
        ts = int(payload["ts"])
    except (KeyError, TypeError, ValueError):
        raise MalformedMessage(f"payload on {topic} lacks an integer ts")
    try:
        if addr.channel == "power":
            return TelemetrySample(
                kind="power", site_id=addr.site, zone_id=addr.zone,
                appliance_id=addr.appliance, ts=ts, watts=float(payload["w"]),
            )
        if addr.channel == "occupancy":
            occ = payload["occ"]
            if occ not in (0, 1, True, False):
                raise MalformedMessage(f"occ must be 0/1, got {occ!r}")
            return TelemetrySample(
                kind="occupancy", site_id=addr.site, zone_id=addr.zone,
                appliance_id=None, ts=ts, occupied=bool(occ),
            )
        return TelemetrySample(
            kind="environment", site_id=addr.site, zone_id=addr.zone,
            appliance_id=None, ts=ts, temp_c=float(payload["t"]),
            humidity_pct=float(payload["h"]), lux=float(payload["lx"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedMessage(f"bad {addr.channel} payload on {topic}: {e}")


def topic_matches(pattern: str, topic: str) -> bool:
    """MQTT-style filter match: + is one level, # the rest."""
    pp = pattern.split("/")
    tp = topic.split("/")
    for i, p in enumerate(pp):
        if p == "#":
            return True
        if i >= len(tp):
            return False
        if p != "+" and p != tp[i]:
            return False
    return len(pp) == len(tp)


class InProcessBroker:
    """Tiny thread-safe pub/sub used by tests, replay, and loopback mode."""

    def __init__(self):
        self._lock = threading.Lock()
        self._subs: list[tuple[str, Callable[[str, object], None]]] = []
        self.published: int = 0

    def subscribe(self, topic_filter: str, callback: Callable[[str, object], None]) -> None:
        with self._lock:
            self._subs.append((topic_filter, callback))

    def publish(self, topic: str, payload) -> None:
        with self._lock:
            subs = list(self._subs)
            self.published += 1
        for pattern, cb in subs:
            if topic_matches(pattern, topic):
                cb(topic, payload)

    @property
    def connected(self) -> bool:
        return True


class ReplaySource:
    """JSON-lines event file: {"topic": ..., "ts": ..., "payload": ...}.

    File timestamps are virtual time: replay runs as fast as possible
    unless realtime pacing or an events-per-second rate is set. Malformed
    lines are counted and skipped.
    """

    def __init__(self, path: str | Path, realtime: bool = False,
                 rate_per_s: float | None = None):
        self.path = Path(path)
        if not self.path.exists():
            raise ConfigurationError(f"replay file not found: {self.path}")
        if realtime and rate_per_s:
            raise ConfigurationError("choose either realtime pacing or a rate, not both")
        self.realtime = realtime
        self.rate_per_s = rate_per_s
        self.malformed = 0
        self.replayed = 0

    def events(self) -> Iterator[tuple[str, object]]:
        with open(self.path) as f:
            for line in f:
                if not line.strip():
                    continue
                try:
                    ev = json.loads(line)
                    topic, payload = ev["topic"], ev["payload"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    self.malformed += 1
                    log.warning("skipping malformed replay line")
                    continue
                yield topic, payload

    def replay(self, publish: Callable[[str, object], None],
               stop: threading.Event | None = None) -> int:
        """Push every event through publish(topic, payload); returns count."""
        started = time.monotonic()
        first_ts = None
        for i, (topic, payload) in enumerate(self.events()):
            if stop is not None and stop.is_set():
                break
            if self.rate_per_s:
                due = started + i / self.rate_per_s
                delay = due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            elif self.realtime:
                ev_ts = payload.get("ts") if isinstance(payload, dict) else None
                if ev_ts is not None:
                    if first_ts is None:
                        first_ts = ev_ts
                    due = started + (ev_ts - first_ts)
                    delay = due - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
            publish(topic, payload)
            self.replayed += 1
        return self.replayed


class TelemetryIngest:
    """Normalizes messages and delivers per-stream samples in timestamp order.

    Out-of-order arrivals within REORDER_WINDOW_S (of stream time) are
    buffered and re-sorted; arrivals older than what was already delivered
    are dropped with a counter. flush() drains the buffers at end of input.
    """

    def __init__(self, on_sample: Callable[[TelemetrySample], None],
                 window_s: int = REORDER_WINDOW_S):
        self.on_sample = on_sample
        self.window_s = window_s
        self.malformed = 0
        self.delivered = 0
        self.dropped_late = 0
        self._pending: dict[str, list[tuple[int, int, TelemetrySample]]] = {}
        self._max_seen: dict[str, int] = {}
        self._last_delivered: dict[str, int] = {}
        self._tie = 0
        self._lock = threading.Lock()

    def accept(self, topic: str, payload) -> None:
        """Entry point for raw wire messages (broker callback signature)."""
        try:
            sample = parse_message(topic, payload)
        except MalformedMessage as e:
            self.malformed += 1
            log.warning("malformed message on %s: %s", topic, e)
            return
        self.push(sample)

    def push(self, sample: TelemetrySample) -> None:
        with self._lock:
            stream = sample.stream_id
            last = self._last_delivered.get(stream)
            if last is not None and sample.ts < last:
                self.dropped_late += 1
                return
            heap = self._pending.setdefault(stream, [])
            self._tie += 1
            heapq.heappush(heap, (sample.ts, self._tie, sample))
            seen = self._max_seen.get(stream)
            self._max_seen[stream] = sample.ts if seen is None else max(seen, sample.ts)
            release = self._max_seen[stream] - self.window_s
            out = []
            while heap and heap[0][0] <= release:
                out.append(heapq.heappop(heap)[2])
        for s in out:
            self._deliver(s)

    def _deliver(self, sample: TelemetrySample) -> None:
        self._last_delivered[sample.stream_id] = sample.ts
        self.delivered += 1
        self.on_sample(sample)

    def flush(self) -> None:
        """Deliver everything still buffered, in order (end of input)."""
        with self._lock:
            out = []
            for stream in sorted(self._pending):
                heap = self._pending[stream]
                while heap:
                    out.append(heapq.heappop(heap)[2])
        for s in out:
            self._deliver(s)


def subscribe(source, topic_filter: str, on_sample: Callable[[TelemetrySample], None],
              window_s: int = REORDER_WINDOW_S) -> TelemetryIngest:
    """Wire a broker-like source (subscribe(filter, cb)) into an ingest."""
    ingest = TelemetryIngest(on_sample, window_s=window_s)
    source.subscribe(topic_filter, ingest.accept)
    return ingest


class CommandPublisher:
    """Publishes ON/OFF to set topics; queues up to a bound while offline."""

    def __init__(self, broker, queue_limit: int = COMMAND_QUEUE_LIMIT):
        self.broker = broker
        self.queue_limit = queue_limit
        self._queue: list[tuple[str, str]] = []
        self._lock = threading.Lock()

    def publish_command(self, address: TopicAddress, command: str) -> bool:
        """Returns True when sent, False when queued for later delivery."""
        if address.channel != "set":
            raise ValidationError(f"commands go to set topics, not {address.channel}")
        if command not in ("ON", "OFF"):
            raise ValidationError(f"command must be ON or OFF, got {command!r}")
        topic = address.topic()
        with self._lock:
            if self.broker is not None and getattr(self.broker, "connected", False):
                self._drain_locked()
                self.broker.publish(topic, command)
                return True
            if len(self._queue) >= self.queue_limit:
                raise BackpressureError(
                    f"command queue full ({self.queue_limit}); broker unavailable"
                )
            self._queue.append((topic, command))
            return False

    def _drain_locked(self):
        while self._queue:
            topic, command = self._queue.pop(0)
            self.broker.publish(topic, command)

    def drain(self) -> int:
        """Flush queued commands after reconnect; returns how many went out."""
        with self._lock:
            if self.broker is None or not getattr(self.broker, "connected", False):
                return 0
            n = len(self._queue)
            self._drain_locked()
            return n

    @property
    def queued(self) -> int:
        with self._lock:
            return len(self._queue)


class MqttBridge:
    """Adapter for a real MQTT broker through paho-mqtt (optional dependency).

    Mirrors the InProcessBroker surface (subscribe/publish/connected) and
    reconnects with exponential backoff, surfacing state via `connected`.
    """

    def __init__(self, host: str, port: int = 1883, client_id: str = "emedge",
                 keepalive: int = 60):
        try:
            import paho.mqtt.client as mqtt  # noqa: F401
        except ImportError as e:
            raise ConfigurationError(
                "paho-mqtt is required for a real MQTT broker; install it or "
                "use a replay file / in-process broker"
            ) from e
        import paho.mqtt.client as mqtt

        self._mqtt = mqtt
        self._client = mqtt.Client(client_id=client_id, clean_session=True)
        self._host, self._port, self._keepalive = host, port, keepalive
        self._subs: list[tuple[str, Callable]] = []
        self.connected = False
        self._client.on_connect = self._on_connect
        self._client.on_disconnect = self._on_disconnect
        self._client.on_message = self._on_message
        self._client.reconnect_delay_set(min_delay=BACKOFF_BASE_S, max_delay=BACKOFF_CAP_S)

    def start(self):
        self._client.connect_async(self._host, self._port, self._keepalive)
        self._client.loop_start()

    def stop(self):
        self._client.loop_stop()
        self._client.disconnect()

    def _on_connect(self, client, userdata, flags, rc):
        self.connected = rc == 0
        for pattern, _ in self._subs:
            client.subscribe(pattern, qos=1)  # at-least-once

    def _on_disconnect(self, client, userdata, rc):
        self.connected = False

    def _on_message(self, client, userdata, msg):
        for pattern, cb in self._subs:
            if topic_matches(pattern, msg.topic):
                cb(msg.topic, msg.payload)

    def subscribe(self, topic_filter: str, callback: Callable) -> None:
        self._subs.append((topic_filter, callback))
        if self.connected:
            self._client.subscribe(topic_filter, qos=1)

    def publish(self, topic: str, payload) -> None:
        self._client.publish(topic, payload, qos=0)
