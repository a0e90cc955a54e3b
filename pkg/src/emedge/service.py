"""Service wiring: ingest -> store -> label -> triggers -> live events.

The pipeline consumes normalized telemetry samples, persists them, labels
power samples with the rule engine, keeps a live snapshot of the latest
readings, and runs trigger evaluation in stream time (the sample's own
timestamp), so replayed history behaves exactly like live operation.
Everything observable is published on an in-process event bus with
monotonically increasing sequence numbers; the HTTP layer exposes that bus
as a server-sent event stream with Last-Event-ID resume.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass

from .appliances import ApplianceSpec, default_catalog, load_specs
from .config import ServiceConfig
from .errors import ConfigurationError
from .micromoment import ApplianceState, label_sample
from .recommender import (
    ApplianceReading,
    EnvReading,
    RecommendationEngine,
    Snapshot,
    ZoneReading,
)
from .store import TelemetryStore
from .telemetry import (
    CommandPublisher,
    InProcessBroker,
    ReplaySource,
    TelemetryIngest,
    TelemetrySample,
    TopicAddress,
)

log = logging.getLogger(__name__)

EVENT_KINDS = ("sample", "label", "recommendation", "feedback", "health")


@dataclass(frozen=True)
class ApiEvent:
    seq: int
    kind: str
    payload: dict

    def to_sse(self) -> str:
        data = json.dumps(self.payload, sort_keys=True, separators=(",", ":"))
        return f"id: {self.seq}\nevent: {self.kind}\ndata: {data}\n\n"


class EventBus:
    """Fan-out with a replay ring for reconnecting consumers."""

    def __init__(self, buffer_size: int = 4096):
        self._lock = threading.Lock()
        self._seq = 0
        self._ring: deque[ApiEvent] = deque(maxlen=buffer_size)
        self._subs: list[queue.Queue] = []

    def publish(self, kind: str, payload: dict) -> ApiEvent:
        with self._lock:
            self._seq += 1
            event = ApiEvent(seq=self._seq, kind=kind, payload=payload)
            self._ring.append(event)
            subs = list(self._subs)
        for q in subs:
            try:
                q.put_nowait(event)
            except queue.Full:
                pass  # slow consumer: it can resume from the ring by seq
        return event

    def subscribe(self, last_event_id: int | None = None,
                  max_queue: int = 10000) -> tuple[queue.Queue, list[ApiEvent]]:
        q: queue.Queue = queue.Queue(maxsize=max_queue)
        with self._lock:
            backlog = [e for e in self._ring if last_event_id is not None and e.seq > last_event_id]
            self._subs.append(q)
        return q, backlog

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subs:
                self._subs.remove(q)

    @property
    def seq(self) -> int:
        with self._lock:
            return self._seq


class Pipeline:
    """Serialized sample consumer feeding store, labeler, and triggers."""

    def __init__(self, config: ServiceConfig, specs: dict[str, ApplianceSpec],
                 store: TelemetryStore, engine: RecommendationEngine, bus: EventBus):
        self.config = config
        self.specs = specs
        self.store = store
        self.engine = engine
        self.bus = bus
        self.ingest = TelemetryIngest(self.on_sample)
        self._lock = threading.Lock()
        self._label_state: dict[str, ApplianceState] = {}
        self._latest_power: dict[str, ApplianceReading] = {}
        self._latest_occ: dict[str, ZoneReading] = {}
        self._latest_env: dict[str, EnvReading] = {}
        self.last_ts: int | None = None
        self.labels_emitted = 0

    # a fresh snapshot keeps only readings within the staleness window
    def _snapshot(self, now: int) -> Snapshot:
        window = self.engine.config.snapshot_max_age_s
        return Snapshot(
            appliances={k: v for k, v in self._latest_power.items() if now - v.ts <= window},
            occupancy={k: v for k, v in self._latest_occ.items() if now - v.ts <= window},
            environment={k: v for k, v in self._latest_env.items() if now - v.ts <= window},
            user_id=self.config.user_id,
        )

    def on_sample(self, sample: TelemetrySample) -> None:
        with self._lock:
            self.store.append_sample(sample)
            self.last_ts = sample.ts if self.last_ts is None else max(self.last_ts, sample.ts)
            self.bus.publish("sample", {
                "stream": sample.stream_id, "ts": sample.ts, "value": sample.value_dict(),
            })
            if sample.kind == "occupancy":
                self._latest_occ[sample.zone_id] = ZoneReading(
                    zone=sample.zone_id, occupied=bool(sample.occupied), ts=sample.ts)
            elif sample.kind == "environment":
                self._latest_env[sample.zone_id] = EnvReading(
                    zone=sample.zone_id, temp_c=sample.temp_c,
                    humidity_pct=sample.humidity_pct, lux=sample.lux, ts=sample.ts)
            elif sample.kind == "power":
                spec = self.specs.get(sample.appliance_id)
                if spec is None:
                    log.warning("power sample for unknown appliance %s", sample.appliance_id)
                    return
                # prefer the zone the wire reported; the catalog may lag a move
                occ = self._latest_occ.get(sample.zone_id) or self._latest_occ.get(spec.zone_id)
                occupied = occ.occupied if occ is not None else True
                state = self._label_state.get(spec.id, ApplianceState())
                label, state = label_sample(spec, state, sample.watts, occupied, sample.ts)
                self._label_state[spec.id] = state
                self.store.append(
                    f"label/{sample.site_id}/{sample.zone_id}/{spec.id}",
                    sample.ts, {"label": int(label)},
                )
                self.labels_emitted += 1
                self._latest_power[spec.id] = ApplianceReading(
                    spec=spec, watts=sample.watts, label=int(label), ts=sample.ts)
                self.bus.publish("label", {
                    "appliance_id": spec.id, "ts": sample.ts, "label": int(label),
                })
            fired = self.engine.evaluate_triggers(self._snapshot(sample.ts), now=sample.ts)
        for rec in fired:
            self.bus.publish("recommendation", rec.to_dict())

    def now(self) -> int:
        return self.last_ts if self.last_ts is not None else int(time.time())

    def flush(self) -> None:
        self.ingest.flush()

    def counters(self) -> dict:
        return {
            "delivered": self.ingest.delivered,
            "malformed": self.ingest.malformed,
            "dropped_late": self.ingest.dropped_late,
            "labels": self.labels_emitted,
            "bus_seq": self.bus.seq,
            "last_ts": self.last_ts,
        }


class EdgeService:
    """Process entry point: wires store, pipeline, broker/replay, and HTTP."""

    def __init__(self, config: ServiceConfig, specs: dict[str, ApplianceSpec] | None = None):
        self.config = config
        if specs is not None:
            self.specs = dict(specs)
        elif config.appliance_spec_file:
            self.specs = load_specs(config.appliance_spec_file)
        else:
            self.specs = default_catalog()
        self.store = TelemetryStore(config.store_path)
        self.bus = EventBus(buffer_size=config.event_buffer)
        self.broker = InProcessBroker()
        if config.broker_host:
            from .telemetry import MqttBridge  # optional dependency

            self.broker = MqttBridge(config.broker_host, config.broker_port)
        self.commands = CommandPublisher(self.broker)
        self.engine = RecommendationEngine(
            config.recommender_config(), store=self.store,
            command_publisher=self._publish_off,
        )
        self.pipeline = Pipeline(config, self.specs, self.store, self.engine, self.bus)
        self.broker.subscribe("em3/#", self.pipeline.ingest.accept)
        self._replay_thread: threading.Thread | None = None
        self._replay_stop = threading.Event()
        self._replay_source: ReplaySource | None = None
        self._http = None
        self.started_at = time.time()

    def _publish_off(self, appliance_id: str, command: str) -> None:
        spec = self.specs.get(appliance_id)
        if spec is None:
            raise ConfigurationError(f"unknown appliance {appliance_id}")
        addr = TopicAddress(site=self.config.site, zone=spec.zone_id,
                            appliance=appliance_id, channel="set")
        self.commands.publish_command(addr, command)

    # -- lifecycle -----------------------------------------------------------

    def start(self, serve_http: bool = True) -> None:
        if hasattr(self.broker, "start"):
            self.broker.start()
        if serve_http:
            from .server import make_http_server

            self._http = make_http_server(self)
            threading.Thread(target=self._http.serve_forever,
                             name="emedge-http", daemon=True).start()
        if self.config.replay_file:
            self.start_replay()

    def start_replay(self) -> ReplaySource:
        if self._replay_thread is not None and self._replay_thread.is_alive():
            raise ConfigurationError("replay already running")
        self._replay_source = ReplaySource(
            self.config.replay_file,
            realtime=self.config.replay_realtime,
            rate_per_s=self.config.replay_rate_per_s or None,
        )
        self._replay_stop.clear()

        def run():
            self._replay_source.replay(self.broker.publish, stop=self._replay_stop)
            self.pipeline.flush()
            self.bus.publish("health", {"replay_done": True,
                                        **self.pipeline.counters()})

        self._replay_thread = threading.Thread(target=run, name="emedge-replay", daemon=True)
        self._replay_thread.start()
        return self._replay_source

    def wait_replay(self, timeout: float | None = None) -> bool:
        if self._replay_thread is None:
            return True
        self._replay_thread.join(timeout)
        return not self._replay_thread.is_alive()

    def stop(self) -> None:
        """Graceful shutdown: stop sources, drain in-flight, close the store."""
        self._replay_stop.set()
        if self._replay_thread is not None:
            self._replay_thread.join(timeout=10)
        if hasattr(self.broker, "stop"):
            self.broker.stop()
        self.pipeline.flush()
        if self._http is not None:
            self._http.stopping = True
            self._http.shutdown()
            self._http.server_close()
            self._http = None
        self.store.close()

    @property
    def http_port(self) -> int:
        if self._http is None:
            raise ConfigurationError("HTTP server not running")
        return self._http.server_address[1]

    def health(self) -> dict:
        replay = {}
        if self._replay_source is not None:
            replay = {
                "replayed": self._replay_source.replayed,
                "replay_malformed": self._replay_source.malformed,
                "replay_running": bool(self._replay_thread and self._replay_thread.is_alive()),
            }
        return {
            "uptime_s": time.time() - self.started_at,
            "store_healthy": self.store.healthy,
            "store": dict(self.store.counters),
            "pipeline": self.pipeline.counters(),
            "engine": dict(self.engine.health),
            "feedback_stats": [s.to_dict() for s in self.engine.feedback_stats()],
            "broker_connected": bool(getattr(self.broker, "connected", False)),
            "commands_queued": self.commands.queued,
            **replay,
        }
