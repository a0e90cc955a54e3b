"""HTTP API and live event stream over stdlib http.server.

Endpoints (JSON unless noted):

    GET  /api/appliances                        specs + latest power/label
    GET  /api/consumption?stream|appliance&from&to   5-min buckets
    GET  /api/environment?zone&from&to          5-min env buckets
    GET  /api/recommendations[?status=]         recommendation list
    POST /api/recommendations/<id>/feedback     {"verdict": accept|reject|ignore}
    POST /api/appliances/<id>/command           {"state": "ON"|"OFF"}
    GET  /api/events                            server-sent events, resumable
                                                via Last-Event-ID
    GET  /api/health                            pipeline counters
    GET  /<static>                              dashboard assets when configured

Errors: 404 unknown id/path, 409 double feedback, 422 invalid body.
"""

from __future__ import annotations

import json
import logging
import queue
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .errors import (
    BackpressureError,
    ConfigurationError,
    ConflictError,
    NotFoundError,
    ValidationError,
)

log = logging.getLogger(__name__)

SSE_HEARTBEAT_S = 15.0

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".json": "application/json",
    ".map": "application/json",
}


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    service = None  # bound by make_http_server

    # -- plumbing -----------------------------------------------------------

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    def _send_json(self, code: int, obj) -> None:
        body = json.dumps(obj, sort_keys=True).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_empty(self, code: int) -> None:
        self.send_response(code)
        self.send_header("Content-Length", "0")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()

    def _read_json_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        try:
            body = json.loads(raw.decode() or "{}")
        except json.JSONDecodeError:
            raise ValidationError("request body is not valid JSON")
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        return body

    def _query(self) -> dict:
        return {k: v[-1] for k, v in parse_qs(urlparse(self.path).query).items()}

    def _int_param(self, params: dict, name: str, default=None) -> int:
        if name not in params:
            if default is None:
                raise ValidationError(f"missing query parameter {name}")
            return default
        try:
            return int(params[name])
        except ValueError:
            raise ValidationError(f"query parameter {name} must be an integer")

    # -- routing ------------------------------------------------------------

    def do_GET(self):
        path = urlparse(self.path).path
        try:
            if path == "/api/appliances":
                return self._send_json(200, self._appliances())
            if path == "/api/consumption":
                return self._send_json(200, self._consumption())
            if path == "/api/environment":
                return self._send_json(200, self._environment())
            if path == "/api/recommendations":
                status = self._query().get("status")
                recs = self.service.engine.recommendations(status)
                return self._send_json(200, [r.to_dict() for r in recs])
            if path == "/api/health":
                return self._send_json(200, self.service.health())
            if path == "/api/events":
                return self._stream_events()
            return self._static(path)
        except ValidationError as e:
            self._send_json(422, {"error": str(e)})
        except NotFoundError as e:
            self._send_json(404, {"error": str(e)})
        except (BrokenPipeError, ConnectionResetError):
            pass

    def do_HEAD(self):
        # HEAD mirrors GET status/headers for probes and proxies
        path = urlparse(self.path).path
        if path.startswith("/api/"):
            self._send_empty(200 if path != "/api/events" else 405)
            return
        try:
            static_dir = self.service.config.static_dir
            root = Path(static_dir).resolve() if static_dir else None
            rel = path.lstrip("/") or "index.html"
            target = (root / rel).resolve() if root else None
            if target and target.is_dir():
                target = target / "index.html"
            if root and target and (root in target.parents or target == root) and target.is_file():
                self.send_response(200)
                self.send_header(
                    "Content-Type", _CONTENT_TYPES.get(target.suffix, "application/octet-stream"))
                self.send_header("Content-Length", str(target.stat().st_size))
                self.end_headers()
            else:
                self._send_empty(404)
        except OSError:
            self._send_empty(404)

    def do_POST(self):
        path = urlparse(self.path).path
        try:
            parts = [p for p in path.split("/") if p]
            if len(parts) == 4 and parts[:2] == ["api", "recommendations"] and parts[3] == "feedback":
                return self._feedback(parts[2])
            if len(parts) == 4 and parts[:2] == ["api", "appliances"] and parts[3] == "command":
                return self._command(parts[2])
            self._send_json(404, {"error": f"no such endpoint {path}"})
        except ValidationError as e:
            self._send_json(422, {"error": str(e)})
        except NotFoundError as e:
            self._send_json(404, {"error": str(e)})
        except ConflictError as e:
            self._send_json(409, {"error": str(e)})
        except BackpressureError as e:
            self._send_json(503, {"error": str(e)})
        except (BrokenPipeError, ConnectionResetError):
            pass

    # -- endpoints ----------------------------------------------------------

    def _appliances(self):
        svc = self.service
        out = []
        for aid in sorted(svc.specs):
            spec = svc.specs[aid]
            latest = svc.pipeline._latest_power.get(aid)
            out.append({
                "id": spec.id, "name": spec.name, "zone": spec.zone_id,
                "dacr_max_w": spec.dacr_max_w, "dacr_min_w": spec.dacr_min_w,
                "dspc_w": spec.dspc_w, "dot_s": spec.dot_s,
                "requires_presence": spec.requires_presence,
                "latest": None if latest is None else {
                    "watts": latest.watts, "label": latest.label, "ts": latest.ts,
                },
            })
        return out

    def _resolve_stream(self, default: str, kind: str, leaf: str) -> str:
        # configured site/zone may differ from what the wire carried; fall
        # back to the one stream that actually holds this device/zone
        svc = self.service
        if svc.store.latest(default) is not None or not leaf:
            return default
        matches = [s for s in svc.store.streams()
                   if s.startswith(kind + "/") and s.endswith("/" + leaf)]
        return matches[0] if len(matches) == 1 else default

    def _consumption(self):
        params = self._query()
        svc = self.service
        stream = params.get("stream")
        if not stream and "appliance" in params:
            aid = params["appliance"]
            spec = svc.specs.get(aid)
            if spec is None:
                raise NotFoundError(f"unknown appliance {aid!r}")
            stream = self._resolve_stream(
                f"power/{svc.config.site}/{spec.zone_id}/{aid}", "power", aid)
        if not stream:
            raise ValidationError("need stream= or appliance=")
        from_ts = self._int_param(params, "from", 0)
        to_ts = self._int_param(params, "to", 2**62)
        buckets = svc.store.aggregate_range(stream, from_ts, to_ts)
        return [b.to_dict() for b in buckets]

    def _environment(self):
        params = self._query()
        zone = params.get("zone")
        if not zone:
            raise ValidationError("need zone=")
        stream = self._resolve_stream(
            f"env/{self.service.config.site}/{zone}", "env", zone)
        from_ts = self._int_param(params, "from", 0)
        to_ts = self._int_param(params, "to", 2**62)
        return [b.to_dict() for b in self.service.store.aggregate_range(stream, from_ts, to_ts)]

    def _feedback(self, rec_id: str):
        body = self._read_json_body()
        verdict = body.get("verdict")
        if verdict not in ("accept", "reject", "ignore"):
            raise ValidationError(f"verdict must be accept/reject/ignore, got {verdict!r}")
        svc = self.service
        stats = svc.engine.record_feedback(rec_id, verdict, now=svc.pipeline.now())
        svc.bus.publish("feedback", {"recommendation_id": rec_id, "verdict": verdict,
                                     "stats": stats.to_dict()})
        self._send_empty(204)

    def _command(self, appliance_id: str):
        body = self._read_json_body()
        state = body.get("state")
        if state not in ("ON", "OFF"):
            raise ValidationError(f"state must be ON or OFF, got {state!r}")
        svc = self.service
        if appliance_id not in svc.specs:
            raise NotFoundError(f"unknown appliance {appliance_id!r}")
        svc._publish_off(appliance_id, state)
        self._send_json(202, {"relayed": True})

    # -- live events ----------------------------------------------------------

    def _stream_events(self):
        svc = self.service
        params = self._query()
        last_id = self.headers.get("Last-Event-ID") or params.get("last_event_id")
        last_seq = None
        if last_id is not None:
            try:
                last_seq = int(last_id)
            except ValueError:
                raise ValidationError("Last-Event-ID must be an integer")
        q, backlog = svc.bus.subscribe(last_event_id=last_seq)
        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        # chunked framing so each event reaches the client as soon as it is
        # written (a raw stream would sit in client read buffers)
        self.send_header("Transfer-Encoding", "chunked")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()

        def write_chunk(data: bytes):
            self.wfile.write(f"{len(data):X}\r\n".encode() + data + b"\r\n")
            self.wfile.flush()

        try:
            for event in backlog:
                write_chunk(event.to_sse().encode())
            idle = 0.0
            while not getattr(self.server, "stopping", False):
                try:
                    event = q.get(timeout=0.25)
                except queue.Empty:
                    idle += 0.25
                    if idle >= SSE_HEARTBEAT_S:
                        write_chunk(b": keepalive\n\n")
                        idle = 0.0
                    continue
                idle = 0.0
                write_chunk(event.to_sse().encode())
            self.wfile.write(b"0\r\n\r\n")
            self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            svc.bus.unsubscribe(q)
            self.close_connection = True

    # -- static assets ----------------------------------------------------------

    def _static(self, path: str):
        static_dir = self.service.config.static_dir
        if not static_dir:
            raise NotFoundError(f"no such endpoint {path}")
        root = Path(static_dir).resolve()
        rel = path.lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if root not in target.parents and target != root:
            raise NotFoundError("path escapes static root")
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            raise NotFoundError(f"no such file {path}")
        body = target.read_bytes()
        self.send_response(200)
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


def make_http_server(service) -> ThreadingHTTPServer:
    handler = type("BoundApiHandler", (ApiHandler,), {"service": service})
    try:
        server = ThreadingHTTPServer(
            (service.config.http_host, service.config.http_port), handler
        )
    except OSError as e:
        raise ConfigurationError(
            f"cannot bind {service.config.http_host}:{service.config.http_port}: {e}"
        )
    server.stopping = False
    server.daemon_threads = True
    return server
