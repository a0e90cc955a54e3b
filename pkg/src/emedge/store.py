"""Embedded persistence for telemetry, aggregates, and the knowledge base.

Layout under the store root:

    segments/<stream>.jsonl        append-only raw sample log (live data)
    aggregates/<stream>.jsonl      materialized 5-min buckets for archived ranges
    archive/<stream>/<yyyy-mm-dd>.jsonl.gz   compressed raw samples, cold
    kb.jsonl                       append-only knowledge-base log
    meta.json                      per-stream archive horizon

Streams are named "<kind>/<site>/<zone>[/<appliance>]" with kind one of
power, occupancy, env, label. Raw appends are durable on return (OS-level
write + flush); the in-memory index is rebuilt from the segment files on
open, tolerating a torn trailing line.

Aggregation uses sample-hold integration capped at the bucket edge: sample
i contributes value_i over [t_i, min(t_{i+1}, bucket_end(t_i))), and the
final sample of a stream holds to the end of its own bucket. Summed bucket
energy therefore equals the raw sample-hold integral exactly.
"""

from __future__ import annotations

import gzip
import json
import time
from bisect import bisect_left
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from threading import RLock

from .errors import NotFoundError, StorageError, ValidationError

BUCKET_S = 300

KB_KINDS = ("preference", "habit_rule", "recommendation", "feedback_stat")

# Retention defaults: raw samples a few months, presence aggregates a few
# weeks, power/env aggregates indefinitely.
RAW_RETENTION_S = 90 * 86400
OCCUPANCY_AGG_RETENTION_S = 21 * 86400


def bucket_start(ts: int) -> int:
    return int(ts) - int(ts) % BUCKET_S


@dataclass
class AggregateBucket:
    stream: str
    bucket_start: int
    sample_count: int
    mean_watts: float | None = None
    max_watts: float | None = None
    energy_wh: float | None = None
    occupancy_fraction: float | None = None
    temp_c_mean: float | None = None
    humidity_mean: float | None = None
    lux_mean: float | None = None

    def to_dict(self) -> dict:
        d = {"stream": self.stream, "bucket_start": self.bucket_start,
             "sample_count": self.sample_count}
        for k in ("mean_watts", "max_watts", "energy_wh", "occupancy_fraction",
                  "temp_c_mean", "humidity_mean", "lux_mean"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AggregateBucket":
        return cls(
            stream=d["stream"], bucket_start=d["bucket_start"],
            sample_count=d["sample_count"],
            mean_watts=d.get("mean_watts"), max_watts=d.get("max_watts"),
            energy_wh=d.get("energy_wh"),
            occupancy_fraction=d.get("occupancy_fraction"),
            temp_c_mean=d.get("temp_c_mean"), humidity_mean=d.get("humidity_mean"),
            lux_mean=d.get("lux_mean"),
        )


@dataclass(frozen=True)
class KnowledgeRecord:
    kind: str
    key: str
    value: dict
    updated_at: float


class _Stream:
    __slots__ = ("ts", "values")

    def __init__(self):
        self.ts: list[int] = []
        self.values: list[dict] = []


def _stream_file(stream: str) -> str:
    return stream.replace("/", "__") + ".jsonl"


def _read_jsonl_tolerant(path: Path) -> list[dict]:
    """Parse a JSON-lines file, dropping a torn final line (crash artifact)."""
    out = []
    raw_lines = path.read_text().splitlines()
    for i, line in enumerate(raw_lines):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(raw_lines) - 1:
                break
            raise StorageError(f"corrupt record mid-file in {path} at line {i + 1}")
    return out


class TelemetryStore:
    """Single-writer store; concurrent readers see a consistent snapshot."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = RLock()
        self._streams: dict[str, _Stream] = {}
        self._agg: dict[str, dict[int, AggregateBucket]] = {}
        self._horizon: dict[str, int] = {}  # stream -> archive horizon ts
        self._kb: dict[tuple[str, str], KnowledgeRecord] = {}
        self._handles: dict[str, object] = {}
        self._kb_handle = None
        self.counters = {"appended": 0, "duplicates": 0, "dropped_old": 0}
        self.healthy = True
        self._open()

    # -- lifecycle ---------------------------------------------------------

    def _open(self):
        try:
            (self.root / "segments").mkdir(parents=True, exist_ok=True)
            (self.root / "aggregates").mkdir(parents=True, exist_ok=True)
            (self.root / "archive").mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise StorageError(f"cannot create store at {self.root}: {e}")
        meta_path = self.root / "meta.json"
        if meta_path.exists():
            self._horizon = {
                k: int(v) for k, v in json.loads(meta_path.read_text()).get("horizon", {}).items()
            }
        for seg in sorted((self.root / "segments").glob("*.jsonl")):
            for rec in _read_jsonl_tolerant(seg):
                self._index_sample(rec["stream"], int(rec["ts"]), rec["v"], count=False)
        for aggf in sorted((self.root / "aggregates").glob("*.jsonl")):
            for rec in _read_jsonl_tolerant(aggf):
                b = AggregateBucket.from_dict(rec)
                self._agg.setdefault(b.stream, {})[b.bucket_start] = b
        kb_path = self.root / "kb.jsonl"
        if kb_path.exists():
            for rec in _read_jsonl_tolerant(kb_path):
                self._kb[(rec["kind"], rec["key"])] = KnowledgeRecord(
                    kind=rec["kind"], key=rec["key"], value=rec["value"],
                    updated_at=rec["updated_at"],
                )

    def close(self):
        with self._lock:
            for h in self._handles.values():
                h.close()
            self._handles.clear()
            if self._kb_handle is not None:
                self._kb_handle.close()
                self._kb_handle = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- raw samples -------------------------------------------------------

    def _index_sample(self, stream: str, ts: int, value: dict, count: bool = True):
        s = self._streams.setdefault(stream, _Stream())
        if s.ts and ts > s.ts[-1]:
            s.ts.append(ts)
            s.values.append(value)
        else:
            i = bisect_left(s.ts, ts)
            if i < len(s.ts) and s.ts[i] == ts:
                s.values[i] = value  # last write wins
                if count:
                    self.counters["duplicates"] += 1
            else:
                s.ts.insert(i, ts)
                s.values.insert(i, value)

    def _segment_handle(self, stream: str):
        h = self._handles.get(stream)
        if h is None:
            path = self.root / "segments" / _stream_file(stream)
            try:
                h = open(path, "a")
            except OSError as e:
                self.healthy = False
                raise StorageError(f"cannot open segment for {stream}: {e}")
            self._handles[stream] = h
        return h

    def append(self, stream: str, ts: int, value: dict) -> None:
        """Durable raw append; contributes to the sample's 5-min bucket.

        A duplicate (stream, ts) overwrites (last write wins, counted); a
        sample older than the stream's archive horizon is dropped, counted.
        """
        ts = int(ts)
        with self._lock:
            if ts < self._horizon.get(stream, -(1 << 62)):
                self.counters["dropped_old"] += 1
                return
            line = json.dumps({"stream": stream, "ts": ts, "v": value},
                              sort_keys=True, separators=(",", ":"))
            h = self._segment_handle(stream)
            try:
                h.write(line + "\n")
                h.flush()
            except OSError as e:
                self.healthy = False
                raise StorageError(f"append to {stream} failed: {e}")
            self._index_sample(stream, ts, value)
            self.counters["appended"] += 1

    def append_sample(self, sample) -> None:
        """Append a telemetry.TelemetrySample."""
        self.append(sample.stream_id, sample.ts, sample.value_dict())

    def raw_range(self, stream: str, from_ts: int, to_ts: int) -> list[tuple[int, dict]]:
        """Raw (ts, value) pairs with from_ts <= ts < to_ts (live data only)."""
        with self._lock:
            s = self._streams.get(stream)
            if s is None:
                return []
            lo = bisect_left(s.ts, int(from_ts))
            hi = bisect_left(s.ts, int(to_ts))
            return list(zip(s.ts[lo:hi], s.values[lo:hi]))

    def streams(self) -> list[str]:
        with self._lock:
            return sorted(set(self._streams) | set(self._agg))

    def latest(self, stream: str) -> tuple[int, dict] | None:
        with self._lock:
            s = self._streams.get(stream)
            if s is None or not s.ts:
                return None
            return s.ts[-1], s.values[-1]

    # -- aggregation -------------------------------------------------------

    @staticmethod
    def _numeric(stream: str, value: dict) -> dict[str, float]:
        kind = stream.split("/", 1)[0]
        if kind == "power":
            return {"w": float(value["w"])}
        if kind == "occupancy":
            return {"occ": 1.0 if value.get("occ") else 0.0}
        if kind == "env":
            return {"t": float(value["t"]), "h": float(value["h"]), "lx": float(value["lx"])}
        return {}

    def _compute_buckets(self, stream: str, pairs: list[tuple[int, dict]],
                         next_after: int | None = None) -> dict[int, AggregateBucket]:
        """Sample-hold bucket stats for consecutive raw pairs.

        next_after is the timestamp of the first sample after the slice (to
        cap the hold of the slice's last sample), or None at stream end.
        """
        kind = stream.split("/", 1)[0]
        out: dict[int, AggregateBucket] = {}
        acc: dict[int, dict] = {}
        n = len(pairs)
        for i, (ts, value) in enumerate(pairs):
            bstart = bucket_start(ts)
            bend = bstart + BUCKET_S
            nxt = pairs[i + 1][0] if i + 1 < n else next_after
            hold = (min(nxt, bend) if nxt is not None else bend) - ts
            if hold < 0:
                hold = 0
            a = acc.setdefault(bstart, {"covered": 0.0, "count": 0, "sums": {}, "max_w": None})
            a["count"] += 1
            nums = self._numeric(stream, value)
            if hold > 0:
                a["covered"] += hold
                for k, v in nums.items():
                    a["sums"][k] = a["sums"].get(k, 0.0) + v * hold
            if kind == "power":
                w = nums["w"]
                a["max_w"] = w if a["max_w"] is None else max(a["max_w"], w)
        for bstart, a in acc.items():
            covered = a["covered"]
            bucket = AggregateBucket(stream=stream, bucket_start=bstart, sample_count=a["count"])
            if kind == "power":
                swdt = a["sums"].get("w", 0.0)
                bucket.energy_wh = swdt / 3600.0
                bucket.mean_watts = swdt / covered if covered else 0.0
                bucket.max_watts = a["max_w"]
            elif kind == "occupancy":
                bucket.occupancy_fraction = (a["sums"].get("occ", 0.0) / covered) if covered else 0.0
            elif kind == "env":
                if covered:
                    bucket.temp_c_mean = a["sums"].get("t", 0.0) / covered
                    bucket.humidity_mean = a["sums"].get("h", 0.0) / covered
                    bucket.lux_mean = a["sums"].get("lx", 0.0) / covered
            out[bstart] = bucket
        return out

    def aggregate_range(self, stream: str, from_ts: int, to_ts: int) -> list[AggregateBucket]:
        """Buckets whose window intersects [from_ts, to_ts), sorted by start.

        Answers from materialized buckets for archived ranges and from raw
        samples for live data; an unknown stream yields an empty list.
        """
        if from_ts > to_ts:
            raise ValidationError(f"from_ts {from_ts} > to_ts {to_ts}")
        lo = bucket_start(from_ts)
        with self._lock:
            merged: dict[int, AggregateBucket] = {}
            for bstart, bucket in self._agg.get(stream, {}).items():
                if lo <= bstart < to_ts:
                    merged[bstart] = bucket
            s = self._streams.get(stream)
            if s is not None and s.ts:
                i0 = bisect_left(s.ts, lo)
                i1 = bisect_left(s.ts, int(to_ts))
                nxt = s.ts[i1] if i1 < len(s.ts) else None
                live = self._compute_buckets(stream, list(zip(s.ts[i0:i1], s.values[i0:i1])), nxt)
                merged.update(live)
            return [merged[b] for b in sorted(merged)]

    # -- archival ----------------------------------------------------------

    def archive_older_than(self, cutoff: int) -> int:
        """Move raw samples older than cutoff (bucket-aligned down) to
        compressed archive files; materialize their buckets first so
        aggregate queries are unchanged. Returns the archived sample count.
        """
        if cutoff > time.time() + 1:
            raise ValidationError(f"cutoff {cutoff} is in the future")
        aligned = bucket_start(int(cutoff))
        archived = 0
        with self._lock:
            plans = []
            for stream, s in self._streams.items():
                hi = bisect_left(s.ts, aligned)
                if hi == 0:
                    continue
                pairs = list(zip(s.ts[:hi], s.values[:hi]))
                nxt = s.ts[hi] if hi < len(s.ts) else None
                buckets = self._compute_buckets(stream, pairs, nxt)
                plans.append((stream, hi, pairs, buckets))
            if not plans:
                return 0
            # All file writes happen before any in-memory deletion so a
            # failure leaves the store intact.
            try:
                for stream, _, pairs, buckets in plans:
                    by_day: dict[str, list] = {}
                    for ts, value in pairs:
                        day = datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%d")
                        by_day.setdefault(day, []).append((ts, value))
                    arch_dir = self.root / "archive" / _stream_file(stream).removesuffix(".jsonl")
                    arch_dir.mkdir(parents=True, exist_ok=True)
                    for day, day_pairs in sorted(by_day.items()):
                        with gzip.open(arch_dir / f"{day}.jsonl.gz", "ab") as gz:
                            for ts, value in day_pairs:
                                gz.write((json.dumps(
                                    {"stream": stream, "ts": ts, "v": value},
                                    sort_keys=True, separators=(",", ":")) + "\n").encode())
                    agg_path = self.root / "aggregates" / _stream_file(stream)
                    with open(agg_path, "a") as f:
                        for bstart in sorted(buckets):
                            f.write(json.dumps(buckets[bstart].to_dict(),
                                               sort_keys=True, separators=(",", ":")) + "\n")
                        f.flush()
            except OSError as e:
                self.healthy = False
                raise StorageError(f"archival write failed, nothing deleted: {e}")
            # Writes landed; now drop archived raws and rewrite segments.
            for stream, hi, pairs, buckets in plans:
                s = self._streams[stream]
                del s.ts[:hi]
                del s.values[:hi]
                self._agg.setdefault(stream, {}).update(buckets)
                self._horizon[stream] = aligned
                self._rewrite_segment(stream)
                archived += len(pairs)
            self._write_meta()
        return archived

    def _rewrite_segment(self, stream: str):
        h = self._handles.pop(stream, None)
        if h is not None:
            h.close()
        path = self.root / "segments" / _stream_file(stream)
        tmp = path.with_suffix(".jsonl.tmp")
        s = self._streams[stream]
        with open(tmp, "w") as f:
            for ts, value in zip(s.ts, s.values):
                f.write(json.dumps({"stream": stream, "ts": ts, "v": value},
                                   sort_keys=True, separators=(",", ":")) + "\n")
            f.flush()
        tmp.replace(path)

    def _write_meta(self):
        (self.root / "meta.json").write_text(
            json.dumps({"horizon": self._horizon}, sort_keys=True) + "\n"
        )

    def enforce_retention(self, now: int | None = None) -> int:
        """Apply default retention: archive old raw, prune old presence
        aggregates. Returns archived sample count."""
        now = int(time.time()) if now is None else int(now)
        archived = self.archive_older_than(now - RAW_RETENTION_S)
        occ_cutoff = now - OCCUPANCY_AGG_RETENTION_S
        with self._lock:
            for stream, buckets in self._agg.items():
                if stream.startswith("occupancy/"):
                    for b in [b for b in buckets if b + BUCKET_S <= occ_cutoff]:
                        del buckets[b]
        return archived

    # -- knowledge base ----------------------------------------------------

    def kb_put(self, kind: str, key: str, value: dict) -> KnowledgeRecord:
        if kind not in KB_KINDS:
            raise ValidationError(f"unknown kb kind {kind!r}; expected one of {KB_KINDS}")
        with self._lock:
            prev = self._kb.get((kind, key))
            updated_at = time.time()
            if prev is not None and updated_at <= prev.updated_at:
                updated_at = prev.updated_at + 1e-6  # keep updated_at monotone per key
            rec = KnowledgeRecord(kind=kind, key=key, value=value, updated_at=updated_at)
            if self._kb_handle is None:
                try:
                    self._kb_handle = open(self.root / "kb.jsonl", "a")
                except OSError as e:
                    self.healthy = False
                    raise StorageError(f"cannot open kb log: {e}")
            try:
                self._kb_handle.write(json.dumps(
                    {"kind": kind, "key": key, "value": value, "updated_at": updated_at},
                    sort_keys=True, separators=(",", ":")) + "\n")
                self._kb_handle.flush()
            except OSError as e:
                self.healthy = False
                raise StorageError(f"kb append failed: {e}")
            self._kb[(kind, key)] = rec
            return rec

    def kb_get(self, kind: str, key: str) -> KnowledgeRecord:
        with self._lock:
            rec = self._kb.get((kind, key))
            if rec is None:
                raise NotFoundError(f"no {kind} record for key {key!r}")
            return rec

    def kb_list(self, kind: str) -> list[KnowledgeRecord]:
        with self._lock:
            return [r for (k, _), r in sorted(self._kb.items()) if k == kind]
