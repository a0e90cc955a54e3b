"""Operator command line.

    emedge simulate  write a labeled synthetic trace (CSV + replay events)
    emedge replay    push a replay file through ingest/label/store, no HTTP
    emedge train     fit a classifier on a trace directory
    emedge eval      score a saved model, EvalReport JSON on stdout
    emedge mine      association rules from an action-event log
    emedge archive   move old raw samples to the compressed archive
    emedge serve     run the full service (HTTP API + live events)
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
import time
from pathlib import Path

from . import __version__
from .classifier import (
    KnnModel,
    dataset_from_dir,
    evaluate,
    load_model,
    save_model,
    stratified_split,
    train_ensemble,
    train_tree,
)
from .config import load_config
from .errors import EmedgeError
from .habits import discretize, mine
from .presets import PRESETS
from .simulate import calibrate_noise, generate, write_csv, write_events
from .store import TelemetryStore


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="generate a labeled synthetic trace")
    p.add_argument("--preset", choices=sorted(PRESETS), default="demo3")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--interval", type=int, default=60, help="sample interval, seconds")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--site", default="home")
    p.add_argument("--jitter", type=float, default=0.10)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--noise-accuracy", type=float,
                   help="calibrate noise to a plug accuracy percentage")
    g.add_argument("--sigma", type=float, help="relative noise sigma directly")
    return p


def _cmd_simulate(args) -> int:
    sigma = 0.0
    if args.noise_accuracy is not None:
        sigma = calibrate_noise(args.noise_accuracy).relative_sigma
    elif args.sigma is not None:
        sigma = args.sigma
    cfg = PRESETS[args.preset](seed=args.seed, days=args.days,
                               interval_s=args.interval, sigma=sigma,
                               jitter=args.jitter)
    trace = generate(cfg)
    outdir = Path(args.out)
    write_csv(trace, outdir)
    count = write_events(trace, outdir / "events.jsonl", site=args.site)
    print(f"wrote {trace.sample_count} samples x {len(trace.appliances)} appliances "
          f"({count} events) to {outdir}")
    return 0


def _cmd_replay(args) -> int:
    from .appliances import specs_from_manifest
    from .config import ServiceConfig
    from .service import EdgeService

    cfg = ServiceConfig(store_path=args.store, replay_file=args.file,
                        appliance_spec_file=args.spec_file or "",
                        replay_rate_per_s=args.rate or 0.0,
                        replay_realtime=args.realtime, site=args.site)
    specs = None
    manifest = Path(args.file).parent / "manifest.json"
    if not args.spec_file and manifest.exists():
        specs = specs_from_manifest(manifest)
    svc = EdgeService(cfg, specs=specs)
    svc.start(serve_http=False)
    svc.wait_replay()
    counters = svc.pipeline.counters()
    svc.stop()
    print(json.dumps(counters, sort_keys=True))
    return 0


def _cmd_train(args) -> int:
    X, y, dataset_id = dataset_from_dir(args.data, signal=args.signal)
    if args.holdout > 0:
        train_idx, _ = stratified_split(y, args.holdout, seed=args.seed)
        X, y = X[train_idx], y[train_idx]
    t0 = time.monotonic()
    if args.kind == "dt":
        model = train_tree(X, y, max_splits=args.max_splits, seed=args.seed)
    elif args.kind == "ebt":
        model = train_ensemble(X, y, n_learners=args.learners,
                               max_splits=args.max_splits, seed=args.seed)
    else:
        model = KnnModel(train_X=X, train_y=y, k=args.k)
    save_model(model, args.model)
    print(f"trained {args.kind} on {len(y)} samples from {dataset_id} "
          f"in {time.monotonic() - t0:.1f}s -> {args.model}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    model = load_model(args.model)
    X, y, dataset_id = dataset_from_dir(args.data, signal=args.signal)
    if args.holdout > 0:
        _, test_idx = stratified_split(y, args.holdout, seed=args.seed)
        X, y = X[test_idx], y[test_idx]
    report = evaluate(model, X, y, dataset_id=dataset_id, seed=args.seed)
    print(report.to_json())
    if args.table:
        print(report.table(), file=sys.stderr)
    return 0


def _cmd_mine(args) -> int:
    events = []
    with open(args.events) as f:
        for line in f:
            if not line.strip():
                continue
            raw = json.loads(line)
            events.append(discretize(
                user_id=raw.get("user_id", "user"),
                appliance_id=raw["appliance_id"],
                verb=raw["verb"],
                ts=raw["ts"],
                temperature_c=raw.get("temperature_c"),
                occupied=raw.get("occupied"),
                humidity_pct=raw.get("humidity_pct"),
            ))
    rules = mine(events, min_support=args.min_support,
                 min_confidence=args.min_confidence)
    if args.store:
        with TelemetryStore(args.store) as store:
            for i, rule in enumerate(rules):
                store.kb_put("habit_rule", f"rule{i:04d}", rule.to_dict())
    print(json.dumps([r.to_dict() for r in rules], sort_keys=True, indent=2))
    return 0


def _cmd_archive(args) -> int:
    cutoff = args.cutoff if args.cutoff is not None else int(time.time()) - args.keep_days * 86400
    with TelemetryStore(args.store) as store:
        archived = store.archive_older_than(cutoff)
    print(f"archived {archived} samples older than {cutoff}")
    return 0


def _cmd_serve(args) -> int:
    from .appliances import specs_from_manifest
    from .service import EdgeService

    cfg = load_config(args.config)
    if args.port is not None:
        cfg.http_port = args.port
    if args.store:
        cfg.store_path = args.store
    if args.replay:
        cfg.replay_file = args.replay
    if args.static:
        cfg.static_dir = args.static
    if args.site:
        cfg.site = args.site
    if args.spec_file:
        cfg.appliance_spec_file = args.spec_file
    specs = None
    if cfg.replay_file and not cfg.appliance_spec_file:
        manifest = Path(cfg.replay_file).parent / "manifest.json"
        if manifest.exists():
            specs = specs_from_manifest(manifest)
    svc = EdgeService(cfg, specs=specs)
    svc.start()
    print(f"emedge serving on http://{cfg.http_host}:{svc.http_port} "
          f"(store: {cfg.store_path})")
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    try:
        while not stop.wait(0.5):
            pass
    finally:
        svc.stop()
        print("clean shutdown")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emedge",
                                     description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"emedge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_simulate(sub)

    p = sub.add_parser("replay", help="ingest a replay file into a store")
    p.add_argument("--file", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--spec-file", default="")
    p.add_argument("--site", default="home")
    p.add_argument("--rate", type=float, help="events per second")
    p.add_argument("--realtime", action="store_true")

    p = sub.add_parser("train", help="train a classifier from a trace directory")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=("dt", "ebt", "knn"), default="ebt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-splits", type=int, default=100)
    p.add_argument("--learners", type=int, default=30)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--signal", choices=("measured", "true"), default="measured")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="train on 1-holdout of the data (stratified)")

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--signal", choices=("measured", "true"), default="measured")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="evaluate on the holdout split only")
    p.add_argument("--table", action="store_true", help="also print a table to stderr")

    p = sub.add_parser("mine", help="mine habit rules from an action log")
    p.add_argument("--events", required=True, help="JSON-lines raw action events")
    p.add_argument("--min-support", type=float, default=0.1)
    p.add_argument("--min-confidence", type=float, default=0.6)
    p.add_argument("--store", default="", help="persist rules to this store's kb")

    p = sub.add_parser("archive", help="archive old raw samples")
    p.add_argument("--store", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--cutoff", type=int, help="epoch seconds")
    g.add_argument("--keep-days", type=int)

    p = sub.add_parser("serve", help="run the service")
    p.add_argument("--config", default=None)
    p.add_argument("--port", type=int)
    p.add_argument("--store", default="")
    p.add_argument("--replay", default="")
    p.add_argument("--static", default="")
    p.add_argument("--site", default="")
    p.add_argument("--spec-file", default="")
    return parser


_COMMANDS = {
    "simulate": _cmd_simulate,
    "replay": _cmd_replay,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "mine": _cmd_mine,
    "archive": _cmd_archive,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except EmedgeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
