"""Start a service over a synthetic replay for the dashboard tests.

Prints one JSON line {"port": ..., "events": ...} once the replay has
drained, then blocks until terminated. PYTHONPATH must include the backend
src directory.
"""

import json
import signal
import sys
import tempfile
import threading
from pathlib import Path

from emedge.appliances import ApplianceSpec, dump_specs
from emedge.config import ServiceConfig
from emedge.service import EdgeService
from emedge.simulate import (
    ApplianceSchedule,
    EnvironmentProfile,
    OccupancyRule,
    SimConfig,
    generate,
    write_events,
)

CHARGER = ApplianceSpec(
    id="charger1", name="Phone charger", zone_id="lab1", dacr_max_w=10,
    dspc_w=0.5, dot_s=10**7, requires_presence=True,
)


def main():
    tmp = Path(tempfile.mkdtemp(prefix="emedge-fixture-"))
    cfg = SimConfig(
        seed=3,
        duration_s=45 * 60,
        sample_interval_s=60,
        appliances=(ApplianceSchedule(spec=CHARGER, on_windows=((0, 86400),)),),
        occupancy=(OccupancyRule(zone="lab1", hourly=(0.0,) * 24),),
        environment=(EnvironmentProfile(zone="lab1"),
                     EnvironmentProfile(zone="outdoor", lux_max=9000)),
    )
    trace = generate(cfg)
    events_path = tmp / "events.jsonl"
    count = write_events(trace, events_path, site="qu")
    spec_file = tmp / "specs.json"
    dump_specs({CHARGER.id: CHARGER}, spec_file)

    svc = EdgeService(ServiceConfig(
        site="qu",
        store_path=str(tmp / "store"),
        replay_file=str(events_path),
        appliance_spec_file=str(spec_file),
        http_host="127.0.0.1",
        http_port=0,
        event_buffer=20000,
    ))
    svc.start()
    if not svc.wait_replay(timeout=60):
        print(json.dumps({"error": "replay did not finish"}), flush=True)
        sys.exit(1)
    print(json.dumps({"port": svc.http_port, "events": count}), flush=True)

    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *a: stop.set())
    signal.signal(signal.SIGINT, lambda *a: stop.set())
    stop.wait()
    svc.stop()


if __name__ == "__main__":
    main()
