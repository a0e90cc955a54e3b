"""Appliance operating parameters and the bundled device catalog.

Every appliance is described by its active consumption range (DACR, watts),
its standby draw (DSPC, watts), the longest continuous run expected of it
(DOT, seconds), and whether a person must be present while it runs. These
four parameters drive the micro-moment rule engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

# Fraction of dacr_max_w used for the default lower edge of the active range
# when a catalog entry does not give one explicitly.
DEFAULT_DACR_MIN_FACTOR = 0.1

# Device kinds that must not run in an empty room (AC, television, light,
# desktop/laptop, fan). Matched as lowercase substrings of id or name.
PRESENCE_REQUIRED_KEYWORDS = (
    "air_cond", "aircond", "air cond", "ac_", "_ac", "television", "tv",
    "light", "lamp", "desktop", "laptop", "fan",
)


@dataclass(frozen=True)
class ApplianceSpec:
    """Operating parameters for one appliance.

    Invariants: 0 <= dspc_w < dacr_min_w <= dacr_max_w and dot_s > 0.
    """

    id: str
    name: str
    zone_id: str
    dacr_max_w: float
    dspc_w: float
    dot_s: float
    dacr_min_w: float = 0.0  # 0 means "use the default factor"
    requires_presence: bool = False

    def __post_init__(self):
        if self.dacr_min_w <= 0:
            object.__setattr__(
                self, "dacr_min_w", DEFAULT_DACR_MIN_FACTOR * self.dacr_max_w
            )
        if not self.id:
            raise ConfigurationError("appliance id must be non-empty")
        if self.dot_s <= 0:
            raise ConfigurationError(f"{self.id}: dot_s must be > 0")
        if not 0 <= self.dspc_w < self.dacr_min_w <= self.dacr_max_w:
            raise ConfigurationError(
                f"{self.id}: need 0 <= dspc_w < dacr_min_w <= dacr_max_w, "
                f"got dspc={self.dspc_w}, dacr_min={self.dacr_min_w}, "
                f"dacr_max={self.dacr_max_w}"
            )


def presence_required(identifier: str) -> bool:
    """Default presence requirement inferred from an appliance id or name."""
    low = identifier.lower()
    return any(k in low for k in PRESENCE_REQUIRED_KEYWORDS)


def _spec(id, name, zone, dot_s, dacr_max, dspc, dacr_min=0.0):
    return ApplianceSpec(
        id=id,
        name=name,
        zone_id=zone,
        dacr_max_w=float(dacr_max),
        dspc_w=float(dspc),
        dot_s=float(dot_s),
        dacr_min_w=float(dacr_min),
        requires_presence=presence_required(id) or presence_required(name),
    )


def default_catalog(zone: str = "lab1") -> dict[str, ApplianceSpec]:
    """Bundled catalog of common household appliances, keyed by id.

    The laptop gets an explicit dacr_min_w because its 20 W standby draw
    sits above the 10 % default lower edge of its 100 W active range.
    """
    specs = [
        _spec("ac1", "Air conditioner", zone, 55800, 1000, 4),
        _spec("microwave1", "Microwave", zone, 3600, 1200, 7),
        _spec("oven1", "Oven", zone, 10800, 2400, 6),
        _spec("dishwasher1", "Dishwasher", zone, 6300, 1800, 3),
        _spec("laptop1", "Laptop", zone, 45720, 100, 20, dacr_min=30),
        _spec("washer1", "Washing machine", zone, 3600, 500, 6),
        _spec("light1", "Light", zone, 28800, 60, 0),
        _spec("tv1", "Television", zone, 45720, 65, 6),
        _spec("fridge1", "Refrigerator", zone, 63000, 180, 0),
        _spec("desktop1", "Desktop", zone, 45720, 250, 12),
    ]
    return {s.id: s for s in specs}


def load_specs(path: str | Path) -> dict[str, ApplianceSpec]:
    """Load appliance specs from a JSON file.

    Schema: a list of objects with keys id, name, zone, dacr_max_w, dspc_w,
    dot_s, and optionally dacr_min_w and requires_presence. When
    requires_presence is omitted it is inferred from the id/name keywords.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"appliance spec file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"appliance spec file {path} is not valid JSON: {e}")
    if not isinstance(raw, list):
        raise ConfigurationError(f"appliance spec file {path}: expected a JSON list")
    specs: dict[str, ApplianceSpec] = {}
    for i, entry in enumerate(raw):
        try:
            spec = ApplianceSpec(
                id=entry["id"],
                name=entry.get("name", entry["id"]),
                zone_id=entry["zone"],
                dacr_max_w=float(entry["dacr_max_w"]),
                dspc_w=float(entry["dspc_w"]),
                dot_s=float(entry["dot_s"]),
                dacr_min_w=float(entry.get("dacr_min_w", 0.0)),
                requires_presence=bool(
                    entry.get(
                        "requires_presence",
                        presence_required(entry["id"])
                        or presence_required(entry.get("name", "")),
                    )
                ),
            )
        except KeyError as e:
            raise ConfigurationError(f"appliance entry #{i}: missing field {e}")
        if spec.id in specs:
            raise ConfigurationError(f"duplicate appliance id: {spec.id}")
        specs[spec.id] = spec
    return specs


def specs_from_manifest(manifest_path: str | Path) -> dict[str, ApplianceSpec]:
    """Appliance specs from a trace directory's manifest.json."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise ConfigurationError(f"manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    specs = {}
    for entry in manifest.get("appliances", []):
        spec = ApplianceSpec(
            id=entry["id"], name=entry["name"], zone_id=entry["zone"],
            dacr_max_w=entry["dacr_max_w"], dacr_min_w=entry["dacr_min_w"],
            dspc_w=entry["dspc_w"], dot_s=entry["dot_s"],
            requires_presence=entry["requires_presence"],
        )
        specs[spec.id] = spec
    return specs


def dump_specs(specs: dict[str, ApplianceSpec], path: str | Path) -> None:
    """Write specs to the JSON schema understood by load_specs."""
    entries = [
        {
            "id": s.id,
            "name": s.name,
            "zone": s.zone_id,
            "dacr_max_w": s.dacr_max_w,
            "dacr_min_w": s.dacr_min_w,
            "dspc_w": s.dspc_w,
            "dot_s": s.dot_s,
            "requires_presence": s.requires_presence,
        }
        for s in specs.values()
    ]
    Path(path).write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n")
