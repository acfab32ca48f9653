"""Synthetic clinical-zone scenarios and nearest-main-zone coverage.

Main zones (class 1) get a big hospital (chart A); depended zones (class 2)
get a health center (chart B) and are served by the nearest main zone.

Every attribute is drawn from a class-specific slice of a fixed base range:
depended zones from the lowest quarter, main zones from the top 30%. Main
zones therefore dominate depended zones on every attribute, so any
nonnegative weighting of the normalized attributes separates the classes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import AttributeSpec, Dataset, SchemaSelection, default_selection, export_csv, ingest_csv
from .errors import BadCounts, NoMainZone

ATTRIBUTES = (
    "city_population",
    "rural_population",
    "area",
    "neighbor_count",
    "distance_to_capital",
    "local_employees",
    "insured_persons",
    "health_center_count",
)

# logical database each attribute is drawn from
SOURCE_TABLES = {
    "city_population": "social_status",
    "rural_population": "social_status",
    "area": "geo_political",
    "neighbor_count": "geo_political",
    "distance_to_capital": "geo_political",
    "local_employees": "staffs",
    "insured_persons": "clinical",
    "health_center_count": "clinical",
}

# (low, high, decimals); decimals=0 means integer-valued
BASE_RANGES = {
    "city_population": (1_000, 1_000_000, 0),
    "rural_population": (500, 300_000, 0),
    "area": (20.0, 5_000.0, 1),
    "neighbor_count": (1, 10, 0),
    "distance_to_capital": (5.0, 1_200.0, 1),
    "local_employees": (5, 4_000, 0),
    "insured_persons": (200, 600_000, 0),
    "health_center_count": (0, 20, 0),
}

CLASS_SLICES = {1: (0.70, 1.00), 2: (0.00, 0.25)}

CHARTS = {
    1: ("A", "Big hospital with complex organization"),
    2: ("B", "Health center with simple organization"),
}

POSITION_RANGE = (0.0, 100.0)


@dataclass(frozen=True)
class ZoneRecord:
    zone_id: str
    x: float
    y: float
    city_population: float
    rural_population: float
    area: float
    neighbor_count: int
    distance_to_capital: float
    local_employees: float
    insured_persons: float
    health_center_count: float
    label: int | None = None

    def __post_init__(self):
        for name in ATTRIBUTES:
            if getattr(self, name) < 0:
                raise ValueError(f"{self.zone_id}: {name} must be nonnegative")
        if self.neighbor_count != int(self.neighbor_count):
            raise ValueError(f"{self.zone_id}: neighbor_count must be an integer")
        if self.label not in (None, 1, 2):
            raise ValueError(f"{self.zone_id}: label must be 1 or 2")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def attribute_values(self) -> list[float]:
        return [float(getattr(self, name)) for name in ATTRIBUTES]


@dataclass(frozen=True)
class CoveragePlan:
    assignments: dict  # depended zone id -> main zone id
    chart: dict  # zone id -> "A" | "B"


def class_range(name: str, label: int) -> tuple[float, float]:
    lo, hi, decimals = BASE_RANGES[name]
    f0, f1 = CLASS_SLICES[label]
    a, b = lo + f0 * (hi - lo), lo + f1 * (hi - lo)
    if decimals == 0:
        return float(math.ceil(a)), float(math.floor(b))
    return round(a, decimals), round(b, decimals)


def _draw(rng: np.random.Generator, name: str, label: int) -> float:
    a, b = class_range(name, label)
    decimals = BASE_RANGES[name][2]
    if decimals == 0:
        return int(rng.integers(int(a), int(b) + 1))
    return float(min(b, max(a, round(rng.uniform(a, b), decimals))))


def generate_zones(n: int, k_main: int, seed: int) -> list[ZoneRecord]:
    """``n`` labeled zones, exactly ``k_main`` of them main zones (class 1)."""
    if not 1 <= k_main < n:
        raise BadCounts(f"need 1 <= k_main < n, got n={n}, k_main={k_main}")
    rng = np.random.default_rng(seed)
    main = set(rng.choice(n, size=k_main, replace=False).tolist())
    width = max(3, len(str(n)))
    zones = []
    for i in range(n):
        label = 1 if i in main else 2
        x, y = (round(float(v), 2) for v in rng.uniform(*POSITION_RANGE, size=2))
        attrs = {name: _draw(rng, name, label) for name in ATTRIBUTES}
        zones.append(ZoneRecord(zone_id=f"z{i + 1:0{width}d}", x=x, y=y, label=label, **attrs))
    return zones


def zones_to_dataset(zones) -> Dataset:
    zones = sorted(zones, key=lambda z: z.zone_id)
    labeled = all(z.label is not None for z in zones)
    return Dataset(
        attributes=tuple(AttributeSpec(name, SOURCE_TABLES[name]) for name in ATTRIBUTES),
        instance_ids=tuple(z.zone_id for z in zones),
        values=np.array([z.attribute_values() for z in zones]),
        labels=np.array([z.label for z in zones]) if labeled else None,
    )


def zone_sources(zones) -> list[tuple[str, Dataset]]:
    """The scenario split into its four logical databases, keyed by zone id."""
    full = zones_to_dataset(zones)
    tables = []
    for tag in sorted(set(SOURCE_TABLES.values())):
        names = [a for a in ATTRIBUTES if SOURCE_TABLES[a] == tag]
        part = full.select(names)
        if tag != "clinical":
            part = Dataset(part.attributes, part.instance_ids, part.values)
        tables.append((tag, part))
    return tables


def scenario_selection() -> SchemaSelection:
    return SchemaSelection(ATTRIBUTES, label_column="label")


def scenario_comments(seed=None) -> list[str]:
    lines = ["clinical zone scenario (synthetic)"]
    if seed is not None:
        lines.append(f"seed: {seed}")
    lines.append(f"position range: {POSITION_RANGE[0]}..{POSITION_RANGE[1]}")
    for name in ATTRIBUTES:
        (a1, b1), (a2, b2) = class_range(name, 1), class_range(name, 2)
        lines.append(f"range {name}: class1 {a1}..{b1} class2 {a2}..{b2}")
    return lines


def export_scenario(zones, path, seed=None) -> None:
    """Write zones as a CSV readable by :func:`~pwla_mas.dataset.ingest_csv`.

    Comment lines record the seed and generation ranges; ``x``/``y`` columns
    carry positions.
    """
    zones = sorted(zones, key=lambda z: z.zone_id)
    export_csv(
        zones_to_dataset(zones),
        path,
        comments=scenario_comments(seed),
        extra_columns={"x": [z.x for z in zones], "y": [z.y for z in zones]},
    )


def load_scenario(path) -> list[ZoneRecord]:
    label = default_selection(path).label_column
    ds = ingest_csv(path, SchemaSelection(ATTRIBUTES, label_column=label))
    pos = ingest_csv(path, SchemaSelection(("x", "y")))
    zones = []
    for i, zid in enumerate(ds.instance_ids):
        attrs = dict(zip(ATTRIBUTES, ds.values[i].tolist()))
        attrs["neighbor_count"] = int(attrs["neighbor_count"])
        label = None if ds.labels is None else int(ds.labels[i])
        zones.append(ZoneRecord(zid, float(pos.values[i, 0]), float(pos.values[i, 1]), label=label, **attrs))
    return zones


def plan_coverage(zones, labels=None) -> CoveragePlan:
    """Assign each depended zone to its nearest main zone (ties to the lower id).

    ``labels`` maps zone id to a predicted class; zones missing from it keep
    their own label.
    """
    labels = dict(labels or {})

    def label_of(z):
        return labels.get(z.zone_id, z.label)

    zones = sorted(zones, key=lambda z: z.zone_id)
    mains = [z for z in zones if label_of(z) == 1]
    if not mains:
        raise NoMainZone("no zone is labeled as a main zone")
    assignments, chart = {}, {}
    for z in zones:
        cls = label_of(z)
        chart[z.zone_id] = CHARTS[cls][0]
        if cls != 2:
            continue
        best, best_d2 = None, math.inf
        for m in mains:
            d2 = (z.x - m.x) ** 2 + (z.y - m.y) ** 2
            if d2 < best_d2:
                best, best_d2 = m.zone_id, d2
        assignments[z.zone_id] = best
    return CoveragePlan(assignments=assignments, chart=chart)
