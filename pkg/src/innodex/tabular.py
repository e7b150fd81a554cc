"""Census tracts, the tract-to-zip crosswalk, and building permits."""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError
from .geo import GeoPoint, ZipZone, ZoneSet, _contains, read_polygons

log = logging.getLogger(__name__)

UNASSIGNED = "unassigned"
DEFAULT_SAMPLES = 2000
MIN_WEIGHT = 1e-3

CENSUS_FIELDS = (
    "tract_id",
    "pop_total",
    "pop_white",
    "pop_black",
    "pop_hispanic",
    "vacant_units",
    "housing_units",
    "median_income_usd",
    "median_home_value_usd",
)
COUNT_FIELDS = ("pop_total", "pop_white", "pop_black", "pop_hispanic", "vacant_units", "housing_units")


@dataclass(frozen=True)
class TractRow:
    tract_id: str
    pop_total: int
    pop_white: int
    pop_black: int
    pop_hispanic: int
    vacant_units: int
    housing_units: int
    median_income_usd: float | None = None
    median_home_value_usd: float | None = None

    def __post_init__(self):
        for name in COUNT_FIELDS:
            if getattr(self, name) < 0:
                raise ValidationError(f"tract {self.tract_id}: negative {name}")
        for name in ("pop_white", "pop_black", "pop_hispanic"):
            if getattr(self, name) > self.pop_total:
                raise ValidationError(f"tract {self.tract_id}: {name} exceeds pop_total")
        if self.vacant_units > self.housing_units:
            raise ValidationError(f"tract {self.tract_id}: vacant_units exceeds housing_units")
        for name in ("median_income_usd", "median_home_value_usd"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"tract {self.tract_id}: {name} must be positive")


@dataclass(frozen=True)
class CrosswalkEntry:
    tract_id: str
    zip_id: str
    weight: float


@dataclass
class Crosswalk:
    entries: list[CrosswalkEntry]
    unassigned: list[str] = field(default_factory=list)
    # tract_id -> fraction of samples that fell outside every zone
    partial: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SocioRow:
    zip_id: str
    pop_total: int
    pop_white: int
    pop_black: int
    pop_hispanic: int
    vacant_units: int
    housing_units: int
    pct_white: float | None
    pct_black: float | None
    pct_hispanic: float | None
    vacancy_rate: float | None
    median_income_usd: float | None
    median_home_value_usd: float | None


class Occupancy(str, Enum):
    commercial = "commercial"
    mixed = "mixed"
    residential = "residential"
    other = "other"


@dataclass(frozen=True)
class PermitRecord:
    permit_id: str
    location: GeoPoint
    occupancy_class: Occupancy
    declared_value_usd: float | None
    issued_date: dt.date


@dataclass
class PermitCounts:
    permit_count: int = 0
    permit_value_usd: float = 0.0
    null_values: int = 0


# -- loading -----------------------------------------------------------------


def _opt_float(v) -> float | None:
    if v is None:
        return None
    v = str(v).strip()
    if v == "" or v.lower() in ("na", "nan", "null", "none"):
        return None
    return float(v)


def _int(v) -> int:
    f = _opt_float(v)
    return 0 if f is None else int(round(f))


def load_census(path: str | Path, columns: Mapping[str, str] | None = None) -> list[TractRow]:
    """Read a tract table; ``columns`` maps field names to CSV header names."""
    colmap = {name: name for name in CENSUS_FIELDS}
    colmap.update(columns or {})
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [f for f, c in colmap.items() if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing census columns {missing}")
        for rec in reader:
            income = _opt_float(rec[colmap["median_income_usd"]])
            value = _opt_float(rec[colmap["median_home_value_usd"]])
            rows.append(
                TractRow(
                    tract_id=rec[colmap["tract_id"]].strip(),
                    **{f: _int(rec[colmap[f]]) for f in COUNT_FIELDS},
                    # census tables use non-positive sentinels for suppressed medians
                    median_income_usd=income if income and income > 0 else None,
                    median_home_value_usd=value if value and value > 0 else None,
                )
            )
    ids = [r.tract_id for r in rows]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"{path}: duplicate tract ids")
    return rows


def load_tract_geometries(path: str | Path, id_property: str = "GEOID") -> dict[str, ZipZone]:
    """Tract polygons, validated with the same ring rules as zip zones."""
    raw = read_polygons(path, id_property)
    return {tid: ZipZone(tid, tuple(polys)) for tid, polys in sorted(raw.items())}


def _occupancy(v: str) -> Occupancy:
    v = (v or "").strip().lower()
    if v.startswith("comm"):
        return Occupancy.commercial
    if v.startswith("mix"):
        return Occupancy.mixed
    if v.startswith("res"):
        return Occupancy.residential
    return Occupancy.other


def load_permits(path: str | Path) -> list[PermitRecord]:
    """Permits CSV: permit_id, lon, lat, occupancy, declared_value, issued_date."""
    out = []
    seen = set()
    skipped = 0
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            pid = rec["permit_id"].strip()
            if pid in seen:
                raise ValidationError(f"{path}: duplicate permit_id {pid}")
            seen.add(pid)
            lon, lat = _opt_float(rec["lon"]), _opt_float(rec["lat"])
            if lon is None or lat is None:
                skipped += 1
                continue
            value = _opt_float(rec.get("declared_value"))
            if value is not None and value < 0:
                raise ValidationError(f"{path}: permit {pid} has negative declared value")
            out.append(
                PermitRecord(
                    pid,
                    GeoPoint(lon, lat),
                    _occupancy(rec["occupancy"]),
                    value,
                    dt.date.fromisoformat(rec["issued_date"].strip()[:10]),
                )
            )
    if skipped:
        log.warning("%s: skipped %d permits without coordinates", path, skipped)
    return out


# -- crosswalk -------------------------------------------------------------


def _tract_seed(seed: int, tract_id: str) -> np.random.Generator:
    h = int.from_bytes(hashlib.sha256(tract_id.encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng([seed, h])


def sample_in_polygon(tract: ZipZone, n: int, rng: np.random.Generator) -> list[tuple[float, float]]:
    """``n`` uniform points inside ``tract`` by rejection from its bounding box."""
    x0, y0, x1, y1 = tract.bbox
    pts: list[tuple[float, float]] = []
    while len(pts) < n:
        batch = max(64, 2 * (n - len(pts)))
        xs = rng.uniform(x0, x1, batch)
        ys = rng.uniform(y0, y1, batch)
        for x, y in zip(xs.tolist(), ys.tolist()):
            if _contains(tract, x, y):
                pts.append((x, y))
                if len(pts) == n:
                    break
    return pts


def build_crosswalk(
    tracts: Mapping[str, ZipZone],
    zs: ZoneSet,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> Crosswalk:
    """Area weights tract -> zip estimated from uniform samples.

    Each tract draws from its own generator keyed on (seed, tract_id), so the
    result does not depend on tract order. Weights below ``MIN_WEIGHT`` are
    dropped. A tract whose samples all land in zones is renormalised to sum
    to one; a tract partly outside every zone keeps its raw fractions and is
    listed in ``partial``.
    """
    entries: list[CrosswalkEntry] = []
    unassigned: list[str] = []
    partial: dict[str, float] = {}
    for tid in sorted(tracts):
        pts = sample_in_polygon(tracts[tid], samples, _tract_seed(seed, tid))
        hits: dict[str, int] = defaultdict(int)
        outside = 0
        for x, y in pts:
            z = zs.locate(x, y)
            if z is None:
                outside += 1
            else:
                hits[z] += 1
        if not hits:
            unassigned.append(tid)
            continue
        kept = {z: c / samples for z, c in hits.items() if c / samples >= MIN_WEIGHT}
        out_frac = outside / samples
        if out_frac >= MIN_WEIGHT:
            partial[tid] = out_frac
        else:
            total = sum(kept.values())
            kept = {z: w / total for z, w in kept.items()}
        entries.extend(CrosswalkEntry(tid, z, kept[z]) for z in sorted(kept))
    return Crosswalk(entries, unassigned, partial)


def write_crosswalk(path: str | Path, xw: Crosswalk) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tract_id", "zip_id", "weight"])
        for e in xw.entries:
            w.writerow([e.tract_id, e.zip_id, repr(e.weight)])


def read_crosswalk(path: str | Path) -> Crosswalk:
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            wt = float(rec["weight"])
            if not 0.0 <= wt <= 1.0:
                raise ValidationError(f"{path}: weight {wt} outside [0, 1]")
            entries.append(CrosswalkEntry(rec["tract_id"].strip(), rec["zip_id"].strip(), wt))
    sums: dict[str, float] = defaultdict(float)
    for e in entries:
        sums[e.tract_id] += e.weight
    partial = {t: 1.0 - s for t, s in sums.items() if abs(s - 1.0) > 1e-9}
    return Crosswalk(entries, [], partial)


# -- reallocation -------------------------------------------------------------


def _ratio(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def _weighted_mean(pairs: list[tuple[float, float]]) -> float | None:
    wsum = math.fsum(w for _, w in pairs)
    if wsum <= 0:
        return None
    return math.fsum(v * w for v, w in pairs) / wsum


def tract_to_zip(tracts: Iterable[TractRow], xw: Crosswalk | Iterable[CrosswalkEntry]) -> dict[str, SocioRow]:
    """Reallocate tract variables to zips.

    Counts are weight-summed then rounded half-to-even; ratios are taken after
    summation. Medians become weighted means of tract medians (population
    weights for income, housing-unit weights for home value), skipping nulls.
    That is an approximation: pooled medians cannot be recovered from tract
    medians.
    """
    entries = xw.entries if isinstance(xw, Crosswalk) else list(xw)
    by_id = {t.tract_id: t for t in tracts}
    sums: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
    income: dict[str, list] = defaultdict(list)
    home: dict[str, list] = defaultdict(list)
    for e in entries:
        t = by_id.get(e.tract_id)
        if t is None:
            raise ValidationError(f"crosswalk tract {e.tract_id} missing from census table")
        acc = sums[e.zip_id]
        for name in COUNT_FIELDS:
            acc[name] += getattr(t, name) * e.weight
        if t.median_income_usd is not None:
            income[e.zip_id].append((t.median_income_usd, t.pop_total * e.weight))
        if t.median_home_value_usd is not None:
            home[e.zip_id].append((t.median_home_value_usd, t.housing_units * e.weight))
    out = {}
    for zip_id in sorted(sums):
        c = {name: int(round(sums[zip_id][name])) for name in COUNT_FIELDS}
        out[zip_id] = SocioRow(
            zip_id=zip_id,
            **c,
            pct_white=_ratio(c["pop_white"], c["pop_total"]),
            pct_black=_ratio(c["pop_black"], c["pop_total"]),
            pct_hispanic=_ratio(c["pop_hispanic"], c["pop_total"]),
            vacancy_rate=_ratio(c["vacant_units"], c["housing_units"]),
            median_income_usd=_weighted_mean(income[zip_id]),
            median_home_value_usd=_weighted_mean(home[zip_id]),
        )
    return out


# -- permits -----------------------------------------------------------------


def filter_permits(permits: Iterable[PermitRecord]) -> list[PermitRecord]:
    return [p for p in permits if p.occupancy_class in (Occupancy.commercial, Occupancy.mixed)]


def permit_zip_counts(permits: Iterable[PermitRecord], zs: ZoneSet) -> dict[str, PermitCounts]:
    """Per-zip count and declared-value sum; every zone is present, plus ``UNASSIGNED``."""
    out = {z: PermitCounts() for z in zs.zip_ids}
    out[UNASSIGNED] = PermitCounts()
    for p in permits:
        zip_id = zs.locate(p.location.lon, p.location.lat) or UNASSIGNED
        c = out[zip_id]
        c.permit_count += 1
        if p.declared_value_usd is None:
            c.null_values += 1
        else:
            c.permit_value_usd += p.declared_value_usd
    return out
