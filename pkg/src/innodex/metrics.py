"""Per-zip innovation metrics and the zip-level feature matrix."""
from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ValidationError
from .geo import ZoneSet
from .poi import JobPosting, PoiRecord
from .tabular import UNASSIGNED, PermitCounts, SocioRow


@dataclass(frozen=True)
class ZipInnovationMetrics:
    zip_id: str
    location_count: int = 0
    total_rating_count: int = 0
    weighted_mean_rating: float | None = None


@dataclass(frozen=True)
class ZipFeatureVector:
    zip_id: str
    location_count: int
    total_rating_count: int
    weighted_mean_rating: float | None
    osm_location_count: int | None
    job_count: int | None
    permit_count: int
    permit_value_usd: float
    pop_total: int
    pct_white: float | None
    pct_black: float | None
    pct_hispanic: float | None
    vacancy_rate: float | None
    median_income_usd: float | None
    median_home_value_usd: float | None
    permit_value_per_business: float | None = None


FEATURE_COLUMNS = tuple(f.name for f in fields(ZipFeatureVector))


def _summarise(zip_id: str, pois: list[PoiRecord]) -> ZipInnovationMetrics:
    rated = [p for p in pois if p.rating is not None and p.rating_count >= 1]
    total = sum(p.rating_count for p in pois)
    n_rated = sum(p.rating_count for p in rated)
    mean = None
    if n_rated:
        mean = sum(p.rating * p.rating_count for p in rated) / n_rated
        # rounding can push (r*n)/n one ulp past r; the exact mean is inside the range
        mean = min(max(mean, min(p.rating for p in rated)), max(p.rating for p in rated))
    return ZipInnovationMetrics(zip_id, len(pois), total, mean)


def zip_innovation_metrics(pois: Iterable[PoiRecord], zs: ZoneSet) -> dict[str, ZipInnovationMetrics]:
    """Location count, total ratings and ratings-weighted mean rating per zip.

    Every zone gets an entry; POIs outside all zones go to ``UNASSIGNED``.
    Call once per source: mixing sources would double count places.
    """
    groups: dict[str, list[PoiRecord]] = {z: [] for z in zs.zip_ids}
    groups[UNASSIGNED] = []
    for p in pois:
        groups[zs.locate(p.location.lon, p.location.lat) or UNASSIGNED].append(p)
    return {z: _summarise(z, ps) for z, ps in groups.items()}


def job_zip_counts(jobs: Iterable[JobPosting], zs: ZoneSet) -> dict[str, int]:
    """Postings per zip; only zips with at least one posting appear (sparse)."""
    counts: Counter[str] = Counter()
    for j in jobs:
        if j.zip_id is None:
            continue
        counts[j.zip_id if j.zip_id in zs else UNASSIGNED] += 1
    return dict(sorted(counts.items()))


def sparse_location_counts(metrics: Mapping[str, ZipInnovationMetrics]) -> dict[str, int]:
    """Drop zero rows: for partial-coverage sources a zero means "no data"."""
    return {z: m.location_count for z, m in metrics.items() if m.location_count > 0}


def per_business_normalization(row: ZipFeatureVector) -> float | None:
    if row.location_count >= 1:
        return row.permit_value_usd / row.location_count
    return None


def _check_keys(name: str, keys: Iterable[str], zs: ZoneSet) -> None:
    for k in keys:
        if k != UNASSIGNED and k not in zs:
            raise ValidationError(f"{name}: zip {k} is not in the zone set")


def assemble_feature_matrix(
    metrics: Mapping[str, ZipInnovationMetrics],
    osm_counts: Mapping[str, int],
    socio: Mapping[str, SocioRow],
    permits: Mapping[str, PermitCounts],
    jobs: Mapping[str, int],
    zs: ZoneSet,
) -> list[ZipFeatureVector]:
    """Outer join over the zone set, one row per zip in zip order.

    Missing POI and permit entries mean true absence and become 0. Missing
    OSM and job entries mean the source did not cover the zip and become null.
    """
    for name, m in (("metrics", metrics), ("osm", osm_counts), ("socio", socio), ("permits", permits), ("jobs", jobs)):
        _check_keys(name, m.keys(), zs)
    rows = []
    for zip_id in zs.zip_ids:
        m = metrics.get(zip_id) or ZipInnovationMetrics(zip_id)
        pc = permits.get(zip_id) or PermitCounts()
        s = socio.get(zip_id)
        row = ZipFeatureVector(
            zip_id=zip_id,
            location_count=m.location_count,
            total_rating_count=m.total_rating_count,
            weighted_mean_rating=m.weighted_mean_rating,
            osm_location_count=osm_counts.get(zip_id),
            job_count=jobs.get(zip_id),
            permit_count=pc.permit_count,
            permit_value_usd=pc.permit_value_usd,
            pop_total=s.pop_total if s else 0,
            pct_white=s.pct_white if s else None,
            pct_black=s.pct_black if s else None,
            pct_hispanic=s.pct_hispanic if s else None,
            vacancy_rate=s.vacancy_rate if s else None,
            median_income_usd=s.median_income_usd if s else None,
            median_home_value_usd=s.median_home_value_usd if s else None,
        )
        rows.append(_with_normalization(row))
    return rows


def _with_normalization(row: ZipFeatureVector) -> ZipFeatureVector:
    d = asdict(row)
    d["permit_value_per_business"] = per_business_normalization(row)
    return ZipFeatureVector(**d)


# -- export ------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_features_csv(path: str | Path, rows: Iterable[ZipFeatureVector]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_COLUMNS)
        for r in rows:
            w.writerow([_cell(getattr(r, c)) for c in FEATURE_COLUMNS])


def write_features_jsonl(path: str | Path, rows: Iterable[ZipFeatureVector]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps({c: getattr(r, c) for c in FEATURE_COLUMNS}))
            fh.write("\n")


_INT_COLUMNS = {"location_count", "total_rating_count", "osm_location_count", "job_count", "permit_count", "pop_total"}


def read_features_csv(path: str | Path) -> list[ZipFeatureVector]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            d = {}
            for c in FEATURE_COLUMNS:
                v = rec[c]
                if c == "zip_id":
                    d[c] = v
                elif v == "":
                    d[c] = None
                elif c in _INT_COLUMNS:
                    d[c] = int(v)
                else:
                    d[c] = float(v)
            rows.append(ZipFeatureVector(**d))
    return rows
