"""Planar geometry for zip zones: area, containment and an indexed spatial join.

Coordinates are (lon, lat) degrees. Areas use an equirectangular projection
centred on each zone's mean latitude; containment is evaluated directly in
degrees, which gives the same answer because the projection only rescales
the axes.
"""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ValidationError

log = logging.getLogger(__name__)

KM_PER_DEGREE = 111.32
_ZIP_RE = re.compile(r"^\d{5}$")

Ring = tuple[tuple[float, float], ...]
Polygon = tuple[Ring, ...]


@dataclass(frozen=True, slots=True)
class GeoPoint:
    lon: float
    lat: float

    def __post_init__(self):
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise ValidationError(f"non-finite coordinate ({self.lon}, {self.lat})")
        if not (-180.0 <= self.lon <= 180.0 and -90.0 <= self.lat <= 90.0):
            raise ValidationError(f"coordinate out of range ({self.lon}, {self.lat})")


def _as_ring(points: Iterable) -> Ring:
    out = []
    for pt in points:
        if isinstance(pt, GeoPoint):
            out.append((float(pt.lon), float(pt.lat)))
        else:
            lon, lat = pt[0], pt[1]
            out.append((float(lon), float(lat)))
    return tuple(out)


def _check_ring(ring: Ring, zip_id: str) -> None:
    if len(ring) < 4:
        raise ValidationError(f"zone {zip_id}: ring has {len(ring)} points, need >= 4")
    if ring[0] != ring[-1]:
        raise ValidationError(f"zone {zip_id}: ring is not closed")
    for lon, lat in ring:
        if not (math.isfinite(lon) and math.isfinite(lat)):
            raise ValidationError(f"zone {zip_id}: non-finite vertex")
        if not (-180.0 <= lon <= 180.0 and -90.0 <= lat <= 90.0):
            raise ValidationError(f"zone {zip_id}: vertex ({lon}, {lat}) out of range")


def _shoelace(ring: Ring, kx: float, ky: float) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        s += (x0 * kx) * (y1 * ky) - (x1 * kx) * (y0 * ky)
    return abs(s) / 2.0


@dataclass(frozen=True)
class ZipZone:
    """A zip area. ``polygons`` holds one tuple of rings per part, outer ring first."""

    zip_id: str
    polygons: tuple[Polygon, ...]
    area_km2: float = field(init=False, compare=False)
    bbox: tuple[float, float, float, float] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        polys = tuple(tuple(_as_ring(r) for r in poly) for poly in self.polygons)
        object.__setattr__(self, "polygons", polys)
        if not polys or any(not poly for poly in polys):
            raise ValidationError(f"zone {self.zip_id}: no rings")
        for poly in polys:
            for ring in poly:
                _check_ring(ring, self.zip_id)
        xs = [x for poly in polys for x, _ in poly[0]]
        ys = [y for poly in polys for _, y in poly[0]]
        object.__setattr__(self, "bbox", (min(xs), min(ys), max(xs), max(ys)))
        object.__setattr__(self, "area_km2", polygon_area_km2(self))

    @classmethod
    def from_rings(cls, zip_id: str, rings: Sequence) -> "ZipZone":
        """Single-part zone: first ring outer, the rest holes."""
        return cls(zip_id, (tuple(rings),))


def polygon_area_km2(zone: ZipZone) -> float:
    """Outer rings minus holes, in km², on a projection centred at the zone's mean latitude."""
    for poly in zone.polygons:
        for ring in poly:
            _check_ring(_as_ring(ring), zone.zip_id)
    lats = [y for poly in zone.polygons for _, y in poly[0][:-1]]
    mean_lat = sum(lats) / len(lats)
    kx = KM_PER_DEGREE * math.cos(math.radians(mean_lat))
    ky = KM_PER_DEGREE
    total = 0.0
    for poly in zone.polygons:
        part = _shoelace(poly[0], kx, ky)
        for hole in poly[1:]:
            part -= _shoelace(hole, kx, ky)
        total += part
    return max(total, 0.0)


def _ring_test(x: float, y: float, ring: Ring) -> int:
    """0 outside, 1 inside, 2 on the boundary (even-odd rule)."""
    inside = False
    x0, y0 = ring[0]
    for x1, y1 in ring[1:]:
        if (
            min(x0, x1) <= x <= max(x0, x1)
            and min(y0, y1) <= y <= max(y0, y1)
            and (x1 - x0) * (y - y0) == (y1 - y0) * (x - x0)
        ):
            return 2
        if (y0 > y) != (y1 > y):
            xc = x0 + (x1 - x0) * (y - y0) / (y1 - y0)
            if x < xc:
                inside = not inside
        x0, y0 = x1, y1
    return 1 if inside else 0


def _contains(zone: ZipZone, x: float, y: float) -> bool:
    for poly in zone.polygons:
        state = _ring_test(x, y, poly[0])
        if state == 2:
            return True
        if state == 0:
            continue
        for hole in poly[1:]:
            h = _ring_test(x, y, hole)
            if h == 2:
                return True
            if h == 1:
                break
        else:
            return True
    return False


def point_in_polygon(p: GeoPoint, zone: ZipZone) -> bool:
    """Boundary-inclusive containment: edges of outer rings and holes count as inside."""
    return _contains(zone, p.lon, p.lat)


class ZoneSet:
    """Immutable collection of zones with a uniform-grid bounding-box index.

    The grid only narrows the candidate list; every candidate is confirmed with
    an exact containment test, so a coarse grid costs speed, never correctness.
    """

    def __init__(self, zones: Iterable[ZipZone], grid_size: int | None = None):
        zones = sorted(zones, key=lambda z: z.zip_id)
        if not zones:
            raise ValidationError("zone set is empty")
        seen = set()
        for z in zones:
            if z.zip_id in seen:
                raise ValidationError(f"duplicate zip_id {z.zip_id}")
            seen.add(z.zip_id)
            if not z.area_km2 > 0:
                raise ValidationError(f"zone {z.zip_id} has zero area")
        self._zones = tuple(zones)
        self._by_id = {z.zip_id: z for z in zones}
        x0 = min(z.bbox[0] for z in zones)
        y0 = min(z.bbox[1] for z in zones)
        x1 = max(z.bbox[2] for z in zones)
        y1 = max(z.bbox[3] for z in zones)
        self.bbox = (x0, y0, x1, y1)
        g = grid_size or max(1, 2 * math.ceil(math.sqrt(len(zones))))
        self._g = g
        self._cw = (x1 - x0) / g or 1.0
        self._ch = (y1 - y0) / g or 1.0
        cells: dict[tuple[int, int], list[int]] = {}
        for i, z in enumerate(zones):
            ca, ra = self._cell(z.bbox[0], z.bbox[1])
            cb, rb = self._cell(z.bbox[2], z.bbox[3])
            for c in range(ca, cb + 1):
                for r in range(ra, rb + 1):
                    cells.setdefault((c, r), []).append(i)
        self._cells = {k: tuple(v) for k, v in cells.items()}

    def _cell(self, x: float, y: float) -> tuple[int, int]:
        c = int(math.floor((x - self.bbox[0]) / self._cw))
        r = int(math.floor((y - self.bbox[1]) / self._ch))
        return min(max(c, 0), self._g - 1), min(max(r, 0), self._g - 1)

    def __len__(self):
        return len(self._zones)

    def __iter__(self):
        return iter(self._zones)

    def __contains__(self, zip_id) -> bool:
        return zip_id in self._by_id

    def __getitem__(self, zip_id: str) -> ZipZone:
        return self._by_id[zip_id]

    @property
    def zones(self) -> tuple[ZipZone, ...]:
        return self._zones

    @property
    def zip_ids(self) -> list[str]:
        return [z.zip_id for z in self._zones]

    def candidates(self, x: float, y: float) -> list[ZipZone]:
        """Zones whose bounding box contains (x, y); a superset of the true hits."""
        bx0, by0, bx1, by1 = self.bbox
        if not (bx0 <= x <= bx1 and by0 <= y <= by1):
            return []
        out = []
        for i in self._cells.get(self._cell(x, y), ()):
            z = self._zones[i]
            zx0, zy0, zx1, zy1 = z.bbox
            if zx0 <= x <= zx1 and zy0 <= y <= zy1:
                out.append(z)
        return out

    def locate(self, lon: float, lat: float) -> str | None:
        # zones are sorted by zip_id, so the first hit is the lexicographic minimum
        for z in self.candidates(lon, lat):
            if _contains(z, lon, lat):
                return z.zip_id
        return None


def assign_zone(p: GeoPoint, zs: ZoneSet) -> str | None:
    """Zip containing ``p``; shared-boundary ties go to the smallest zip_id."""
    return zs.locate(p.lon, p.lat)


def _normalise_zip(value) -> str:
    if isinstance(value, int):
        value = str(value).zfill(5)
    value = str(value).strip()
    if not _ZIP_RE.match(value):
        raise ValidationError(f"zip id {value!r} is not a 5-digit string")
    return value


def _geometry_polygons(geom: dict, label: str) -> list[Polygon]:
    kind = geom.get("type") if geom else None
    if kind == "Polygon":
        return [tuple(_as_ring(r) for r in geom["coordinates"])]
    if kind == "MultiPolygon":
        return [tuple(_as_ring(r) for r in poly) for poly in geom["coordinates"]]
    raise ValidationError(f"{label}: unsupported geometry type {kind!r}")


def read_polygons(path: str | Path, id_property: str, normalise=lambda v: str(v).strip()) -> dict[str, list[Polygon]]:
    """Polygons per id from a GeoJSON FeatureCollection; features sharing an id are merged."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValidationError(f"{path}: not a GeoJSON FeatureCollection")
    parts: dict[str, list[Polygon]] = {}
    for i, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        if id_property not in props or props[id_property] is None:
            raise ValidationError(f"{path}: feature {i} lacks property {id_property!r}")
        key = normalise(props[id_property])
        parts.setdefault(key, []).extend(_geometry_polygons(feat.get("geometry"), f"feature {i}"))
    return parts


def load_zones(path: str | Path, id_property: str = "ZIP5") -> ZoneSet:
    raw = read_polygons(path, id_property, _normalise_zip)
    zones = [ZipZone(key, tuple(polys)) for key, polys in raw.items()]
    return ZoneSet(zones)


def zone_to_geojson_geometry(zone: ZipZone) -> dict:
    return {
        "type": "MultiPolygon",
        "coordinates": [[[list(pt) for pt in ring] for ring in poly] for poly in zone.polygons],
    }


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    la1, la2 = math.radians(a.lat), math.radians(b.lat)
    dlat = la2 - la1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin(dlon / 2) ** 2
    return 2 * 6371008.8 * math.asin(min(1.0, math.sqrt(h)))
