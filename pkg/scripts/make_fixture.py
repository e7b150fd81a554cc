"""Build the committed synthetic fixtures.

Two outputs:

* ``fixtures/synthetic_boston/``: 35 zip zones on a jittered 7x5 grid (one
  zone with a hole, one with an island part), 62 census tracts, ~300 keyword
  places, ~50 tag-query places, 100 job postings and 500 permits, all as raw
  source files and cassettes, plus ``golden_counts.json``. Every point is
  placed inside a known zone core (or deliberately outside every zone), so
  the golden counts come from the construction, not from the spatial join.
* ``tests/fixtures/cassettes/``: a handful of small hand-audited cassettes
  for the client unit tests.

Run from the repo root: ``python scripts/make_fixture.py``.
"""
from __future__ import annotations

import csv
import json
import math
import shutil
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

from innodex.poi import DEFAULT_KEYWORDS, DEFAULT_TAGS, overpass_query, request_key

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "fixtures" / "synthetic_boston"
SMALL = ROOT / "tests" / "fixtures"

SEED = 20230917
COLS, ROWS = 7, 5
W, E, S, N = -71.13, -70.99, 42.23, 42.39
ISLAND = (-70.975, 42.355, -70.962, 42.368)  # w, s, e, n
GAP_POINT = (-70.982, 42.30)  # inside the bbox, outside every zone
FAR_POINT = (-71.30, 42.30)  # outside the fetch region

ZIPS = [
    "02108", "02109", "02110", "02111", "02113", "02114", "02115",
    "02116", "02118", "02119", "02120", "02121", "02122", "02124",
    "02125", "02126", "02127", "02128", "02129", "02130", "02131",
    "02132", "02134", "02135", "02136", "02163", "02199", "02203",
    "02210", "02215", "02222", "02445", "02446", "02458", "02467",
]
HOTSPOT = (4.6, 2.4)  # grid units (col, row)
OUTSIDE_ZIPS = ["02138", "02139"]

R6 = lambda v: round(float(v), 6)  # noqa: E731


def lonlat(i: float, j: float) -> tuple[float, float]:
    return W + (E - W) * i / COLS, S + (N - S) * j / ROWS


# -- zones ---------------------------------------------------------------------


def build_grid(rng):
    cw, ch = (E - W) / COLS, (N - S) / ROWS
    verts = {}
    for i in range(COLS + 1):
        for j in range(ROWS + 1):
            x, y = lonlat(i, j)
            if 0 < i < COLS and 0 < j < ROWS:
                x += rng.uniform(-0.12, 0.12) * cw
                y += rng.uniform(-0.12, 0.12) * ch
            verts[(i, j)] = (R6(x), R6(y))
    mids = {}

    def mid(a, b):
        key = tuple(sorted((a, b)))
        if key not in mids:
            (x0, y0), (x1, y1) = verts[key[0]], verts[key[1]]
            mx, my = (x0 + x1) / 2, (y0 + y1) / 2
            boundary = (key[0][0] == key[1][0] in (0, COLS)) or (key[0][1] == key[1][1] in (0, ROWS))
            if not boundary:
                # push perpendicular to the edge
                dx, dy = x1 - x0, y1 - y0
                t = rng.uniform(-0.08, 0.08)
                mx += -dy * t
                my += dx * t
            mids[key] = (R6(mx), R6(my))
        return mids[key]

    cells = {}
    for j in range(ROWS):
        for i in range(COLS):
            c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            ring = []
            for a, b in zip(c, c[1:] + c[:1]):
                ring.append(verts[a])
                ring.append(mid(a, b))
            ring.append(ring[0])
            cells[(i, j)] = {"corners": [verts[v] for v in c], "ring": ring}
    return cells, verts


def bilinear(corners, u, v):
    (x0, y0), (x1, y1), (x2, y2), (x3, y3) = corners
    x = (1 - u) * (1 - v) * x0 + u * (1 - v) * x1 + u * v * x2 + (1 - u) * v * x3
    y = (1 - u) * (1 - v) * y0 + u * (1 - v) * y1 + u * v * y2 + (1 - u) * v * y3
    return x, y


# -- tracts --------------------------------------------------------------------

TCOLS, TROWS = 10, 6


def tract_rect(i, j):
    x0, y0 = W + (E - W) * i / TCOLS, S + (N - S) * j / TROWS
    x1, y1 = W + (E - W) * (i + 1) / TCOLS, S + (N - S) * (j + 1) / TROWS
    return R6(x0), R6(y0), R6(x1), R6(y1)


def rect_ring(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]


def choose_hole(cells):
    """Zone cell whose core centre sits nearest a tract centre; hole goes there."""
    best = None
    for (i, j), cell in cells.items():
        if (i, j) == (0, 0):
            continue
        cx, cy = bilinear(cell["corners"], 0.5, 0.5)
        ti = int((cx - W) / (E - W) * TCOLS)
        tj = int((cy - S) / (N - S) * TROWS)
        x0, y0, x1, y1 = tract_rect(ti, tj)
        tx, ty = (x0 + x1) / 2, (y0 + y1) / 2
        d = math.hypot((tx - cx) / ((E - W) / COLS), (ty - cy) / ((N - S) / ROWS))
        if best is None or d < best[0]:
            best = (d, (i, j), (ti, tj), (tx, ty), (x1 - x0, y1 - y0))
    d, cell, tract, (tx, ty), (tw, th) = best
    assert d < 0.08, d
    hw, hh = 0.15 * tw, 0.15 * th
    return cell, tract, (R6(tx - hw), R6(ty - hh), R6(tx + hw), R6(ty + hh))


# -- main ----------------------------------------------------------------------


def main():
    rng = np.random.default_rng(SEED)
    cells, verts = build_grid(rng)
    hole_cell, hole_tract, hole = choose_hole(cells)

    zip_of = {}
    for k, (i, j) in enumerate(sorted(cells, key=lambda c: (c[1], c[0]))):
        zip_of[(i, j)] = ZIPS[k]
    cell_of = {z: c for c, z in zip_of.items()}

    if OUT.exists():
        shutil.rmtree(OUT)
    (OUT / "cassettes").mkdir(parents=True)

    features = []
    for cell in sorted(cells, key=lambda c: zip_of[c]):
        z = zip_of[cell]
        polys = [[cells[cell]["ring"]]]
        if cell == hole_cell:
            hx0, hy0, hx1, hy1 = hole
            polys[0].append([(hx0, hy0), (hx0, hy1), (hx1, hy1), (hx1, hy0), (hx0, hy0)])
        if z == "02128":
            polys.append([rect_ring(*ISLAND)])
        features.append(
            {
                "type": "Feature",
                "properties": {"ZIP5": z, "NAME": f"Zone {z}"},
                "geometry": {
                    "type": "MultiPolygon",
                    "coordinates": [[[list(p) for p in ring] for ring in poly] for poly in polys],
                },
            }
        )
    _dump(OUT / "zones.geojson", {"type": "FeatureCollection", "features": features})

    from innodex.geo import load_zones, point_in_polygon, GeoPoint

    zs = load_zones(OUT / "zones.geojson")
    region = list(zs.bbox)
    hx0, hy0, hx1, hy1 = hole
    for corner in [(hx0, hy0), (hx1, hy1)]:
        assert point_in_polygon(GeoPoint(*corner), zs[zip_of[hole_cell]])

    def core_point(z, margin=0.28):
        """Uniform-ish point well inside zone ``z`` and away from its hole."""
        cell = cell_of[z]
        if cell == hole_cell:
            margin = 0.12
        while True:
            u, v = rng.uniform(margin, 1 - margin, 2)
            x, y = bilinear(cells[cell]["corners"], u, v)
            if cell == hole_cell:
                pad_x, pad_y = (hx1 - hx0) / 2, (hy1 - hy0) / 2
                if hx0 - pad_x <= x <= hx1 + pad_x and hy0 - pad_y <= y <= hy1 + pad_y:
                    continue
            return R6(x), R6(y)

    def heat(z):
        i, j = cell_of[z]
        d2 = (i + 0.5 - HOTSPOT[0]) ** 2 + (j + 0.5 - HOTSPOT[1]) ** 2
        return math.exp(-d2 / (2 * 1.3**2))

    golden_zip = {z: Counter() for z in ZIPS}
    agg = Counter()
    fetch = Counter()

    # ---- keyword places
    places = []
    pid = 0
    for z in ZIPS:
        n_z = int(rng.poisson(0.9 + 30 * heat(z)))
        for _ in range(n_z):
            pid += 1
            places.append({"place_id": f"ChIJsyn{pid:04d}", "zip": z, "pos": core_point(z)})
    # two places exactly on interior grid vertices: the smallest adjacent zip wins
    for (vi, vj) in [(4, 2), (2, 3)]:
        pid += 1
        adj = [zip_of[(vi - a, vj - b)] for a in (0, 1) for b in (0, 1)]
        places.append({"place_id": f"ChIJsyn{pid:04d}", "zip": min(adj), "pos": verts[(vi, vj)]})
    # one in the hole, one in the bbox gap: inside the region, outside every zone
    for pos in [(R6((hx0 + hx1) / 2), R6((hy0 + hy1) / 2)), GAP_POINT]:
        pid += 1
        places.append({"place_id": f"ChIJsyn{pid:04d}", "zip": None, "pos": pos})
    zone_n = Counter(p["zip"] for p in places)
    for p in places:
        if rng.random() < 0.1:
            p["rating"], p["count"] = None, 0
        else:
            base = 3.0 * math.sqrt(max(zone_n[p["zip"]], 1))
            p["count"] = int(rng.poisson(base)) + 1
            p["rating"] = round(float(np.clip(rng.normal(4.3, 0.4), 1.0, 5.0)), 1)
        p["name"] = f"Innovation Place {p['place_id'][-4:]}"
    kw_weights = np.array([3, 1, 2, 6, 1, 2, 3, 1, 3, 3, 1, 4], dtype=float)
    kw_weights /= kw_weights.sum()
    hits = defaultdict(list)
    for p in places:
        k = 1 + int(rng.integers(0, 3))
        terms = rng.choice(len(DEFAULT_KEYWORDS), size=k, replace=False, p=kw_weights)
        for t in sorted(terms.tolist()):
            term = DEFAULT_KEYWORDS[t]
            if len(hits[term]) < 58:
                hits[term].append(dict(p))
    # duplicates with drifting coordinates: two small drifts, one >100 m conflict
    drift_ids = [p["place_id"] for p in places if p["zip"] and p["count"] > 0][:3]
    for n_drift, place_id in enumerate(drift_ids):
        terms_with = [t for t in DEFAULT_KEYWORDS if any(h["place_id"] == place_id for h in hits[t])]
        spare = next(t for t in DEFAULT_KEYWORDS if t not in terms_with and len(hits[t]) < 58)
        src = next(p for p in places if p["place_id"] == place_id)
        twin = dict(src)
        off = 0.0003 if n_drift < 2 else 0.0016  # ~30 m vs ~150 m in latitude
        twin["pos"] = (src["pos"][0], R6(src["pos"][1] + off))
        twin["count"] = max(src["count"] - 1, 0)
        twin["rating"] = src["rating"] if twin["count"] > 0 else None
        hits[spare].append(twin)
    # a result outside the region that the client must drop
    hits["startups"].append({"place_id": "ChIJfar0001", "zip": None, "pos": FAR_POINT, "rating": 4.0, "count": 3, "name": "Far Away"})

    kw_dir = OUT / "cassettes" / "keyword_search"
    raw_in_region = 0
    for term in DEFAULT_KEYWORDS:
        items = hits.get(term, [])
        pages = [items[i : i + 20] for i in range(0, len(items), 20)] or [[]]
        token = None
        for n_page, page in enumerate(pages):
            nxt = f"tok-{DEFAULT_KEYWORDS.index(term)}-{n_page + 1}" if n_page + 1 < len(pages) else None
            body = {"html_attributions": [], "results": [_google(p) for p in page], "status": "OK" if page else "ZERO_RESULTS"}
            if nxt:
                body["next_page_token"] = nxt
            _cassette(kw_dir, "keyword_search", {"query": term, "region": region, "page_token": token}, body)
            token = nxt
        raw_in_region += sum(1 for p in items if p["place_id"] != "ChIJfar0001")
    fetch["keyword_search_raw"] = raw_in_region
    unique = {p["place_id"]: p for t in hits.values() for p in t if p["place_id"] != "ChIJfar0001"}
    fetch["keyword_search_records"] = len(unique)
    for place_id, p in unique.items():
        src = next(q for q in places if q["place_id"] == place_id)
        if src["zip"]:
            golden_zip[src["zip"]]["location_count"] += 1
            agg["pois_assigned"] += 1
        else:
            agg["pois_unassigned"] += 1
    agg["pois"] = len(unique)

    # ---- tag query (partial coverage: hottest zones only)
    hot = sorted(ZIPS, key=lambda z: -heat(z))[:11]
    elements = []
    eid = 1000
    for z in hot:
        for _ in range(int(rng.integers(2, 7))):
            eid += 1
            n_tags = 1 + int(rng.random() < 0.2)
            tags = {}
            for t in rng.choice(3, size=n_tags, replace=False).tolist():
                k, v = DEFAULT_TAGS[t].split("=")
                tags[k] = v
            tags["name"] = f"OSM place {eid}"
            x, y = core_point(z)
            if eid % 5 == 0:
                elements.append({"type": "way", "id": eid, "center": {"lat": y, "lon": x}, "tags": tags})
            else:
                elements.append({"type": "node", "id": eid, "lat": y, "lon": x, "tags": tags})
            golden_zip[z]["osm_location_count"] += 1
    # unmatched tag, region-external, and gap elements
    x, y = core_point(hot[0])
    elements.append({"type": "node", "id": 9001, "lat": y, "lon": x, "tags": {"office": "lawyer"}})
    elements.append({"type": "node", "id": 9002, "lat": FAR_POINT[1], "lon": FAR_POINT[0], "tags": {"office": "coworking"}})
    elements.append({"type": "node", "id": 9003, "lat": GAP_POINT[1], "lon": GAP_POINT[0], "tags": {"office": "research"}})
    _cassette(OUT / "cassettes" / "tag_query", "tag_query", {"query": overpass_query(list(DEFAULT_TAGS), region)}, {"version": 0.6, "elements": elements})
    n_osm = len(elements) - 2
    fetch["tag_query_raw"] = fetch["tag_query_records"] = n_osm
    agg["osm_pois"] = n_osm
    agg["osm_unassigned"] = 1

    # ---- job postings
    job_zips = sorted(ZIPS, key=lambda z: -heat(z))[:9]
    jobs = []
    for n in range(100):
        key = f"job{n:04d}"
        title = ["Software Engineer", "Data Scientist", "Product Manager", "Lab Technician"][n % 4]
        if n < 55:
            z = job_zips[int(rng.integers(0, len(job_zips)))]
            if n % 3 == 0:
                item = {"jobkey": key, "title": title, "formatted_location": f"Boston, MA {z}"}
            else:
                x, y = core_point(z)
                item = {"jobkey": key, "title": title, "formatted_location": "Boston, MA", "postal_code": z, "latitude": y, "longitude": x}
            golden_zip[z]["job_count"] += 1
        elif n < 60:
            z = OUTSIDE_ZIPS[n % 2]
            item = {"jobkey": key, "title": title, "formatted_location": f"Cambridge, MA {z}", "postal_code": z}
        else:
            item = {"jobkey": key, "title": title, "formatted_location": ["Boston, MA", "Remote", "Greater Boston"][n % 3]}
        jobs.append(item)
    _cassette(OUT / "cassettes" / "jobs", "jobs", {"query": "technology", "region": region}, {"results": jobs})
    fetch["jobs_raw"] = fetch["jobs_records"] = 100
    fetch["jobs_with_zip"] = 60
    agg["jobs"] = 100
    agg["jobs_with_zip"] = 60
    agg["jobs_outside_zones"] = 5

    # ---- registry dump
    with open(OUT / "registry.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for n in range(15):
            z = hot[n % len(hot)]
            x, y = core_point(z)
            rec = {"id": f"org-{n:03d}", "name": f"Registry startup {n}", "lon": x, "lat": y, "categories": ["software"] if n % 2 else ["biotech"]}
            if n == 3:
                rec["id"] = "org-002"  # a duplicate export row
            fh.write(json.dumps(rec) + "\n")
    fetch["registry_raw"] = 15
    fetch["registry_records"] = 14

    # ---- tracts + census
    tract_feats = []
    census_rows = []
    geoid = 25025000100
    tract_specs = [(tract_rect(i, j), (i, j)) for j in range(TROWS) for i in range(TCOLS)]
    tract_specs.append(((ISLAND[0], ISLAND[1], ISLAND[2], ISLAND[3]), None))
    tract_specs.append(((-71.20, 42.36, -71.18, 42.38), "outside"))
    for n, (rect, tag) in enumerate(tract_specs):
        tid = str(geoid + 100 * n)
        tract_feats.append({"type": "Feature", "properties": {"GEOID": tid}, "geometry": {"type": "Polygon", "coordinates": [[list(p) for p in rect_ring(*rect)]]}})
        cx = (rect[0] + rect[2]) / 2
        cy = (rect[1] + rect[3]) / 2
        gi = (cx - W) / (E - W) * COLS
        gj = (cy - S) / (N - S) * ROWS
        central = math.exp(-((gi - HOTSPOT[0]) ** 2 + (gj - HOTSPOT[1]) ** 2) / (2 * 1.8**2))
        pop = int(rng.integers(1500, 6000)) if tag != "outside" else 3000
        white_share = float(np.clip(0.25 + 0.55 * central + rng.normal(0, 0.08), 0.05, 0.95))
        black_share = float(np.clip((1 - white_share) * rng.uniform(0.3, 0.7), 0, 1 - white_share))
        hisp_share = float(np.clip((1 - white_share - black_share) * rng.uniform(0.4, 0.9), 0, 1))
        housing = int(pop / rng.uniform(2.0, 2.6))
        vacancy = float(np.clip(0.04 + 0.08 * central + rng.normal(0, 0.015), 0.01, 0.3))
        income = int(45000 + 70000 * central + rng.normal(0, 8000))
        home = int(350000 + 500000 * central + rng.normal(0, 40000))
        census_rows.append(
            {
                "GEOID": tid,
                "B01003_001E": pop,
                "B03002_003E": int(pop * white_share),
                "B03002_004E": int(pop * black_share),
                "B03002_012E": int(pop * hisp_share),
                "B25002_003E": int(housing * vacancy),
                "B25002_001E": housing,
                "B19013_001E": income if n % 23 != 7 else -666666666,
                "B25077_001E": home,
            }
        )
    _dump(OUT / "tracts.geojson", {"type": "FeatureCollection", "features": tract_feats})
    with open(OUT / "census.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(census_rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(census_rows)
    agg["tracts_census"] = agg["tracts_geometries"] = len(census_rows)
    agg["tracts_unassigned"] = 1
    agg["tracts_partial"] = 1
    agg["pop_total_tracts"] = sum(r["B01003_001E"] for r in census_rows)

    # ---- permits
    occ_choices = ["Commercial", "Mixed Use", "Residential", "Other"]
    occ_p = [0.45, 0.15, 0.35, 0.05]
    with open(OUT / "permits.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["permit_id", "lon", "lat", "occupancy", "declared_value", "issued_date"])
        zone_w = np.array([0.3 + heat(z) for z in ZIPS])
        zone_w /= zone_w.sum()
        for n in range(500):
            pid_ = f"BP{n:05d}"
            occ = occ_choices[int(rng.choice(4, p=occ_p))]
            value = "" if rng.random() < 0.1 else f"{float(rng.lognormal(11, 1.2)):.2f}"
            date = f"{2012 + n % 7}-{1 + n % 12:02d}-{1 + n % 28:02d}"
            if n % 167 == 5:
                w.writerow([pid_, "", "", occ, value, date])
                continue
            keep = occ in ("Commercial", "Mixed Use")
            if n % 61 == 9:
                x, y = GAP_POINT
                z = None
            else:
                z = ZIPS[int(rng.choice(len(ZIPS), p=zone_w))]
                x, y = core_point(z)
            w.writerow([pid_, x, y, occ, value, date])
            agg["permits_loaded"] += 1
            if keep:
                agg["permits_filtered"] += 1
                if value == "":
                    agg["permits_null_value"] += 1
                if z is None:
                    agg["permits_unassigned"] += 1
                else:
                    golden_zip[z]["permit_count"] += 1

    agg["zones"] = agg["feature_rows"] = len(ZIPS)

    config = {
        "zones_path": "zones.geojson",
        "tracts_path": "tracts.geojson",
        "census_path": "census.csv",
        "permits_path": "permits.csv",
        "registry_path": "registry.jsonl",
        "cassette_dir": "cassettes",
        "output_dir": "out",
        "census_columns": {
            "tract_id": "GEOID",
            "pop_total": "B01003_001E",
            "pop_white": "B03002_003E",
            "pop_black": "B03002_004E",
            "pop_hispanic": "B03002_012E",
            "vacant_units": "B25002_003E",
            "housing_units": "B25002_001E",
            "median_income_usd": "B19013_001E",
            "median_home_value_usd": "B25077_001E",
        },
        "random_seed": SEED,
        "crosswalk_samples": 2000,
        "k_classes": 5,
        "sources": {
            "keyword_search": {"mode": "replay", "rate_limit_rps": 5.0},
            "tag_query": {"mode": "replay", "rate_limit_rps": 1.0},
            "jobs": {"mode": "replay", "rate_limit_rps": 1.0},
        },
    }
    import yaml

    (OUT / "innodex.yaml").write_text(
        "# Synthetic Boston-shaped fixture; regenerate with scripts/make_fixture.py\n"
        + yaml.safe_dump(config, sort_keys=False),
        encoding="utf-8",
    )

    per_zip = {}
    for z in ZIPS:
        g = golden_zip[z]
        per_zip[z] = {
            "location_count": g["location_count"],
            "osm_location_count": g["osm_location_count"] or None,
            "job_count": g["job_count"] or None,
            "permit_count": g["permit_count"],
        }
    golden = {
        "fetch": dict(sorted(fetch.items())),
        "aggregate": dict(sorted(agg.items())),
        "per_zip": per_zip,
        "hole_zip": zip_of[hole_cell],
        "vertex_ties": [p["zip"] for p in places if p["place_id"] in ("ChIJsyn%04d" % (pid - 3), "ChIJsyn%04d" % (pid - 2))],
    }
    _dump(OUT / "golden_counts.json", golden, indent=1)
    print(f"wrote {OUT}: {len(unique)} keyword places, {n_osm} tag places, 500 permits, {len(census_rows)} tracts")

    make_small()


def _google(p):
    item = {"place_id": p["place_id"], "name": p["name"], "geometry": {"location": {"lat": p["pos"][1], "lng": p["pos"][0]}}}
    if p.get("count"):
        item["rating"] = p["rating"]
        item["user_ratings_total"] = p["count"]
    return item


def _cassette(directory: Path, source: str, params: dict, body: dict):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{request_key(source, params)}.json").write_text(json.dumps(body, indent=1) + "\n", encoding="utf-8")


def _dump(path: Path, doc, indent=None):
    path.write_text(json.dumps(doc, indent=indent) + "\n", encoding="utf-8")


SMALL_REGION = [-71.10, 42.30, -71.00, 42.40]


def make_small():
    """Hand-audited cassettes for the client tests."""
    root = SMALL / "cassettes"
    if root.exists():
        shutil.rmtree(root)
    ks = root / "keyword_search"
    f = [
        ("F001", -71.058, 42.355, 4.6, 120),
        ("F002", -71.052, 42.348, 4.1, 35),
        ("F003", -71.041, 42.351, None, 0),
        ("F004", -71.085, 42.362, 4.9, 8),
        ("F005", -71.031, 42.367, 3.8, 12),
        ("F006", -71.064, 42.331, 4.4, 61),
        ("F007", -71.099, 42.305, 5.0, 1),
    ]

    def item(pid, x, y, r, n):
        d = {"place_id": pid, "name": f"Incubator {pid}", "geometry": {"location": {"lat": y, "lng": x}}}
        if n:
            d["rating"], d["user_ratings_total"] = r, n
        return d

    page1 = [item(*t) for t in f[:5]]
    page2 = [item(*t) for t in f[5:]] + [item("F999", -71.25, 42.35, 4.0, 2)]
    _cassette(ks, "keyword_search", {"query": "incubator", "region": SMALL_REGION, "page_token": None},
              {"results": page1, "status": "OK", "next_page_token": "inc-2"})
    _cassette(ks, "keyword_search", {"query": "incubator", "region": SMALL_REGION, "page_token": "inc-2"},
              {"results": page2, "status": "OK"})
    _cassette(ks, "keyword_search", {"query": "startups", "region": SMALL_REGION, "page_token": None},
              {"results": [item("F001", -71.058, 42.355, 4.6, 120), item("F010", -71.05, 42.36, 4.2, 9)], "status": "OK"})
    _cassette(ks, "keyword_search", {"query": "regional innovation", "region": SMALL_REGION, "page_token": None},
              {"results": [], "status": "ZERO_RESULTS"})
    _cassette(ks, "keyword_search", {"query": "overloaded", "region": SMALL_REGION, "page_token": None},
              {"results": [], "status": "OVER_QUERY_LIMIT"})

    tq = root / "tag_query"
    elems = [
        {"type": "node", "id": 11, "lat": 42.351, "lon": -71.046, "tags": {"office": "coworking", "name": "Desk One"}},
        {"type": "node", "id": 12, "lat": 42.362, "lon": -71.083, "tags": {"office": "coworking", "name": "Desk Two"}},
        {"type": "way", "id": 13, "center": {"lat": 42.339, "lon": -71.070}, "tags": {"office": "coworking", "name": "Desk Three"}},
        {"type": "node", "id": 14, "lat": 42.340, "lon": -71.071, "tags": {"office": "lawyer"}},
    ]
    _cassette(tq, "tag_query", {"query": overpass_query(["office=coworking"], SMALL_REGION)}, {"elements": elems})
    _cassette(tq, "tag_query", {"query": overpass_query(["company=unicorn"], SMALL_REGION)}, {"elements": []})

    jb = root / "jobs"
    jobs = [
        {"jobkey": "J01", "title": "Backend Engineer", "formatted_location": "Boston, MA 02110"},
        {"jobkey": "J02", "title": "Data Engineer", "formatted_location": "Boston, MA", "postal_code": "02210", "latitude": 42.347, "longitude": -71.04},
        {"jobkey": "J03", "title": "ML Engineer", "formatted_location": "Boston, MA 02116-4001"},
        {"jobkey": "J04", "title": "Designer", "formatted_location": "Boston, MA"},
        {"jobkey": "J05", "title": "QA Analyst", "formatted_location": "Cambridge, MA 02138"},
        {"jobkey": "J06", "title": "DevOps", "formatted_location": "Remote"},
        {"jobkey": "J07", "title": "Researcher", "formatted_location": "Boston, MA", "postal_code": "02115"},
        {"jobkey": "J08", "title": "Analyst", "formatted_location": ""},
        {"jobkey": "J09", "title": "SRE", "formatted_location": "Boston, MA 02109"},
        {"jobkey": "J10", "title": "Support", "formatted_location": "Greater Boston Area"},
    ]
    _cassette(jb, "jobs", {"query": "technology", "region": SMALL_REGION}, {"results": jobs})
    _cassette(jb, "jobs", {"query": "nothing", "region": SMALL_REGION}, {"results": []})


if __name__ == "__main__":
    main()
