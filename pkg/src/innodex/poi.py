"""Innovation-place sources behind a record/replay layer, plus normalisation and dedupe.

Three sources feed the index:

* ``keyword_search``: a places text-search API queried once per keyword,
* ``tag_query``: an Overpass-style tag query (no ratings),
* ``registry``: a pre-exported JSONL dump (no client).

Job postings come from a fourth client and are kept apart from places.
Every remote call goes through :class:`Cassette`, which stores raw response
bodies under ``<cassette_dir>/<source>/<sha256 of request>.json``. In replay
mode nothing touches the network.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import threading
import time
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .errors import ConfigError, SourceError, ValidationError
from .geo import GeoPoint, haversine_m

log = logging.getLogger(__name__)

DEFAULT_KEYWORDS = (
    "innovation hubs",
    "clustering",
    "innovation center",
    "startups",
    "innovation districts",
    "open innovation",
    "tech hub",
    "technology park",
    "incubator",
    "accelerators",
    "regional innovation",
    "co-working space",
)
DEFAULT_TAGS = ("company=startup", "office=coworking", "office=research")

DUPLICATE_DISTANCE_M = 100.0
MAX_ATTEMPTS = 5


class Source(str, Enum):
    keyword_search = "keyword_search"
    tag_query = "tag_query"
    registry = "registry"


class DataQualityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PoiRecord:
    source: Source
    place_id: str
    name: str
    location: GeoPoint
    rating: float | None
    rating_count: int
    matched_terms: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "matched_terms", frozenset(self.matched_terms))
        if not self.place_id:
            raise ValidationError("place_id must be non-empty")
        if self.rating_count < 0:
            raise ValidationError(f"{self.place_id}: negative rating_count")
        if self.rating is not None:
            if not 1.0 <= self.rating <= 5.0:
                raise ValidationError(f"{self.place_id}: rating {self.rating} outside [1, 5]")
            if self.rating_count < 1:
                raise ValidationError(f"{self.place_id}: rating without ratings")

    def to_json(self) -> str:
        return json.dumps(
            {
                "source": self.source.value,
                "place_id": self.place_id,
                "name": self.name,
                "lon": self.location.lon,
                "lat": self.location.lat,
                "rating": self.rating,
                "rating_count": self.rating_count,
                "matched_terms": sorted(self.matched_terms),
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "PoiRecord":
        return cls(
            source=Source(d["source"]),
            place_id=str(d["place_id"]),
            name=d.get("name") or "",
            location=GeoPoint(float(d["lon"]), float(d["lat"])),
            rating=None if d.get("rating") is None else float(d["rating"]),
            rating_count=int(d.get("rating_count") or 0),
            matched_terms=frozenset(d.get("matched_terms") or ()),
        )


@dataclass(frozen=True)
class JobPosting:
    posting_id: str
    title: str
    zip_id: str | None
    location: GeoPoint | None

    def to_json(self) -> str:
        return json.dumps(
            {
                "posting_id": self.posting_id,
                "title": self.title,
                "zip_id": self.zip_id,
                "lon": None if self.location is None else self.location.lon,
                "lat": None if self.location is None else self.location.lat,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_dict(cls, d: dict) -> "JobPosting":
        loc = None
        if d.get("lon") is not None and d.get("lat") is not None:
            loc = GeoPoint(float(d["lon"]), float(d["lat"]))
        return cls(str(d["posting_id"]), d.get("title") or "", d.get("zip_id"), loc)


@dataclass(frozen=True)
class KeywordSet:
    terms: tuple[str, ...] = DEFAULT_KEYWORDS


def normalize_rating(rating, rating_count) -> tuple[float | None, int]:
    """A mean over zero ratings is meaningless, so it becomes null.

    A count without a rating is dropped too, keeping "rating is null" and
    "rating_count is 0" equivalent downstream.
    """
    n = int(rating_count or 0)
    if n <= 0 or rating is None:
        return None, 0
    return float(rating), n


# -- record / replay ---------------------------------------------------------


def request_key(source: str, params: dict) -> str:
    blob = json.dumps({"source": source, "params": params}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class TokenBucket:
    """Blocking rate limiter; ``rate`` requests per second, burst of ``capacity``."""

    def __init__(self, rate: float, capacity: float = 1.0, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ConfigError("rate_limit_rps must be positive")
        self.rate = rate
        self.capacity = capacity
        self._tokens = capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                self._sleep((1.0 - self._tokens) / self.rate)


# transport(method, url, params, data) -> response body text; raises on failure
Transport = Callable[[str, str, dict, "str | None"], str]


def requests_transport(method: str, url: str, params: dict, data: str | None) -> str:
    import requests

    resp = requests.request(method, url, params=params, data=data, timeout=60)
    resp.raise_for_status()
    return resp.text


class Cassette:
    """Raw response store for one source."""

    def __init__(
        self,
        root: str | Path,
        source: str,
        mode: str = "replay",
        transport: Transport | None = None,
        rate_limit_rps: float = 1.0,
        sleep=time.sleep,
        backoff_base: float = 1.0,
    ):
        if mode not in ("live", "replay"):
            raise ConfigError(f"source {source}: mode must be live or replay, got {mode!r}")
        self.dir = Path(root) / source
        self.source = source
        self.mode = mode
        self.transport = transport or requests_transport
        self.bucket = TokenBucket(rate_limit_rps, sleep=sleep) if mode == "live" else None
        self._sleep = sleep
        self.backoff_base = backoff_base

    def path_for(self, params: dict) -> Path:
        return self.dir / f"{request_key(self.source, params)}.json"

    def fetch(self, params: dict, method: str = "GET", url: str = "", wire_params=None, data=None) -> str:
        """Body for ``params``; live mode also records it."""
        path = self.path_for(params)
        if self.mode == "replay":
            if not path.exists():
                raise ConfigError(
                    f"source {self.source}: no cassette for {json.dumps(params, sort_keys=True)} ({path})"
                )
            return path.read_text(encoding="utf-8")
        body = self._live(method, url, wire_params if wire_params is not None else params, data)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body, encoding="utf-8", newline="\n")
        return body

    def _live(self, method, url, params, data) -> str:
        last = None
        for attempt in range(MAX_ATTEMPTS):
            self.bucket.acquire()
            try:
                return self.transport(method, url, params, data)
            except Exception as exc:  # transport errors vary by backend
                last = exc
                log.warning("%s attempt %d failed: %s", self.source, attempt + 1, exc)
                if attempt + 1 < MAX_ATTEMPTS:
                    self._sleep(self.backoff_base * 2**attempt)
        raise SourceError(f"source {self.source}: giving up after {MAX_ATTEMPTS} attempts: {last}")


def _region_params(region: Sequence[float]) -> list[float]:
    w, s, e, n = (float(v) for v in region)
    if not (w < e and s < n):
        raise ValidationError(f"degenerate region {region}")
    return [w, s, e, n]


def _in_region(p: GeoPoint, region) -> bool:
    w, s, e, n = region
    return w <= p.lon <= e and s <= p.lat <= n


# -- clients ---------------------------------------------------------------


class KeywordSearchClient:
    """Places text search, paginated via ``next_page_token``."""

    url = "https://maps.googleapis.com/maps/api/place/textsearch/json"

    def __init__(self, cassette: Cassette, api_key: str | None = None, max_pages: int = 3):
        self.cassette = cassette
        self.api_key = api_key if api_key is not None else os.environ.get("GOOGLE_PLACES_API_KEY", "")
        self.max_pages = max_pages

    def _wire(self, term, region, token):
        w, s, e, n = region
        clat, clon = (s + n) / 2, (w + e) / 2
        half_diag = math.hypot((e - w) / 2 * 111320 * math.cos(math.radians(clat)), (n - s) / 2 * 111320)
        wire = {"query": term, "location": f"{clat},{clon}", "radius": int(math.ceil(half_diag)), "key": self.api_key}
        if token:
            wire["pagetoken"] = token
        return wire

    def fetch(self, term: str, region: Sequence[float]) -> list[PoiRecord]:
        region = _region_params(region)
        out: list[PoiRecord] = []
        token = None
        for _ in range(self.max_pages):
            params = {"query": term, "region": region, "page_token": token}
            body = self.cassette.fetch(params, url=self.url, wire_params=self._wire(term, region, token))
            doc = json.loads(body)
            status = doc.get("status", "OK")
            if status not in ("OK", "ZERO_RESULTS"):
                raise SourceError(f"keyword_search {term!r}: status {status}")
            for item in doc.get("results", []):
                rec = _place_from_search(item, term)
                if rec is not None and _in_region(rec.location, region):
                    out.append(rec)
            token = doc.get("next_page_token")
            if not token:
                break
        return out


def _place_from_search(item: dict, term: str) -> PoiRecord | None:
    loc = (item.get("geometry") or {}).get("location") or {}
    if "lat" not in loc or "lng" not in loc or not item.get("place_id"):
        log.warning("keyword_search: dropping malformed result %r", item.get("place_id"))
        return None
    rating, count = normalize_rating(item.get("rating"), item.get("user_ratings_total"))
    return PoiRecord(
        Source.keyword_search,
        str(item["place_id"]),
        item.get("name") or "",
        GeoPoint(float(loc["lng"]), float(loc["lat"])),
        rating,
        count,
        frozenset([term]),
    )


def keyword_fetch(term: str, region, client: KeywordSearchClient) -> list[PoiRecord]:
    return client.fetch(term, region)


def _parse_tag(tag: str) -> tuple[str, str]:
    key, sep, value = tag.partition("=")
    if not sep or not key or not value:
        raise ValidationError(f"tag {tag!r} is not key=value")
    return key.strip(), value.strip()


def overpass_query(tags: Sequence[str], region: Sequence[float]) -> str:
    w, s, e, n = region
    bbox = f"{s},{w},{n},{e}"
    lines = ["[out:json][timeout:60];", "("]
    for tag in tags:
        k, v = _parse_tag(tag)
        lines.append(f'  nwr["{k}"="{v}"]({bbox});')
    lines += [");", "out center;"]
    return "\n".join(lines)


class TagQueryClient:
    url = "https://overpass-api.de/api/interpreter"

    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def fetch(self, tags: Sequence[str], region: Sequence[float]) -> list[PoiRecord]:
        if not tags:
            raise ValidationError("tag_fetch needs at least one key=value tag")
        parsed = [_parse_tag(t) for t in tags]
        region = _region_params(region)
        query = overpass_query(tags, region)
        body = self.cassette.fetch({"query": query}, method="POST", url=self.url, wire_params={}, data=query)
        out = []
        for el in json.loads(body).get("elements", []):
            etags = el.get("tags") or {}
            matched = frozenset(f"{k}={v}" for k, v in parsed if etags.get(k) == v)
            if not matched:
                continue
            if "lat" in el and "lon" in el:
                lat, lon = el["lat"], el["lon"]
            elif "center" in el:
                lat, lon = el["center"]["lat"], el["center"]["lon"]
            else:
                continue
            p = GeoPoint(float(lon), float(lat))
            if not _in_region(p, region):
                continue
            pid = f"{el.get('type', 'node')}/{el['id']}"
            out.append(PoiRecord(Source.tag_query, pid, etags.get("name", ""), p, None, 0, matched))
        return out


def tag_fetch(tags: Sequence[str], region, client: TagQueryClient) -> list[PoiRecord]:
    return client.fetch(tags, region)


_ZIP_IN_TEXT = re.compile(r"\b(\d{5})(?:-\d{4})?\s*$")


def extract_zip(posting: dict) -> str | None:
    z = posting.get("postal_code")
    if z:
        z = str(z).strip()[:5]
        return z if re.fullmatch(r"\d{5}", z) else None
    m = _ZIP_IN_TEXT.search((posting.get("formatted_location") or "").strip())
    return m.group(1) if m else None


class JobSearchClient:
    """Job-board search returning postings with an optional postal address."""

    url = "https://jobs.example.invalid/api/search"

    def __init__(self, cassette: Cassette, query: str = "technology", url: str | None = None):
        self.cassette = cassette
        self.query = query
        if url:
            self.url = url

    def fetch(self, region: Sequence[float]) -> list[JobPosting]:
        region = _region_params(region)
        params = {"query": self.query, "region": region}
        body = self.cassette.fetch(params, url=self.url)
        out = []
        for item in json.loads(body).get("results", []):
            loc = None
            if item.get("latitude") is not None and item.get("longitude") is not None:
                loc = GeoPoint(float(item["longitude"]), float(item["latitude"]))
            out.append(JobPosting(str(item["jobkey"]), item.get("title") or "", extract_zip(item), loc))
        return out


def job_fetch(region, client: JobSearchClient) -> list[JobPosting]:
    return client.fetch(region)


def load_registry(path: str | Path) -> list[PoiRecord]:
    """Records from a pre-exported registry dump (one JSON object per line)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            d = json.loads(line)
            rating, count = normalize_rating(d.get("rating"), d.get("rating_count"))
            try:
                out.append(
                    PoiRecord(
                        Source.registry,
                        str(d["id"]),
                        d.get("name") or "",
                        GeoPoint(float(d["lon"]), float(d["lat"])),
                        rating,
                        count,
                        frozenset(d.get("categories") or ()),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return out


# -- dedupe ------------------------------------------------------------------


def dedupe(records: Iterable[PoiRecord]) -> list[PoiRecord]:
    """One record per (source, place_id).

    Terms are unioned; rating, name and location come from the duplicate with
    the most ratings (first one wins ties). Output is sorted by key.
    """
    best: dict[tuple[str, str], PoiRecord] = {}
    terms: dict[tuple[str, str], set[str]] = {}
    for rec in records:
        key = (rec.source.value, rec.place_id)
        cur = best.get(key)
        if cur is None:
            best[key] = rec
            terms[key] = set(rec.matched_terms)
            continue
        terms[key] |= rec.matched_terms
        dist = haversine_m(cur.location, rec.location)
        if dist > DUPLICATE_DISTANCE_M:
            warnings.warn(
                f"{key[0]}/{key[1]}: duplicate locations {dist:.0f} m apart",
                DataQualityWarning,
                stacklevel=2,
            )
        if rec.rating_count > cur.rating_count:
            best[key] = rec
    out = []
    for key in sorted(best):
        rec = best[key]
        out.append(
            PoiRecord(rec.source, rec.place_id, rec.name, rec.location, rec.rating, rec.rating_count, frozenset(terms[key]))
        )
    return out


# -- JSONL -------------------------------------------------------------------


def write_jsonl(path: str | Path, items: Iterable) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            fh.write(item.to_json())
            fh.write("\n")
            n += 1
    return n


def read_pois(path: str | Path) -> list[PoiRecord]:
    with open(path, encoding="utf-8") as fh:
        return [PoiRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def read_jobs(path: str | Path) -> list[JobPosting]:
    with open(path, encoding="utf-8") as fh:
        return [JobPosting.from_dict(json.loads(line)) for line in fh if line.strip()]
