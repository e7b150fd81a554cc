"""Pipeline configuration: YAML file, flag overrides, environment override."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .poi import DEFAULT_KEYWORDS, DEFAULT_TAGS

CASSETTE_ENV = "INNODEX_CASSETTE_DIR"

SOURCE_NAMES = ("keyword_search", "tag_query", "jobs")

DEFAULT_MAP_VARIABLES = (
    "location_count",
    "total_rating_count",
    "weighted_mean_rating",
    "permit_count",
    "vacancy_rate",
    "pct_white",
)

# innovation metrics first, then corroborating sources, then socio-economic columns
DEFAULT_CORRELATION_COLUMNS = (
    "location_count",
    "weighted_mean_rating",
    "total_rating_count",
    "osm_location_count",
    "job_count",
    "permit_count",
    "permit_value_usd",
    "permit_value_per_business",
    "pop_total",
    "pct_white",
    "pct_black",
    "pct_hispanic",
    "vacancy_rate",
    "median_income_usd",
    "median_home_value_usd",
)


@dataclass
class SourceConfig:
    mode: str = "replay"
    rate_limit_rps: float = 1.0


def _default_sources() -> dict[str, SourceConfig]:
    return {name: SourceConfig() for name in SOURCE_NAMES}


@dataclass
class PipelineConfig:
    zones_path: Path
    census_path: Path
    permits_path: Path
    tracts_path: Path | None = None
    crosswalk_path: Path | None = None
    registry_path: Path | None = None
    cassette_dir: Path = Path("cassettes")
    output_dir: Path = Path("out")
    zone_id_property: str = "ZIP5"
    tract_id_property: str = "GEOID"
    census_columns: dict[str, str] = field(default_factory=dict)
    keywords: list[str] = field(default_factory=lambda: list(DEFAULT_KEYWORDS))
    tags: list[str] = field(default_factory=lambda: list(DEFAULT_TAGS))
    job_query: str = "technology"
    region: list[float] | None = None
    sources: dict[str, SourceConfig] = field(default_factory=_default_sources)
    random_seed: int = 0
    crosswalk_samples: int = 2000
    k_classes: int = 5
    palette: str = "blues"
    circles: bool = False
    map_variables: list[str] = field(default_factory=lambda: list(DEFAULT_MAP_VARIABLES))
    correlation_columns: list[str] = field(default_factory=lambda: list(DEFAULT_CORRELATION_COLUMNS))
    base_dir: Path = Path(".")

    _PATHS = ("zones_path", "census_path", "permits_path", "tracts_path", "crosswalk_path", "registry_path", "cassette_dir", "output_dir")

    def validate(self) -> "PipelineConfig":
        for name in ("zones_path", "census_path", "permits_path"):
            p = getattr(self, name)
            if not Path(p).is_file():
                raise ConfigError(f"{name}: {p} does not exist")
        if self.tracts_path is None and self.crosswalk_path is None:
            raise ConfigError("either tracts_path or crosswalk_path is required")
        for name in ("tracts_path", "crosswalk_path", "registry_path"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{name}: {p} does not exist")
        for name, src in self.sources.items():
            if name not in SOURCE_NAMES:
                raise ConfigError(f"unknown source {name!r}")
            if src.mode not in ("live", "replay"):
                raise ConfigError(f"sources.{name}.mode must be live or replay")
            if not src.rate_limit_rps > 0:
                raise ConfigError(f"sources.{name}.rate_limit_rps must be positive")
        if any(s.mode == "replay" for s in self.sources.values()) and not Path(self.cassette_dir).is_dir():
            raise ConfigError(f"cassette_dir: {self.cassette_dir} does not exist")
        if self.k_classes < 2:
            raise ConfigError("k_classes must be >= 2")
        if self.crosswalk_samples < 1:
            raise ConfigError("crosswalk_samples must be >= 1")
        if not self.keywords:
            raise ConfigError("keywords must not be empty")
        if self.region is not None:
            w, s, e, n = self.region
            if not (w < e and s < n):
                raise ConfigError(f"region {self.region} is degenerate")
        from .metrics import FEATURE_COLUMNS

        for col in [*self.map_variables, *self.correlation_columns]:
            if col not in FEATURE_COLUMNS or col == "zip_id":
                raise ConfigError(f"unknown feature column {col!r}")
        return self

    def relpath(self, p: Path) -> str:
        """Path as recorded in the manifest: relative to the config file when possible."""
        try:
            return Path(p).resolve().relative_to(self.base_dir.resolve()).as_posix()
        except ValueError:
            return Path(p).as_posix()

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("base_dir")
        for name in self._PATHS:
            if d[name] is not None:
                d[name] = self.relpath(d[name])
        return d


def _coerce(raw: dict, base: Path) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)} - {"base_dir"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for req in ("zones_path", "census_path", "permits_path"):
        if raw.get(req) is None:
            raise ConfigError(f"missing required key {req}")
    data = dict(raw)
    for name in PipelineConfig._PATHS:
        if data.get(name) is not None:
            p = Path(str(data[name]))
            data[name] = p if p.is_absolute() else base / p
    sources = _default_sources()
    for name, entry in (data.get("sources") or {}).items():
        if name not in SOURCE_NAMES:
            raise ConfigError(f"unknown source {name!r}")
        try:
            sources[name] = SourceConfig(**(entry or {}))
        except TypeError as exc:
            raise ConfigError(f"sources.{name}: {exc}") from None
    data["sources"] = sources
    if data.get("region") is not None:
        data["region"] = [float(v) for v in data["region"]]
        if len(data["region"]) != 4:
            raise ConfigError("region must be [west, south, east, north]")
    for key in ("keywords", "tags", "map_variables", "correlation_columns"):
        if key in data and data[key] is not None:
            data[key] = [str(v) for v in data[key]]
        elif key in data:
            del data[key]
    try:
        return PipelineConfig(**data, base_dir=base)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Read YAML, apply flag overrides, then ``INNODEX_CASSETTE_DIR``.

    Relative paths resolve against the config file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            # sources.<name>.mode style
            head, name, leaf = key.split(".", 2)
            raw.setdefault(head, {}).setdefault(name, {})[leaf] = value
        else:
            raw[key] = value
    base = path.resolve().parent
    env = os.environ.get(CASSETTE_ENV)
    if env:
        raw["cassette_dir"] = str(Path(env).resolve())
    return _coerce(raw, base)
