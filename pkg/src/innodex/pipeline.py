"""Stage orchestration and the run manifest.

Stages persist their outputs as files in ``output_dir``:

    fetch      pois_<source>.jsonl, jobs.jsonl
    aggregate  crosswalk.csv, features.csv, features.jsonl
    correlate  correlation.csv, correlation.json, loglog.json
    render     <variable>.choropleth.geojson, <variable>.map.svg,
               correlation.svg, summary.txt

``manifest.json`` records, per stage, the sha256 of every input and output
plus row counts. A stage refuses to read an upstream artifact whose hash no
longer matches what the producing stage recorded.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable

from . import __version__
from .config import PipelineConfig
from .errors import InnodexError, StageDependencyError
from .geo import ZoneSet, load_zones
from .metrics import (
    assemble_feature_matrix,
    job_zip_counts,
    read_features_csv,
    sparse_location_counts,
    write_features_csv,
    write_features_jsonl,
    zip_innovation_metrics,
)
from .poi import (
    Cassette,
    JobSearchClient,
    KeywordSearchClient,
    TagQueryClient,
    dedupe,
    load_registry,
    read_jobs,
    read_pois,
    write_jsonl,
)
from .render import render_choropleth, render_corr_heatmap
from .stats import (
    column_summary,
    correlation_matrix,
    loglog_slope,
    read_matrix_json,
    write_matrix_csv,
    write_matrix_json,
)
from .tabular import (
    UNASSIGNED,
    build_crosswalk,
    filter_permits,
    load_census,
    load_permits,
    load_tract_geometries,
    permit_zip_counts,
    read_crosswalk,
    tract_to_zip,
    write_crosswalk,
)

log = logging.getLogger(__name__)

STAGES = ("fetch", "aggregate", "correlate", "render")
MANIFEST = "manifest.json"
FETCH_SOURCES = ("keyword_search", "tag_query", "registry", "jobs")
INNOVATION_METRICS = ("location_count", "total_rating_count", "weighted_mean_rating")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_tree(root: str | Path) -> str:
    """Hash of every file under ``root`` (relative path + content), order-independent."""
    root = Path(root)
    h = hashlib.sha256()
    if root.is_dir():
        for p in sorted(q for q in root.rglob("*") if q.is_file()):
            h.update(p.relative_to(root).as_posix().encode("utf-8"))
            h.update(b"\0")
            h.update(sha256_file(p).encode("ascii"))
    return h.hexdigest()


# -- manifest -------------------------------------------------------------------


def load_manifest(out_dir: Path) -> dict:
    path = out_dir / MANIFEST
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return {}


def _save_manifest(out_dir: Path, cfg: PipelineConfig, manifest: dict) -> None:
    manifest["tool"] = "innodex"
    manifest["version"] = __version__
    manifest["seed"] = cfg.random_seed
    manifest["config"] = cfg.to_dict()
    manifest["created_at"] = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
    ordered = {k: manifest[k] for k in ("tool", "version", "created_at", "seed", "config")}
    ordered["stages"] = {s: manifest["stages"][s] for s in STAGES if s in manifest.get("stages", {})}
    text = json.dumps(ordered, indent=2, sort_keys=False) + "\n"
    (out_dir / MANIFEST).write_text(text, encoding="utf-8", newline="\n")


def _require(out_dir: Path, manifest: dict, producer: str, name: str) -> Path:
    path = out_dir / name
    stage = manifest.get("stages", {}).get(producer)
    if stage is None or name not in stage["outputs"] or not path.exists():
        raise StageDependencyError(f"{name} is missing; run `innodex {producer}` first")
    if sha256_file(path) != stage["outputs"][name]:
        raise StageDependencyError(
            f"{name} does not match the hash recorded by `{producer}` in {MANIFEST}; "
            f"it was modified after that stage ran. Re-run `innodex {producer}`."
        )
    return path


class _Stage:
    """Writes into a scratch directory and publishes only on success."""

    def __init__(self, cfg: PipelineConfig, name: str):
        self.cfg = cfg
        self.name = name
        self.out = Path(cfg.output_dir)
        self.manifest = load_manifest(self.out)
        self.inputs: dict[str, str] = {}
        self.counts: dict[str, int | float] = {}

    def __enter__(self):
        self.out.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".staging-{self.name}-", dir=self.out))
        return self

    def input_file(self, label: str, path: Path) -> Path:
        self.inputs[label] = sha256_file(path)
        return path

    def upstream(self, producer: str, name: str) -> Path:
        path = _require(self.out, self.manifest, producer, name)
        self.inputs[name] = self.manifest["stages"][producer]["outputs"][name]
        return path

    def path(self, name: str) -> Path:
        return self.tmp / name

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is not None:
                return False
            outputs = {}
            for p in sorted(self.tmp.iterdir()):
                outputs[p.name] = sha256_file(p)
            for p in sorted(self.tmp.iterdir()):
                p.replace(self.out / p.name)
            stages = self.manifest.setdefault("stages", {})
            # everything downstream of this stage is now stale
            for later in STAGES[STAGES.index(self.name) :]:
                stages.pop(later, None)
            stages[self.name] = {
                "inputs": dict(sorted(self.inputs.items())),
                "outputs": outputs,
                "counts": self.counts,
            }
            _save_manifest(self.out, self.cfg, self.manifest)
        finally:
            shutil.rmtree(self.tmp, ignore_errors=True)
        return False


# -- stages ---------------------------------------------------------------------


def _zones(cfg: PipelineConfig) -> ZoneSet:
    return load_zones(cfg.zones_path, cfg.zone_id_property)


def _region(cfg: PipelineConfig, zs: ZoneSet) -> list[float]:
    return list(cfg.region) if cfg.region is not None else list(zs.bbox)


def enabled_sources(cfg: PipelineConfig) -> list[str]:
    out = ["keyword_search"]
    if cfg.tags:
        out.append("tag_query")
    if cfg.registry_path is not None:
        out.append("registry")
    out.append("jobs")
    return out


def _artifact(source: str) -> str:
    return "jobs.jsonl" if source == "jobs" else f"pois_{source}.jsonl"


def stage_fetch(cfg: PipelineConfig, sources: list[str] | None = None) -> dict:
    """Pull (or replay) every enabled source, dedupe places, write JSONL."""
    wanted = enabled_sources(cfg)
    if sources:
        bad = [s for s in sources if s not in wanted]
        if bad:
            raise StageDependencyError(f"source(s) {bad} are not enabled in this config")
        wanted = [s for s in wanted if s in sources]
    with _Stage(cfg, "fetch") as st:
        prior = st.manifest.get("stages", {}).get("fetch")
        if sources and prior:
            # partial refetch keeps the other sources' artifacts
            st.inputs.update(prior["inputs"])
            st.counts.update(prior["counts"])
            for name in prior["outputs"]:
                src = st.out / name
                if src.exists() and not any(name == _artifact(s) for s in wanted):
                    shutil.copyfile(src, st.path(name))
        zs = _zones(cfg)
        st.input_file("zones", cfg.zones_path)
        region = _region(cfg, zs)
        st.inputs["cassettes"] = sha256_tree(cfg.cassette_dir)
        if cfg.registry_path is not None and "registry" in wanted:
            st.input_file("registry", cfg.registry_path)

        def run(source: str) -> tuple[str, int, list]:
            if source == "registry":
                recs = load_registry(cfg.registry_path)
                return source, len(recs), dedupe(recs)
            sc = cfg.sources[source]
            cas = Cassette(cfg.cassette_dir, source, sc.mode, rate_limit_rps=sc.rate_limit_rps)
            if source == "keyword_search":
                client = KeywordSearchClient(cas)
                recs = [r for term in cfg.keywords for r in client.fetch(term, region)]
                return source, len(recs), dedupe(recs)
            if source == "tag_query":
                recs = TagQueryClient(cas).fetch(cfg.tags, region)
                return source, len(recs), dedupe(recs)
            jobs = JobSearchClient(cas, cfg.job_query).fetch(region)
            return source, len(jobs), jobs

        with ThreadPoolExecutor(max_workers=len(wanted)) as pool:
            results = list(pool.map(run, wanted))
        for source, raw_n, items in results:
            n = write_jsonl(st.path(_artifact(source)), items)
            st.counts[f"{source}_raw"] = raw_n
            st.counts[f"{source}_records"] = n
            if source == "jobs":
                st.counts["jobs_with_zip"] = sum(1 for j in items if j.zip_id is not None)
        st.counts = dict(sorted(st.counts.items()))
        st.inputs = dict(sorted(st.inputs.items()))
    return st.counts


def stage_aggregate(cfg: PipelineConfig) -> dict:
    """Spatial join, crosswalk, permit tallies and the feature matrix."""
    with _Stage(cfg, "aggregate") as st:
        zs = _zones(cfg)
        st.input_file("zones", cfg.zones_path)
        pois = read_pois(st.upstream("fetch", _artifact("keyword_search")))
        osm = []
        if "tag_query" in enabled_sources(cfg):
            osm = read_pois(st.upstream("fetch", _artifact("tag_query")))
        jobs = read_jobs(st.upstream("fetch", _artifact("jobs")))

        if cfg.crosswalk_path is not None:
            xw = read_crosswalk(st.input_file("crosswalk", cfg.crosswalk_path))
        else:
            tracts = load_tract_geometries(st.input_file("tracts", cfg.tracts_path), cfg.tract_id_property)
            xw = build_crosswalk(tracts, zs, cfg.crosswalk_samples, cfg.random_seed)
            st.counts["tracts_geometries"] = len(tracts)
        write_crosswalk(st.path("crosswalk.csv"), xw)
        census = load_census(st.input_file("census", cfg.census_path), cfg.census_columns)
        socio = tract_to_zip(census, xw)

        permits_all = load_permits(st.input_file("permits", cfg.permits_path))
        permits = filter_permits(permits_all)
        pc = permit_zip_counts(permits, zs)

        metrics = zip_innovation_metrics(pois, zs)
        osm_metrics = zip_innovation_metrics(osm, zs)
        jc = job_zip_counts(jobs, zs)

        rows = assemble_feature_matrix(
            {k: v for k, v in metrics.items() if k != UNASSIGNED},
            {k: v for k, v in sparse_location_counts(osm_metrics).items() if k != UNASSIGNED},
            socio,
            {k: v for k, v in pc.items() if k != UNASSIGNED},
            {k: v for k, v in jc.items() if k != UNASSIGNED},
            zs,
        )
        write_features_csv(st.path("features.csv"), rows)
        write_features_jsonl(st.path("features.jsonl"), rows)

        st.counts.update(
            zones=len(zs),
            tracts_census=len(census),
            crosswalk_entries=len(xw.entries),
            tracts_unassigned=len(xw.unassigned),
            tracts_partial=len(xw.partial),
            pop_total_tracts=sum(t.pop_total for t in census),
            pop_total_zips=sum(r.pop_total for r in socio.values()),
            permits_loaded=len(permits_all),
            permits_filtered=len(permits),
            permits_unassigned=pc[UNASSIGNED].permit_count,
            permits_null_value=sum(c.null_values for c in pc.values()),
            pois=len(pois),
            pois_assigned=sum(m.location_count for k, m in metrics.items() if k != UNASSIGNED),
            pois_unassigned=metrics[UNASSIGNED].location_count,
            osm_pois=len(osm),
            osm_unassigned=osm_metrics[UNASSIGNED].location_count,
            jobs=len(jobs),
            jobs_with_zip=sum(1 for j in jobs if j.zip_id is not None),
            jobs_outside_zones=jc.get(UNASSIGNED, 0),
            feature_rows=len(rows),
        )
        st.counts = dict(sorted(st.counts.items()))
    return st.counts


def stage_correlate(cfg: PipelineConfig) -> dict:
    with _Stage(cfg, "correlate") as st:
        rows = read_features_csv(st.upstream("aggregate", "features.csv"))
        cm = correlation_matrix(rows, cfg.correlation_columns)
        write_matrix_csv(st.path("correlation.csv"), cm)
        write_matrix_json(st.path("correlation.json"), cm, column_summary(rows, cfg.correlation_columns))
        fit = loglog_slope([r.location_count for r in rows], [r.total_rating_count for r in rows])
        doc = {
            "x": "location_count",
            "y": "total_rating_count",
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r2": fit.r2,
            "n": fit.n,
            "superlinear": fit.superlinear,
            "reason": fit.reason,
        }
        st.path("loglog.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8", newline="\n")
        st.counts.update(
            columns=len(cm.columns),
            null_cells=sum(1 for row in cm.r for v in row if v is None),
            loglog_pairs=fit.n,
        )
    return st.counts


def _top(rows, metric: str, n: int = 5) -> list[tuple[str, float]]:
    vals = [(r.zip_id, getattr(r, metric)) for r in rows if getattr(r, metric) is not None]
    vals.sort(key=lambda t: (-t[1], t[0]))
    return vals[:n]


def summary_report(rows, fit: dict, fetch_counts: dict, agg_counts: dict) -> str:
    lines = ["Neighborhood innovation summary", ""]
    for metric in INNOVATION_METRICS:
        lines.append(f"Top zips by {metric}:")
        for rank, (z, v) in enumerate(_top(rows, metric), 1):
            shown = f"{v:.3f}" if isinstance(v, float) else str(v)
            lines.append(f"  {rank}. {z}  {shown}")
        lines.append("")
    if fit.get("slope") is not None:
        lines.append(
            f"log-log slope of {fit['y']} on {fit['x']}: {fit['slope']:.3f} "
            f"(r2 {fit['r2']:.3f}, n {fit['n']}) -> {'super-linear' if fit['slope'] > 1 else 'not super-linear'}"
        )
    else:
        lines.append(f"log-log slope not estimated: {fit.get('reason')}")
    lines.append("")
    lines.append("Unassigned records:")
    for key in ("pois_unassigned", "osm_unassigned", "permits_unassigned", "jobs_outside_zones", "tracts_unassigned"):
        lines.append(f"  {key}: {agg_counts.get(key, 0)}")
    lines.append(f"  jobs_without_zip: {agg_counts.get('jobs', 0) - agg_counts.get('jobs_with_zip', 0)}")
    return "\n".join(lines) + "\n"


def stage_render(cfg: PipelineConfig) -> dict:
    with _Stage(cfg, "render") as st:
        zs = _zones(cfg)
        st.input_file("zones", cfg.zones_path)
        rows = read_features_csv(st.upstream("aggregate", "features.csv"))
        cm = read_matrix_json(st.upstream("correlate", "correlation.json"))
        fit = json.loads(st.upstream("correlate", "loglog.json").read_text(encoding="utf-8"))
        for var in cfg.map_variables:
            values = {r.zip_id: getattr(r, var) for r in rows}
            gj, svg = render_choropleth(zs, var, values, cfg.k_classes, cfg.palette, cfg.circles)
            st.path(f"{var}.choropleth.geojson").write_text(gj, encoding="utf-8", newline="\n")
            st.path(f"{var}.map.svg").write_text(svg, encoding="utf-8", newline="\n")
        st.path("correlation.svg").write_text(render_corr_heatmap(cm), encoding="utf-8", newline="\n")
        stages = st.manifest.get("stages", {})
        report = summary_report(rows, fit, stages["fetch"]["counts"], stages["aggregate"]["counts"])
        st.path("summary.txt").write_text(report, encoding="utf-8", newline="\n")
        st.counts.update(maps=len(cfg.map_variables), zones=len(zs))
    return st.counts


STAGE_FUNCS: dict[str, Callable[[PipelineConfig], dict]] = {
    "fetch": stage_fetch,
    "aggregate": stage_aggregate,
    "correlate": stage_correlate,
    "render": stage_render,
}


def run_pipeline(cfg: PipelineConfig) -> dict:
    """All stages in order; returns the final manifest."""
    cfg.validate()
    for name in STAGES:
        try:
            STAGE_FUNCS[name](cfg)
        except InnodexError as exc:
            exc.stage = name
            raise
    return load_manifest(Path(cfg.output_dir))
