"""``innodex`` command line."""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import yaml

from .config import load_config
from .errors import DataError, InnodexError
from .pipeline import STAGE_FUNCS, run_pipeline, stage_fetch

log = logging.getLogger("innodex")


def _abs(p):
    return None if p is None else str(Path(p).resolve())


def _load(ctx: click.Context, **overrides):
    opts = ctx.obj
    merged = {
        "output_dir": _abs(opts.get("output_dir")),
        "cassette_dir": _abs(opts.get("cassette_dir")),
        "random_seed": opts.get("seed"),
    }
    if opts.get("mode"):
        for name in ("keyword_search", "tag_query", "jobs"):
            merged[f"sources.{name}.mode"] = opts["mode"]
    merged.update(overrides)
    return load_config(opts["config"], merged)


def _guard(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InnodexError as exc:
        click.echo(f"innodex {getattr(exc, 'stage', stage)}: {exc}", err=True)
        sys.exit(exc.exit_code)
    except (OSError, ValueError, KeyError) as exc:
        click.echo(f"innodex {stage}: {type(exc).__name__}: {exc}", err=True)
        sys.exit(DataError.exit_code)


@click.group()
@click.option("-c", "--config", "config", default="innodex.yaml", show_default=True, help="YAML config file.")
@click.option("--output-dir", type=click.Path(file_okay=False), help="Override output_dir.")
@click.option("--cassette-dir", type=click.Path(file_okay=False), help="Override cassette_dir.")
@click.option("--seed", type=int, help="Override random_seed.")
@click.option("--mode", type=click.Choice(["live", "replay"]), help="Force every source into this mode.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, config, output_dir, cassette_dir, seed, mode, verbose):
    """Zip-level innovation index pipeline."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config, "output_dir": output_dir, "cassette_dir": cassette_dir, "seed": seed, "mode": mode}


@main.command("validate-config")
@click.pass_context
def validate_config(ctx):
    """Check the config and print it with defaults filled in."""
    cfg = _guard("validate-config", lambda: _load(ctx).validate())
    click.echo(yaml.safe_dump(cfg.to_dict(), sort_keys=False), nl=False)


@main.command()
@click.option("--source", "sources", multiple=True, help="Only fetch these sources (repeatable).")
@click.pass_context
def fetch(ctx, sources):
    """Fetch or replay sources and write normalized JSONL."""
    cfg = _guard("fetch", lambda: _load(ctx).validate())
    counts = _guard("fetch", stage_fetch, cfg, list(sources) or None)
    _report("fetch", counts)


def _stage_command(name: str, doc: str):
    @click.pass_context
    def cmd(ctx):
        cfg = _guard(name, lambda: _load(ctx).validate())
        _report(name, _guard(name, STAGE_FUNCS[name], cfg))

    cmd.__doc__ = doc
    return main.command(name)(cmd)


_stage_command("aggregate", "Spatial join, crosswalk and feature matrix.")
_stage_command("correlate", "Correlation matrix and log-log diagnostic.")
_stage_command("render", "Choropleths, heatmap and summary report.")


@main.command()
@click.pass_context
def run(ctx):
    """fetch, aggregate, correlate and render in one go."""
    cfg = _guard("run", lambda: _load(ctx).validate())
    manifest = _guard("run", run_pipeline, cfg)
    for stage, entry in manifest["stages"].items():
        _report(stage, entry["counts"])


def _report(stage: str, counts: dict) -> None:
    parts = ", ".join(f"{k}={v}" for k, v in counts.items())
    click.echo(f"{stage}: {parts}")


if __name__ == "__main__":
    main()
