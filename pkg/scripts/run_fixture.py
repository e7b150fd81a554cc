"""Run the full pipeline on the synthetic fixture and compare against its goldens.

    python3 scripts/run_fixture.py            # run, check counts and artifact hashes
    python3 scripts/run_fixture.py --freeze   # rewrite golden_artifacts.json

Freezing records the sha256 of every artifact except manifest.json, which
carries a timestamp. Only refreeze after an intentional output change.
"""
import argparse
import json
import sys
import time
import warnings
from pathlib import Path

from innodex.config import load_config
from innodex.pipeline import MANIFEST, run_pipeline, sha256_file
from innodex.poi import DataQualityWarning

FIXTURE = Path(__file__).resolve().parents[1] / "fixtures" / "synthetic_boston"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--freeze", action="store_true")
    ap.add_argument("--fixture", type=Path, default=FIXTURE)
    args = ap.parse_args(argv)

    cfg = load_config(args.fixture / "innodex.yaml")
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DataQualityWarning)
        manifest = run_pipeline(cfg)
    print(f"run finished in {time.perf_counter() - t0:.2f} s")
    for w in caught:
        print(f"  warning: {w.message}")

    out = Path(cfg.output_dir)
    hashes = {p.name: sha256_file(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != MANIFEST}
    golden_path = args.fixture / "golden_artifacts.json"
    if args.freeze:
        golden_path.write_text(json.dumps(hashes, indent=1) + "\n", encoding="utf-8")
        print(f"froze {len(hashes)} artifact hashes to {golden_path}")

    failures = 0
    golden = json.loads((args.fixture / "golden_counts.json").read_text())
    for stage in ("fetch", "aggregate"):
        for key, want in golden[stage].items():
            got = manifest["stages"][stage]["counts"].get(key)
            if got != want:
                failures += 1
                print(f"  count mismatch {stage}.{key}: {got} != {want}")
    frozen = json.loads(golden_path.read_text())
    for name, digest in frozen.items():
        if hashes.get(name) != digest:
            failures += 1
            print(f"  artifact changed: {name}")
    loglog = json.loads((out / "loglog.json").read_text())
    print(f"log-log slope {loglog['slope']:.3f} (r2 {loglog['r2']:.3f}, n {loglog['n']}), superlinear={loglog['superlinear']}")
    print("OK" if failures == 0 else f"{failures} mismatches")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
