import csv
import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from innodex.errors import ValidationError
from innodex.geo import GeoPoint, ZipZone, ZoneSet
from innodex.tabular import (
    UNASSIGNED,
    CrosswalkEntry,
    Occupancy,
    PermitRecord,
    TractRow,
    build_crosswalk,
    filter_permits,
    load_census,
    load_permits,
    permit_zip_counts,
    read_crosswalk,
    sample_in_polygon,
    tract_to_zip,
    write_crosswalk,
)


def square(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]


def tract(tid, pop=1000, white=600, black=0, hisp=0, vacant=0, units=0, income=None, home=None):
    return TractRow(tid, pop, white, black, hisp, vacant, units, income, home)


@pytest.fixture
def halves():
    return ZoneSet(
        [
            ZipZone.from_rings("02110", [square(-71.10, 42.30, -71.05, 42.40)]),
            ZipZone.from_rings("02111", [square(-71.05, 42.30, -71.00, 42.40)]),
        ]
    )


# -- crosswalk ---------------------------------------------------------------


def test_tract_inside_one_zip_gets_weight_one(halves):
    t = {"T1": ZipZone.from_rings("T1", [square(-71.09, 42.31, -71.06, 42.33)])}
    xw = build_crosswalk(t, halves, 500, seed=1)
    assert xw.entries == [CrosswalkEntry("T1", "02110", 1.0)]
    assert xw.partial == {} and xw.unassigned == []


def test_bisected_tract_splits_evenly(halves):
    t = {"T1": ZipZone.from_rings("T1", [square(-71.07, 42.31, -71.03, 42.35)])}
    xw = build_crosswalk(t, halves, 2000, seed=5)
    w = {e.zip_id: e.weight for e in xw.entries}
    assert w["02110"] == pytest.approx(0.5, abs=0.03)
    assert sum(w.values()) == pytest.approx(1.0, abs=1e-12)


def test_outside_tract_is_unassigned_and_straddler_is_partial(halves):
    t = {
        "OUT": ZipZone.from_rings("OUT", [square(-70.9, 42.31, -70.8, 42.35)]),
        "EDGE": ZipZone.from_rings("EDGE", [square(-71.02, 42.31, -70.98, 42.35)]),
    }
    xw = build_crosswalk(t, halves, 2000, seed=5)
    assert xw.unassigned == ["OUT"]
    assert xw.partial["EDGE"] == pytest.approx(0.5, abs=0.03)
    w = [e.weight for e in xw.entries if e.tract_id == "EDGE"]
    assert sum(w) == pytest.approx(1 - xw.partial["EDGE"], abs=1e-12)


def test_crosswalk_is_order_independent_and_seeded(halves):
    a = ZipZone.from_rings("A", [square(-71.07, 42.31, -71.03, 42.35)])
    b = ZipZone.from_rings("B", [square(-71.06, 42.32, -71.02, 42.39)])
    x1 = build_crosswalk({"A": a, "B": b}, halves, 300, seed=9)
    x2 = build_crosswalk({"B": b, "A": a}, halves, 300, seed=9)
    x3 = build_crosswalk({"A": a, "B": b}, halves, 300, seed=10)
    assert x1.entries == x2.entries
    assert x1.entries != x3.entries


def test_samples_lie_inside_tract_with_hole():
    t = ZipZone.from_rings("T", [square(0, 0, 1, 1), square(0.2, 0.2, 0.8, 0.8)])
    pts = sample_in_polygon(t, 400, np.random.default_rng(0))
    assert len(pts) == 400
    assert not any(0.2 < x < 0.8 and 0.2 < y < 0.8 for x, y in pts)


def test_crosswalk_roundtrip(tmp_path, halves):
    t = {"T1": ZipZone.from_rings("T1", [square(-71.07, 42.31, -71.03, 42.35)])}
    xw = build_crosswalk(t, halves, 200, seed=3)
    write_crosswalk(tmp_path / "x.csv", xw)
    back = read_crosswalk(tmp_path / "x.csv")
    assert back.entries == xw.entries
    assert back.partial == {}


def test_crosswalk_reader_rejects_bad_weights(tmp_path):
    (tmp_path / "x.csv").write_text("tract_id,zip_id,weight\nT,02110,1.5\n")
    with pytest.raises(ValidationError):
        read_crosswalk(tmp_path / "x.csv")


# -- reallocation ----------------------------------------------------------


def test_single_tract_single_zip_ratio():
    out = tract_to_zip([tract("T1")], [CrosswalkEntry("T1", "02110", 1.0)])
    assert out["02110"].pop_total == 1000
    assert out["02110"].pct_white == 0.6


def test_split_tract_halves_counts():
    xw = [CrosswalkEntry("T1", "02110", 0.5), CrosswalkEntry("T1", "02111", 0.5)]
    out = tract_to_zip([tract("T1")], xw)
    assert out["02110"].pop_total == 500 and out["02111"].pop_total == 500


def test_medians_are_population_weighted():
    xw = [CrosswalkEntry("T1", "02110", 1.0), CrosswalkEntry("T2", "02110", 1.0)]
    rows = [tract("T1", pop=1000, income=50000), tract("T2", pop=3000, white=0, income=70000)]
    assert tract_to_zip(rows, xw)["02110"].median_income_usd == 65000


def test_home_value_uses_housing_units_and_skips_nulls():
    xw = [CrosswalkEntry(t, "02110", 1.0) for t in ("T1", "T2", "T3")]
    rows = [
        tract("T1", units=100, home=300000),
        tract("T2", units=300, home=500000),
        tract("T3", units=900, home=None),
    ]
    out = tract_to_zip(rows, xw)["02110"]
    assert out.median_home_value_usd == 450000
    assert out.median_income_usd is None


def test_zero_population_gives_null_ratios():
    out = tract_to_zip([tract("T1", pop=0, white=0)], [CrosswalkEntry("T1", "02110", 1.0)])
    assert out["02110"].pct_white is None and out["02110"].vacancy_rate is None


def test_counts_round_half_to_even():
    xw = [CrosswalkEntry("T1", "02110", 0.5), CrosswalkEntry("T1", "02111", 0.5)]
    out = tract_to_zip([tract("T1", pop=5, white=1)], xw)
    # 2.5 -> 2 on both sides, 0.5 -> 0
    assert out["02110"].pop_total == 2 and out["02110"].pop_white == 0


def test_unknown_tract_in_crosswalk_is_rejected():
    with pytest.raises(ValidationError, match="T9"):
        tract_to_zip([tract("T1")], [CrosswalkEntry("T9", "02110", 1.0)])


@given(
    st.lists(st.integers(0, 20000), min_size=1, max_size=12),
    st.integers(0, 2**32 - 1),
)
def test_population_is_conserved(pops, seed):
    rng = np.random.default_rng(seed)
    tracts, entries = [], []
    for i, p in enumerate(pops):
        tid = f"T{i}"
        tracts.append(tract(tid, pop=p, white=0))
        k = int(rng.integers(1, 4))
        w = rng.dirichlet(np.ones(k))
        for j, wj in enumerate(w):
            entries.append(CrosswalkEntry(tid, f"0211{j}", float(wj)))
    out = tract_to_zip(tracts, entries)
    # each zip rounds once, so the total drifts by at most half a person per zip
    assert abs(sum(r.pop_total for r in out.values()) - sum(pops)) <= 0.5 * len(out) + 1e-6


def test_tract_validation():
    with pytest.raises(ValidationError):
        tract("T", pop=10, white=11)
    with pytest.raises(ValidationError):
        tract("T", vacant=5, units=4)
    with pytest.raises(ValidationError):
        tract("T", income=-5.0)


def test_load_census_maps_columns_and_sentinels(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text(
        "GEOID,P,W,B,H,V,U,INC,HOME\n"
        "T1,100,50,10,5,3,40,-666666666,250000\n"
        "T2,,0,0,0,0,0,,\n"
    )
    cols = dict(
        tract_id="GEOID", pop_total="P", pop_white="W", pop_black="B", pop_hispanic="H",
        vacant_units="V", housing_units="U", median_income_usd="INC", median_home_value_usd="HOME",
    )
    t1, t2 = load_census(path, cols)
    assert t1.median_income_usd is None and t1.median_home_value_usd == 250000
    assert t2.pop_total == 0
    with pytest.raises(ValidationError, match="missing census columns"):
        load_census(path)


def test_fixture_census_loads(fixture_dir):
    import yaml

    cfg = yaml.safe_load((fixture_dir / "innodex.yaml").read_text())
    rows = load_census(fixture_dir / "census.csv", cfg["census_columns"])
    assert len(rows) == 62
    assert sum(r.median_income_usd is None for r in rows) == 3


# -- permits ---------------------------------------------------------------


def permit(pid, x, y, occ, value):
    return PermitRecord(pid, GeoPoint(x, y), occ, value, dt.date(2015, 1, 1))


def test_permit_counts_with_null_value(halves):
    ps = [
        permit("a", -71.08, 42.35, Occupancy.commercial, 10000.0),
        permit("b", -71.08, 42.36, Occupancy.mixed, 20000.0),
        permit("c", -71.07, 42.36, Occupancy.commercial, None),
        permit("d", -71.07, 42.36, Occupancy.residential, 99.0),
        permit("e", -70.5, 42.36, Occupancy.commercial, 5.0),
    ]
    counts = permit_zip_counts(filter_permits(ps), halves)
    assert counts["02110"].permit_count == 3
    assert counts["02110"].permit_value_usd == 30000
    assert counts["02110"].null_values == 1
    assert counts["02111"].permit_count == 0
    assert counts[UNASSIGNED].permit_count == 1


def test_load_permits(tmp_path, caplog):
    path = tmp_path / "p.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["permit_id", "lon", "lat", "occupancy", "declared_value", "issued_date"])
        w.writerow(["1", "-71.0", "42.3", "Commercial", "100.5", "2014-03-01"])
        w.writerow(["2", "", "42.3", "Commercial", "1", "2014-03-01"])
        w.writerow(["3", "-71.0", "42.3", "Mixed Use", "", "2014-03-01T00:00:00"])
        w.writerow(["4", "-71.0", "42.3", "Residential", "7", "2014-03-01"])
    ps = load_permits(path)
    assert [p.occupancy_class for p in ps] == [Occupancy.commercial, Occupancy.mixed, Occupancy.residential]
    assert ps[1].declared_value_usd is None
    assert "skipped 1" in caplog.text
    assert [p.permit_id for p in filter_permits(ps)] == ["1", "3"]


def test_fixture_permit_totals(fixture_dir, fixture_zones):
    permits = load_permits(fixture_dir / "permits.csv")
    kept = filter_permits(permits)
    counts = permit_zip_counts(kept, fixture_zones)
    assert len(permits) == 497 and len(kept) == 307
    assert sum(c.permit_count for c in counts.values()) == 307
    assert counts[UNASSIGNED].permit_count == 9
    assert math.isclose(
        sum(c.permit_value_usd for c in counts.values()),
        math.fsum(p.declared_value_usd for p in kept if p.declared_value_usd is not None),
    )
