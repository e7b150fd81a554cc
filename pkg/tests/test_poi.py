import json
import warnings

import pytest
from hypothesis import given, strategies as st

from conftest import SMALL_CASSETTES, SMALL_REGION
from innodex.errors import ConfigError, SourceError, ValidationError
from innodex.geo import GeoPoint
from innodex.poi import (
    DEFAULT_KEYWORDS,
    Cassette,
    DataQualityWarning,
    JobSearchClient,
    KeywordSearchClient,
    PoiRecord,
    Source,
    TagQueryClient,
    TokenBucket,
    dedupe,
    extract_zip,
    job_fetch,
    keyword_fetch,
    load_registry,
    normalize_rating,
    read_pois,
    request_key,
    tag_fetch,
    write_jsonl,
)


def replay(source):
    return Cassette(SMALL_CASSETTES, source, "replay")


# -- keyword search ------------------------------------------------------------


def test_default_keywords_are_the_twelve_terms():
    assert len(DEFAULT_KEYWORDS) == 12
    assert DEFAULT_KEYWORDS[0] == "innovation hubs"
    assert "co-working space" in DEFAULT_KEYWORDS


def test_incubator_two_pages_filtered_to_region():
    recs = keyword_fetch("incubator", SMALL_REGION, KeywordSearchClient(replay("keyword_search")))
    assert [r.place_id for r in recs] == ["F001", "F002", "F003", "F004", "F005", "F006", "F007"]
    assert all(r.matched_terms == {"incubator"} for r in recs)
    f003 = recs[2]
    assert f003.rating is None and f003.rating_count == 0
    assert recs[0].rating == 4.6 and recs[0].rating_count == 120


def test_zero_results_is_empty_not_an_error():
    recs = KeywordSearchClient(replay("keyword_search")).fetch("regional innovation", SMALL_REGION)
    assert recs == []


def test_error_status_raises_source_error():
    with pytest.raises(SourceError):
        KeywordSearchClient(replay("keyword_search")).fetch("overloaded", SMALL_REGION)


def test_missing_cassette_is_a_config_error_naming_the_request():
    with pytest.raises(ConfigError, match="never recorded"):
        KeywordSearchClient(replay("keyword_search")).fetch("never recorded", SMALL_REGION)


def test_replay_is_byte_identical(tmp_path):
    client = KeywordSearchClient(replay("keyword_search"))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        recs = [r for t in ("incubator", "startups") for r in client.fetch(t, SMALL_REGION)]
        write_jsonl(path, dedupe(recs))
    assert a.read_bytes() == b.read_bytes()
    merged = read_pois(a)
    f001 = next(r for r in merged if r.place_id == "F001")
    assert f001.matched_terms == {"incubator", "startups"}
    assert len(merged) == 8


def test_cassette_path_is_hash_of_canonical_request():
    params = {"query": "incubator", "region": SMALL_REGION, "page_token": None}
    key = request_key("keyword_search", params)
    assert (SMALL_CASSETTES / "keyword_search" / f"{key}.json").exists()
    # key order in params does not matter
    assert request_key("keyword_search", dict(reversed(list(params.items())))) == key
    assert request_key("tag_query", params) != key


# -- tag query -----------------------------------------------------------------


def test_tag_query_keeps_only_matching_elements():
    recs = tag_fetch(["office=coworking"], SMALL_REGION, TagQueryClient(replay("tag_query")))
    assert sorted(r.place_id for r in recs) == ["node/11", "node/12", "way/13"]
    assert all(r.rating is None and r.rating_count == 0 for r in recs)
    assert all(r.source is Source.tag_query for r in recs)
    way = next(r for r in recs if r.place_id == "way/13")
    assert way.location == GeoPoint(-71.070, 42.339)


def test_tag_query_empty_and_invalid():
    assert TagQueryClient(replay("tag_query")).fetch(["company=unicorn"], SMALL_REGION) == []
    with pytest.raises(ValidationError):
        TagQueryClient(replay("tag_query")).fetch([], SMALL_REGION)
    with pytest.raises(ValidationError):
        TagQueryClient(replay("tag_query")).fetch(["office"], SMALL_REGION)


# -- jobs ------------------------------------------------------------------------


def test_jobs_zip_extraction():
    jobs = job_fetch(SMALL_REGION, JobSearchClient(replay("jobs"), "technology"))
    assert len(jobs) == 10
    zips = {j.posting_id: j.zip_id for j in jobs}
    assert zips == {
        "J01": "02110",
        "J02": "02210",
        "J03": "02116",
        "J04": None,
        "J05": "02138",
        "J06": None,
        "J07": "02115",
        "J08": None,
        "J09": "02109",
        "J10": None,
    }
    assert sum(z is not None for z in zips.values()) == 6
    assert JobSearchClient(replay("jobs"), "nothing").fetch(SMALL_REGION) == []


@pytest.mark.parametrize(
    "posting, expected",
    [
        ({"postal_code": "02139-1234"}, "02139"),
        ({"postal_code": "2139"}, None),
        ({"formatted_location": "Boston, MA 02110 "}, "02110"),
        ({"formatted_location": "Suite 02110, Boston"}, None),
        ({}, None),
    ],
)
def test_extract_zip(posting, expected):
    assert extract_zip(posting) == expected


# -- live mode -------------------------------------------------------------------


class FlakyTransport:
    def __init__(self, failures, body='{"results": [], "status": "ZERO_RESULTS"}'):
        self.failures = failures
        self.body = body
        self.calls = []

    def __call__(self, method, url, params, data):
        self.calls.append((method, url, dict(params)))
        if len(self.calls) <= self.failures:
            raise ConnectionError("HTTP 503")
        return self.body


def test_live_retries_with_exponential_backoff_then_records(tmp_path):
    sleeps = []
    t = FlakyTransport(failures=3)
    cas = Cassette(tmp_path, "keyword_search", "live", transport=t, rate_limit_rps=1e6, sleep=sleeps.append)
    assert KeywordSearchClient(cas, api_key="k").fetch("hub", SMALL_REGION) == []
    assert len(t.calls) == 4
    backoffs = [s for s in sleeps if s >= 1.0]
    assert backoffs == [1.0, 2.0, 4.0]
    # wire params carry the API key, the recorded key does not
    assert t.calls[-1][2]["key"] == "k"
    params = {"query": "hub", "region": SMALL_REGION, "page_token": None}
    assert cas.path_for(params).exists()
    # a replay of what was just recorded needs no transport
    assert KeywordSearchClient(Cassette(tmp_path, "keyword_search", "replay")).fetch("hub", SMALL_REGION) == []


def test_live_gives_up_after_five_attempts(tmp_path):
    t = FlakyTransport(failures=99)
    cas = Cassette(tmp_path, "jobs", "live", transport=t, rate_limit_rps=1e6, sleep=lambda s: None)
    with pytest.raises(SourceError, match="5 attempts"):
        JobSearchClient(cas).fetch(SMALL_REGION)
    assert len(t.calls) == 5
    assert not any(tmp_path.rglob("*.json"))


def test_token_bucket_spaces_requests():
    now = [0.0]
    slept = []

    def sleep(s):
        slept.append(s)
        now[0] += s

    tb = TokenBucket(2.0, clock=lambda: now[0], sleep=sleep)
    for _ in range(5):
        tb.acquire()
    # first token is free, then one every half second
    assert now[0] == pytest.approx(2.0)
    with pytest.raises(ConfigError):
        TokenBucket(0)


def test_unknown_mode_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        Cassette(tmp_path, "jobs", "record")


# -- rating normalization ---------------------------------------------------------


@pytest.mark.parametrize(
    "raw, expected",
    [
        ((4.5, 10), (4.5, 10)),
        ((4.5, 0), (None, 0)),
        ((None, 0), (None, 0)),
        ((None, None), (None, 0)),
        ((None, 7), (None, 0)),
    ],
)
def test_normalize_rating(raw, expected):
    assert normalize_rating(*raw) == expected


def test_record_validation():
    p = GeoPoint(-71.0, 42.3)
    with pytest.raises(ValidationError):
        PoiRecord(Source.keyword_search, "x", "", p, 4.0, 0)
    with pytest.raises(ValidationError):
        PoiRecord(Source.keyword_search, "x", "", p, 5.5, 3)
    with pytest.raises(ValidationError):
        PoiRecord(Source.keyword_search, "", "", p, None, 0)


def test_registry_loader_normalizes(tmp_path):
    path = tmp_path / "r.jsonl"
    path.write_text(
        json.dumps({"id": "a", "name": "A", "lon": -71.0, "lat": 42.3, "rating": 4.0, "rating_count": 0, "categories": ["lab"]})
        + "\n\n"
        + json.dumps({"id": "b", "lon": -71.0, "lat": 42.3})
        + "\n"
    )
    a, b = load_registry(path)
    assert a.rating is None and a.rating_count == 0 and a.matched_terms == {"lab"}
    assert b.source is Source.registry
    path.write_text(json.dumps({"id": "c", "lon": -71.0}) + "\n")
    with pytest.raises(ValidationError, match=":1:"):
        load_registry(path)


# -- dedupe ----------------------------------------------------------------------


def rec(pid, count, term, dx=0.0, source=Source.keyword_search, name=None):
    rating = None if count == 0 else 4.0
    return PoiRecord(source, pid, name or f"{pid}-{count}", GeoPoint(-71.0 + dx, 42.3), rating, count, {term})


def test_dedupe_prefers_most_ratings_and_unions_terms():
    out = dedupe([rec("a", 3, "t1"), rec("a", 9, "t2"), rec("a", 9, "t3", name="late")])
    assert len(out) == 1
    assert out[0].rating_count == 9
    assert out[0].name == "a-9"
    assert out[0].matched_terms == {"t1", "t2", "t3"}


def test_dedupe_keeps_sources_apart():
    out = dedupe([rec("a", 1, "t"), rec("a", 1, "t", source=Source.tag_query)])
    assert [r.source for r in out] == [Source.keyword_search, Source.tag_query]


def test_dedupe_warns_only_on_far_duplicates():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        dedupe([rec("a", 1, "t"), rec("a", 2, "u", dx=0.0005)])  # about 41 m
    with pytest.warns(DataQualityWarning, match="keyword_search/a"):
        dedupe([rec("a", 1, "t"), rec("a", 2, "u", dx=0.002)])  # about 164 m


records = st.lists(
    st.builds(
        rec,
        st.sampled_from(["a", "b", "c", "d"]),
        st.integers(0, 5),
        st.sampled_from(["t1", "t2", "t3"]),
        st.just(0.0),
        st.sampled_from([Source.keyword_search, Source.tag_query]),
    ),
    max_size=30,
)


@given(records)
def test_dedupe_laws(rs):
    once = dedupe(rs)
    keys = [(r.source.value, r.place_id) for r in once]
    assert keys == sorted(set(keys))
    assert dedupe(once) == once
    # records tied on rating_count are identical here apart from terms, so order is irrelevant
    assert dedupe(list(reversed(rs))) == once
    for o in once:
        group = [r for r in rs if (r.source, r.place_id) == (o.source, o.place_id)]
        assert o.matched_terms == frozenset().union(*(r.matched_terms for r in group))
        assert o.rating_count == max(r.rating_count for r in group)
