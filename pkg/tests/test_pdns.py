import io

import pytest

from phishlex.errors import ClockSkew, FieldCountError, NumericFieldError
from phishlex.pdns import (
    AGGREGATE_HEADER,
    Aggregator,
    PdnsRecord,
    aggregate,
    aggregates_to_csv,
    parse_line,
    query_hosts,
    read_log,
)

LINE = "1563000000.123||10.0.0.5||8.8.8.8||IN||test.com.||A||93.184.216.34||3600||1"


def rec(ts, query="a.test.", ttl=60, answer="1.1.1.1", qtype="A"):
    return PdnsRecord(ts, "c", "s", "IN", query, qtype, answer, ttl, 1)


def test_parse_line():
    r = parse_line(LINE)
    assert r.timestamp == 1563000000.123 and r.query == "test.com." and r.ttl == 3600 and r.count == 1
    assert r.key == ("test.com.", "A", "93.184.216.34")


def test_parse_errors():
    with pytest.raises(FieldCountError):
        parse_line(LINE.rsplit("||", 1)[0])
    with pytest.raises(NumericFieldError):
        parse_line(LINE.replace("||3600||", "||abc||"))
    with pytest.raises(NumericFieldError):
        parse_line("x" + LINE)


def test_read_log_skips_bad_lines():
    stream = io.StringIO(LINE + "\n\nnot a record\n" + LINE.replace("test.com.", "b.com.") + "\n")
    assert [r.query for r in read_log(stream)] == ["test.com.", "b.com."]
    with pytest.raises(FieldCountError):
        list(read_log(io.StringIO("bad\n"), strict=True))


def test_within_window_merges():
    out = aggregate([rec(0, ttl=30), rec(3600, ttl=90)])
    assert len(out) == 1 and out[0].count == 2 and out[0].max_ttl == 90 and out[0].first_seen == 0


def test_past_window_reemits():
    out = aggregate([rec(0), rec(13 * 3600)])
    assert [e.first_seen for e in out] == [0, 13 * 3600]


def test_window_anchored_at_emission():
    # sightings every 5 h keep arriving, but the window is measured from emission
    out = aggregate([rec(0), rec(5 * 3600), rec(10 * 3600), rec(15 * 3600)])
    assert [(e.first_seen, e.count) for e in out] == [(0, 3), (15 * 3600, 1)]


def test_boundary_exactly_twelve_hours():
    assert len(aggregate([rec(0), rec(43200)])) == 2
    assert len(aggregate([rec(0), rec(43199.999)])) == 1


def test_out_of_order_within_skew():
    out = aggregate([rec(100), rec(70, ttl=500)])
    assert len(out) == 1 and out[0].first_seen == 70 and out[0].max_ttl == 500


def test_skew_dropped():
    agg = Aggregator()
    agg.add(rec(1000))
    with pytest.raises(ClockSkew):
        agg.add(rec(900, query="b.test."))
    assert agg.skew_dropped == 1 and agg.accepted == 1


def test_eviction_keeps_emitted():
    agg = Aggregator()
    agg.add(rec(0))
    agg.add(rec(50000, query="b.test."))
    assert ("a.test.", "A", "1.1.1.1") not in agg.cache
    assert len(agg.emitted) == 2


def test_distinct_keys_are_separate():
    out = aggregate([rec(0), rec(1, answer="2.2.2.2"), rec(2, qtype="AAAA")])
    assert len(out) == 3


def test_csv_and_hosts():
    out = aggregate([rec(0, query="A.test."), rec(1, query="a.test"), rec(2, query="b.test.")])
    text = aggregates_to_csv(out)
    assert text.splitlines()[0] == ",".join(AGGREGATE_HEADER)
    assert list(query_hosts(out)) == ["a.test", "b.test"]


from hypothesis import given, strategies as st  # noqa: E402


@given(st.lists(st.tuples(st.integers(-90, 20000), st.sampled_from("abc"), st.integers(0, 500)), max_size=60))
def test_count_conservation_and_first_seen(steps):
    agg = Aggregator()
    t = 0.0
    accepted: dict = {}
    for dt_, q, ttl in steps:
        t = max(0.0, t + dt_)
        r = rec(t, query=q + ".test.", ttl=ttl)
        try:
            agg.add(r)
        except ClockSkew:
            continue
        accepted.setdefault(r.key, []).append(r)
    for key, recs in accepted.items():
        entries = [e for e in agg.emitted if e.key == key]
        assert sum(e.count for e in entries) == len(recs)
        assert min(e.first_seen for e in entries) == min(r.timestamp for r in recs)
        assert max(e.max_ttl for e in entries) == max(r.ttl for r in recs)
    assert len(agg.cache) <= len({e.key for e in agg.emitted})
