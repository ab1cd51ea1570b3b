import random
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vapp.events import CanonicalEvent, GeoPoint, Provenance, event_id_for
from vapp.timeline import Interval, build, gaps, query, summarize

from _util import render, run_tree

T0 = 1604300400000  # 2020-11-02T07:00:00Z
MIN = 60_000
FIXED = datetime(2020, 1, 1, tzinfo=timezone.utc)


def ev(kind, start, end=None, *, vin=None, source="s1", app="a", platform="ios", loc=None, geo=None, **attrs):
    loc = loc or f"{kind}@{start}"
    prov = Provenance(source, f"/{app}/{platform}", "00", loc, "test", app, platform)
    eid = event_id_for(kind, start, vin, attrs, prov.artifact_path, loc)
    return CanonicalEvent(eid, kind, start, end, geo, None, vin, attrs, (prov,),
                          "exact" if start is not None else "undated")


@pytest.fixture(scope="module")
def wcg_events(gt, tmp_path_factory):
    root = tmp_path_factory.mktemp("wcg")
    events = []
    for platform in ("ios", "android"):
        events += run_tree(render(gt, "weconnect_go", platform, "logged_in", root)).events
    return events


def test_empty():
    t = build([], built_at=FIXED)
    assert t.events == () and t.sources == ()
    assert summarize(t).per_vin == {}
    assert gaps(t, MIN) == []


def test_dual_platform_refuel_merges(gt, wcg_events):
    t = build(wcg_events, built_at=FIXED)
    refuels = [e for e in t.events if e.kind == "refuel"]
    assert len(refuels) == len(gt.scenario.refuels)
    for e in refuels:
        assert {p.platform for p in e.provenance} == {"ios", "android"}
        assert len(e.provenance) == 2


def test_shuffled_input(wcg_events):
    a = build(wcg_events, built_at=FIXED)
    shuffled = list(wcg_events)
    random.Random(7).shuffle(shuffled)
    assert build(shuffled, built_at=FIXED) == a


def test_idempotent(wcg_events):
    t = build(wcg_events, built_at=FIXED)
    assert build(t.events, built_at=FIXED) == t


def test_no_merge_within_one_source():
    a = ev("refuel", T0, fuel_liters=40.0, loc="1")
    b = ev("refuel", T0 + 1000, fuel_liters=40.0, loc="2")
    assert len(build([a, b]).events) == 2


def test_merge_needs_agreeing_attributes():
    a = ev("refuel", T0, fuel_liters=40.0)
    b = ev("refuel", T0 + 30_000, fuel_liters=40.0, source="s2")
    c = ev("refuel", T0 + 30_000, fuel_liters=12.0, source="s3")
    d = ev("refuel", T0 + 90_000, fuel_liters=40.0, source="s4")
    t = build([a, b, c, d])
    assert sorted(len(e.provenance) for e in t.events) == [1, 1, 2]


def test_far_apart_positions_do_not_merge():
    a = ev("parking", T0, geo=GeoPoint(51.95, 7.60), loc="p1")
    b = ev("parking", T0, geo=GeoPoint(51.96, 7.60), source="s2", loc="p2")
    assert len(build([a, b]).events) == 2


def test_conflicting_vins_do_not_merge():
    a = ev("refuel", T0, vin="WVGZZZ5NZJW000001", fuel_liters=40.0)
    b = ev("refuel", T0, vin="WVGZZZ5NZJW000002", fuel_liters=40.0, source="s2")
    c = ev("refuel", T0, fuel_liters=40.0, source="s3")
    t = build([a, b, c])
    assert len(t.events) == 2
    assert all(e.vin for e in t.events)


def test_undated_sort_last():
    nav = ev("nav_destination", None, destination="Hafenweg")
    trip = ev("trip", T0, T0 + MIN)
    assert [e.kind for e in build([nav, trip]).events] == ["trip", "nav_destination"]


def test_query_examples():
    trip = ev("trip", T0, T0 + 10 * MIN)
    park = ev("parking", T0 + 11 * MIN)
    t = build([trip, park])
    assert query(t, Interval(T0 - 100 * MIN, T0 - 50 * MIN)) == []
    # open-ended parking spans past the interval end
    assert query(t, Interval(T0 + 500 * MIN, T0 + 600 * MIN)) == [park]
    assert query(t, Interval(T0, T0 + 5 * MIN), kinds={"trip"}) == [trip]
    assert query(t, Interval(T0, T0), vin="WVGZZZ5NZJW000001") == []


def test_query_two_trips_in_a_day(gt):
    s = gt.scenario
    day = s.drives[0].t - s.drives[0].t % 86_400_000
    expected = sum(1 for d in s.drives if d.t < day + 86_400_000 and d.end >= day)
    assert expected == 2
    events = [ev("trip", d.t, d.end, loc=str(i)) for i, d in enumerate(s.drives)]
    events.append(ev("refuel", s.refuels[0].t, fuel_liters=s.refuels[0].liters))
    assert len(query(build(events), Interval(day, day + 86_400_000 - 1), kinds={"trip"})) == expected


def test_summary_totals():
    trip = ev("trip", T0, T0 + 10 * MIN, vin="WVGZZZ5NZJW000001", distance_km=12.0)
    refuel = ev("refuel", T0 + 20 * MIN, vin="WVGZZZ5NZJW000001", fuel_liters=40.0)
    s = summarize(build([trip, refuel])).per_vin["WVGZZZ5NZJW000001"]
    assert (s.trip_count, s.total_distance_km, s.refuel_count, s.total_fuel_liters) == (1, 12.0, 1, 40.0)
    assert s.first_seen == T0 and s.last_seen == T0 + 20 * MIN


def test_parking_duration():
    park = ev("parking", T0 + 3 * 3_600_000)
    trip = ev("trip", T0 + 3 * 3_600_000 + 45 * MIN, T0 + 4 * 3_600_000)
    lock = ev("lock_state", T0 + 3 * 3_600_000 + 10 * MIN)
    (episode,) = summarize(build([park, lock, trip])).per_vin[None].parking_episodes
    assert episode.duration_ms == 45 * MIN
    (open_ended,) = summarize(build([park])).per_vin[None].parking_episodes
    assert open_ended.duration_ms is None


def test_summary_against_ground_truth(gt, wcg_events):
    s = gt.scenario
    summary = summarize(build(wcg_events)).per_vin[s.vin]
    assert summary.trip_count == len(s.drives)
    assert summary.total_distance_km == pytest.approx(sum(d.distance_km for d in s.drives), abs=0.001)
    assert summary.refuel_count == len(s.refuels)
    assert summary.total_fuel_liters == pytest.approx(sum(r.liters for r in s.refuels))


def test_gaps_examples():
    assert gaps(build([ev("trip", T0, T0 + MIN)]), MIN) == []
    a, b = ev("lock_state", T0), ev("lock_state", T0 + 2 * 3_600_000)
    assert gaps(build([a, b]), 3_600_000) == [Interval(T0, T0 + 2 * 3_600_000)]
    fixes = [ev("location_fix", T0 + i * 10_000) for i in range(61)]
    assert gaps(build(fixes), MIN) == []
    with pytest.raises(ValueError):
        gaps(build([]), 0)


def test_interval_order():
    with pytest.raises(ValueError):
        Interval(2, 1)


_kinds = st.sampled_from(["trip", "refuel", "parking", "lock_state", "location_fix", "nav_destination"])
_vins = st.sampled_from([None, "WVGZZZ5NZJW000001", "WVGZZZ5NZJW000002"])


@st.composite
def _events(draw):
    out = []
    for i in range(draw(st.integers(0, 25))):
        kind = draw(_kinds)
        start = None if kind == "nav_destination" else T0 + draw(st.integers(0, 240)) * 30_000
        end = start + draw(st.integers(0, 20)) * MIN if kind == "trip" else None
        attrs = {}
        if kind == "refuel":
            attrs["fuel_liters"] = draw(st.sampled_from([30.0, 40.0]))
        if kind == "trip":
            attrs["distance_km"] = draw(st.sampled_from([5.0, 12.5]))
        out.append(ev(kind, start, end, vin=draw(_vins), source=draw(st.sampled_from(["s1", "s2", "s3"])),
                      platform=draw(st.sampled_from(["ios", "android"])), loc=f"r{i}", **attrs))
    return out


@settings(max_examples=60)
@given(_events(), st.randoms())
def test_order_independence(events, rnd):
    shuffled = list(events)
    rnd.shuffle(shuffled)
    assert build(shuffled, built_at=FIXED) == build(events, built_at=FIXED)


@settings(max_examples=60)
@given(_events())
def test_build_is_idempotent(events):
    t = build(events, built_at=FIXED)
    assert build(t.events, built_at=FIXED) == t
    ids = [e.event_id for e in t.events]
    assert len(ids) == len(set(ids))


@settings(max_examples=60)
@given(_events())
def test_whole_range_query_and_partition(events):
    t = build(events)
    whole = query(t, Interval(0, 2 ** 62), include_undated=True)
    assert sorted(e.event_id for e in whole) == sorted(e.event_id for e in t.events)
    summary = summarize(t)
    for vin, s in summary.per_vin.items():
        part = query(t, Interval(0, 2 ** 62), vin=vin) if vin else [
            e for e in query(t, Interval(0, 2 ** 62)) if e.vin is None]
        assert s.trip_count == sum(1 for e in part if e.kind == "trip")
        assert s.refuel_count == sum(1 for e in part if e.kind == "refuel")
        assert s.total_fuel_liters == pytest.approx(sum(e.attributes["fuel_liters"] for e in part
                                                        if e.kind == "refuel"))
        assert s.total_distance_km == pytest.approx(sum(e.attributes["distance_km"] for e in part
                                                        if e.kind == "trip"))
