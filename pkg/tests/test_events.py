import calendar
import json
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vapp.errors import ImplausibleYear, Unparseable
from vapp.events import (
    CanonicalEvent,
    GeoPoint,
    IdentityRecord,
    Provenance,
    normalize,
    normalize_timestamp,
    normalize_with_skips,
    validate_vin,
    vin_check_digit,
)
from vapp.extractors import RawRecord

from _util import run_tree, render


def rec(kind="refuel", locator="CostBookItem#1", epoch="iso8601", **fields):
    return RawRecord("myaudi", "ios", "/x/Documents/maps.db", locator, kind, fields,
                     categories=("refueling",), epoch=epoch, sha256="ab" * 32, source_id="src-1")


# --- timestamps -------------------------------------------------------------


def test_epoch_origins():
    assert normalize_timestamp(0, "apple_s") == 978307200000
    assert normalize_timestamp(0, "unix_s") == 0
    assert normalize_timestamp(1604412000123, "unix_ms") == 1604412000123


def test_iso_against_calendar():
    expected = calendar.timegm((2020, 11, 3, 14, 0, 0)) * 1000
    assert normalize_timestamp("2020-11-03T14:00:00Z", "iso8601") == expected == 1604412000000
    assert normalize_timestamp("2020-11-03T15:00:00+01:00", "iso8601") == expected
    assert normalize_timestamp("2020-11-03T14:00:00.5Z", "iso8601") == expected + 500


def test_timestamp_errors():
    with pytest.raises(Unparseable):
        normalize_timestamp("yesterday", "iso8601")
    with pytest.raises(Unparseable):
        normalize_timestamp(None, "unix_s")
    with pytest.raises(Unparseable):
        normalize_timestamp(float("nan"), "unix_ms")
    with pytest.raises(ImplausibleYear):
        normalize_timestamp(0, "unix_s", check_year=True)


@given(st.datetimes(min_value=datetime(1971, 1, 1), max_value=datetime(2999, 1, 1)))
def test_iso_matches_timegm(dt):
    dt = dt.replace(microsecond=dt.microsecond // 1000 * 1000)
    text = dt.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"
    expected = calendar.timegm(dt.timetuple()) * 1000 + dt.microsecond // 1000
    assert normalize_timestamp(text, "iso8601") == expected


@given(st.integers(min_value=0, max_value=4_000_000_000))
def test_epochs_agree(seconds):
    unix = normalize_timestamp(seconds, "unix_s")
    assert normalize_timestamp(unix, "unix_ms") == unix
    assert normalize_timestamp(seconds - 978307200, "apple_s") == unix


# --- VINs -------------------------------------------------------------------


def test_vin_rules():
    assert not validate_vin("WVGZZZ5NZIW000001").valid
    assert "length" in validate_vin("WVGZZZ5NZJW00000").reason
    assert validate_vin("WVGZZZ5NZJW000001").valid
    assert not validate_vin(12345678901234567).valid


def _iso3779(vin):
    values = {}
    for i, c in enumerate("ABCDEFGH"):
        values[c] = i + 1
    for i, c in enumerate("JKLMN"):
        values[c] = i + 1
    values.update(P=7, R=9)
    for i, c in enumerate("STUVWXYZ"):
        values[c] = i + 2
    weights = [8, 7, 6, 5, 4, 3, 2, 10, 0, 9, 8, 7, 6, 5, 4, 3, 2]
    total = sum((int(c) if c.isdigit() else values[c]) * w for c, w in zip(vin, weights))
    return "X" if total % 11 == 10 else str(total % 11)


def test_check_digit(gt):
    assert validate_vin("1M8GDM9AXKP042788", check_digit=True).valid
    assert not validate_vin("1M8GDM9A1KP042788", check_digit=True).valid
    vin = gt.scenario.vin
    assert vin[8] == _iso3779(vin)
    assert validate_vin(vin, check_digit=True).valid


@given(st.text(alphabet="ABCDEFGHJKLMNPRSTUVWXYZ0123456789", min_size=17, max_size=17))
def test_check_digit_oracle(vin):
    assert vin_check_digit(vin) == _iso3779(vin)


# --- normalization ----------------------------------------------------------


def test_empty_records():
    assert normalize([]) == []


def test_refuel_row():
    (e,) = normalize([rec(start="2020-11-03T14:00:00Z", fuel_liters=42.5, price=61.2, currency="EUR")])
    assert e.kind == "refuel"
    assert e.start == 1604412000000
    assert e.attributes["fuel_liters"] == 42.5 and e.attributes["price"] == 61.2
    assert e.attributes["categories"] == ["refueling"]
    assert e.provenance[0].artifact_path == "/x/Documents/maps.db"
    assert e.time_confidence == "exact"


def test_units_are_converted():
    (e,) = normalize([rec(kind="status_snapshot", locator="s", start="2020-11-03T14:00:00Z",
                          speed_mph=10, fuel_ml=1500, temp_f=212)])
    assert e.attributes["speed_kmh"] == pytest.approx(16.09344)
    assert e.attributes["fuel_liters"] == 1.5
    assert e.attributes["temp_c"] == 100.0


def test_epoch_reinference_lowers_confidence():
    (e,) = normalize([rec(locator="a", epoch="unix_ms", start=1604412000)])
    assert e.start == 1604412000000
    assert e.time_confidence == "inferred"
    assert "re-inferred" in e.attributes["time_note"]


def test_bad_records_become_skips():
    records = [
        rec(locator="a"),  # refuel without a start
        rec(locator="b", start="not a time"),
        rec(locator="c", start="2020-11-03T14:00:00Z", lat=91.0, lon=0.0),
        rec(locator="d", kind="teleport", start="2020-11-03T14:00:00Z"),
        rec(locator="e", start="2020-11-03T14:00:00Z", end="2020-11-03T13:00:00Z"),
    ]
    events, skips = normalize_with_skips(records)
    assert events == []
    assert [s.locator for s in skips] == ["a", "b", "c", "d", "e"]


def test_invalid_vin_kept_as_raw_attribute():
    (e,) = normalize([rec(start="2020-11-03T14:00:00Z", vin="WVGOOO")])
    assert e.vin is None
    assert e.attributes["vin_raw"] == "WVGOOO"


def test_null_island_flagged():
    (e,) = normalize([rec(kind="location_fix", locator="f", start="2020-11-03T14:00:00Z", lat=0.0, lon=0.0)])
    assert e.geo_start.suspect and e.attributes["geo_suspect"] is True


def test_encrypted_record():
    r = RawRecord("mercedes", "android", "/x/databases/mbfa.db", "file", "encrypted_artifact", {},
                  encrypted=True, categories=("refueling",))
    (e,) = normalize([r])
    assert e.kind == "encrypted_artifact" and e.start is None and e.time_confidence == "undated"


def test_ordering_and_ids_stable():
    records = [rec(locator=f"CostBookItem#{i}", start=f"2020-11-0{i}T10:00:00Z", fuel_liters=float(i))
               for i in (3, 1, 2)]
    a = normalize(records)
    b = normalize(list(reversed(records)))
    assert a == b
    assert [e.start for e in a] == sorted(e.start for e in a)


def test_mercedes_trackpoints(gt, tmp_path):
    run = run_tree(render(gt, "mercedes", "ios", "logged_in", tmp_path))
    trips = [e for e in run.events if e.kind == "trip" and "trip_ref" in e.attributes]
    assert trips
    trip = trips[0]
    fixes = sorted((e for e in run.events if e.kind == "location_fix"
                    and e.attributes.get("trip_ref") == trip.attributes["trip_ref"]), key=lambda e: e.start)
    assert len(fixes) == trip.attributes["trackpoint_count"]
    steps = {b.start - a.start for a, b in zip(fixes, fixes[1:])}
    assert steps == {10_000}
    assert fixes[0].start == trip.start


def test_identity_record():
    (e,) = normalize([rec(kind="identity", locator="u", epoch=None, name="Anna Becker", email="a@b.c")])
    ident = IdentityRecord.from_event(e)
    assert ident.to_json() == {"name": "Anna Becker", "email": "a@b.c"}
    with pytest.raises(ValueError):
        IdentityRecord()


def test_event_invariants():
    prov = (Provenance("s", "/p", "00", "l", "v"),)
    with pytest.raises(ValueError):
        CanonicalEvent("x", "trip", None, provenance=prov)
    with pytest.raises(ValueError):
        CanonicalEvent("x", "parking", 10, 5, provenance=prov)
    with pytest.raises(ValueError):
        CanonicalEvent("x", "parking", 10, vin="SHORT", provenance=prov)
    with pytest.raises(ValueError):
        GeoPoint(0.0, 181.0)
    undated = CanonicalEvent("x", "nav_destination", None, provenance=prov, time_confidence="undated")
    assert not undated.dated


_attrs = st.dictionaries(
    st.sampled_from(["fuel_liters", "price", "mileage_km", "address_start", "speed_kmh", "gear", "doors_locked"]),
    st.one_of(st.floats(allow_nan=False, allow_infinity=False, width=64), st.integers(-10 ** 6, 10 ** 6),
              st.text(max_size=20), st.booleans()),
)


@given(_attrs, st.integers(min_value=946684800000, max_value=4102444799000))
def test_json_round_trip(attrs, start):
    (e,) = normalize([rec(kind="status_snapshot", locator="s", epoch="unix_ms", start=start, **attrs)])
    text = json.dumps(e.to_json())
    back = CanonicalEvent.from_json(json.loads(text))
    assert back == e


@given(_attrs)
def test_normalize_idempotent_ids(attrs):
    r = rec(kind="status_snapshot", locator="s", start="2020-11-03T14:00:00Z", **attrs)
    assert [e.event_id for e in normalize([r])] == [e.event_id for e in normalize([r, r])]


@given(st.lists(st.one_of(st.none(), st.text(max_size=8), st.integers(), st.floats()), max_size=6))
def test_total_function(starts):
    records = [rec(locator=str(i), start=s, fuel_liters=1.0) for i, s in enumerate(starts)]
    events, skips = normalize_with_skips(records)
    assert len(events) + len(skips) >= len(records)
    assert all(datetime.fromtimestamp(e.start / 1000, tz=timezone.utc).year >= 2000 for e in events)
