import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vapp.errors import UnknownApp
from vapp.forge import CATALOG, STATES, expected_recovery, generate_scenario, ground_truth, load_matrix, render_files
from vapp.forge.oracle import Skeleton
from vapp.forge.scenario import ACTION_KINDS, TRACK_INTERVAL_S, polyline_km
from vapp.forge.sar import render_sar
from vapp.formats import detect_encrypted_db
from vapp.registry import CATEGORIES, registry, sar_presence


def test_same_seed_same_scenario():
    assert generate_scenario(5, 12) == generate_scenario(5, 12)
    assert generate_scenario(5, 12) != generate_scenario(6, 12)


def test_length_zero_is_an_error():
    with pytest.raises(ValueError):
        generate_scenario(1, 0)


def test_seed_one_covers_every_action():
    kinds = {a.kind for a in generate_scenario(1, len(CATALOG)).actions}
    assert kinds == set(ACTION_KINDS)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 64 - 1), st.integers(1, 20))
def test_scenario_invariants(seed, length):
    s = generate_scenario(seed, length)
    times = [a.t for a in s.actions]
    assert times == sorted(times)
    assert s.drives
    for d in s.drives:
        assert len(d.route) >= 2
        assert d.end - d.t >= 10 * 60_000
        assert {b.t - a.t for a, b in zip(d.route, d.route[1:])} == {TRACK_INTERVAL_S * 1000}
    assert s.vin[8] in "0123456789X"


def test_drive_minutes():
    (d,) = generate_scenario(3, 1, drive_minutes=10).drives
    assert d.end - d.t == 600_000
    assert len(d.route) == 61
    assert polyline_km(d.route) == pytest.approx(d.distance_km, rel=1e-6)


def test_matrix_shape():
    m = load_matrix()
    assert set(m.cells) == {(d.app_id, d.platform) for d in registry()}
    for cell in m.cells.values():
        assert set(cell.categories) == set(CATEGORIES)
    assert m.symbol("mercedes", "android", "drive_log") == "encrypted"
    assert not m.retains("weconnect_go", "ios", "logged_out")
    assert m.retains("myaudi", "android", "logged_out")


def test_weconnect_ios_logged_out(gt):
    names = {p.rsplit("/", 1)[-1] for p in render_files(gt.scenario, "weconnect_go", "ios", "logged_out")}
    assert "avacar.db" not in names
    assert "VW_DataPlug_2_1_ClientURLTranslation_5_1.sqlite3" in names
    assert any("_EXTERNAL_DATA" in p for p in render_files(gt.scenario, "weconnect_go", "ios", "logged_out"))


def test_myaudi_android_logged_out_keeps_databases(gt):
    a = render_files(gt.scenario, "myaudi", "android", "logged_in")
    b = render_files(gt.scenario, "myaudi", "android", "logged_out")
    db = [p for p in a if p.endswith("audiMapsDatabase.db")]
    assert db and all(b[p] == a[p] for p in db)


@pytest.mark.parametrize("desc", registry(), ids=lambda d: f"{d.app_id}-{d.platform}")
def test_uninstalled_renders_nothing(gt, desc):
    assert render_files(gt.scenario, desc.app_id, desc.platform, "uninstalled") == {}
    assert expected_recovery(gt.scenario, desc.app_id, desc.platform, "uninstalled") == []


def test_render_errors(gt):
    with pytest.raises(UnknownApp):
        render_files(gt.scenario, "trabant", "android", "logged_in")
    with pytest.raises(ValueError):
        render_files(gt.scenario, "tesla", "android", "asleep")


def test_encrypted_fixtures_are_scrambled(gt):
    files = render_files(gt.scenario, "mercedes", "android", "logged_in")
    db = next(v for k, v in files.items() if k.endswith("driverlogbookDatabase.db"))
    assert detect_encrypted_db(db)
    plain = render_files(gt.scenario, "mercedes", "android", "logged_in", encrypt=False)
    assert not detect_encrypted_db(next(v for k, v in plain.items() if k.endswith("driverlogbookDatabase.db")))


@pytest.mark.parametrize("desc", registry()[:6], ids=lambda d: f"{d.app_id}-{d.platform}")
def test_render_is_deterministic(desc):
    a = render_files(generate_scenario(9, 12), desc.app_id, desc.platform, "logged_in")
    b = render_files(generate_scenario(9, 12), desc.app_id, desc.platform, "logged_in")
    assert a == b


def test_expected_recovery_examples(gt):
    s = gt.scenario
    assert expected_recovery(s, "my_bmw", "ios", "logged_in") == []
    mb = expected_recovery(s, "mercedes", "android", "logged_in")
    assert "trip" not in {k.kind for k in mb}
    assert Skeleton("drive_log", "encrypted_artifact", None, None) in mb
    tesla = expected_recovery(s, "tesla", "android", "logged_in")
    kinds = {k.kind for k in tesla}
    assert "trip" not in kinds and "status_snapshot" in kinds
    assert {k.category for k in tesla} >= {"recent_location"}


def test_expected_recovery_follows_matrix(gt):
    m = load_matrix()
    for d in registry():
        row = m.row(d.app_id, d.platform)
        for sk in expected_recovery(gt.scenario, d.app_id, d.platform, "logged_in", m):
            if sk.category is None:
                continue
            if sk.kind == "encrypted_artifact":
                assert row[sk.category] == "encrypted"
            else:
                assert row[sk.category] in ("extensive", "partial")


def test_expected_recovery_rejects_unknown_state(gt):
    with pytest.raises(ValueError):
        expected_recovery(gt.scenario, "tesla", "ios", "asleep")


# --- SAR containers ------------------------------------------------------------------


def test_ford_sar_is_customer_only(gt):
    files = render_sar(gt, "ford")
    assert set(files) == {"manifest.json", "customer.csv"}
    header = files["customer.csv"].decode().splitlines()[0]
    assert header == "name,email"


def test_tesla_sar_telemetry(gt):
    files = render_sar(gt, "tesla", telemetry_pad_ms=0)
    lines = files["telemetry.csv"].decode().splitlines()
    assert len(lines[0].split(",")) == 230
    expected_rows = sum((d.end - d.t) // 100 for d in gt.scenario.drives)
    assert len(lines) - 1 == expected_rows
    manifest = json.loads(files["manifest.json"])
    assert manifest["telemetry"] == "telemetry.csv"


def test_seat_sar_access_log(gt):
    rows = render_sar(gt, "seat")["vehicle_access.csv"].decode().splitlines()[1:]
    assert len(rows) == len(gt.scenario.of("lock", "unlock"))


@pytest.mark.parametrize("manufacturer", ["audi", "bmw", "opel", "volkswagen", "mercedes"])
def test_sar_manifest_mirrors_presence(gt, manufacturer):
    manifest = json.loads(render_sar(gt, manufacturer)["manifest.json"])
    listed = {e["name"]: e["presence"] for e in manifest["categories"]}
    assert listed == sar_presence(manufacturer)


def test_unknown_manufacturer(gt):
    with pytest.raises(ValueError):
        render_sar(gt, "lada")


def test_ground_truth_cache_is_stable():
    assert ground_truth(1, 12).scenario == ground_truth(1, 12).scenario
    assert set(STATES) == {"logged_in", "logged_out", "uninstalled"}
