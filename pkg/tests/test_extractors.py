import pytest

from vapp.errors import SourceClosed, UnknownApp
from vapp.evidence import enumerate_files, open_source, verify
from vapp.extractors import extract_artifacts, list_artifact_specs
from vapp.forge import STATES, expected_recovery
from vapp.locator import detect
from vapp.registry import registry

from _util import recovered, render, run_tree


def _extract(path):
    with open_source(path) as src:
        entries = enumerate_files(src)
        matches = detect(entries, src.read)
        return src, [extract_artifacts(m, src) for m in matches]


def test_specs_for_apps_without_files():
    assert list_artifact_specs("my_bmw", "ios") == []
    assert list_artifact_specs("onstar", "ios") == []
    with pytest.raises(UnknownApp):
        list_artifact_specs("nope", "ios")


def test_weconnect_android_has_avacar():
    assert any("avacar.db" in s.relative_path_pattern for s in list_artifact_specs("weconnect_go", "android"))


def test_myaudi_ios_maps_db(gt, tmp_path):
    _, results = _extract(render(gt, "myaudi", "ios", "logged_in", tmp_path))
    (result,) = results
    maps = [r for r in result.records if r.artifact_path.endswith("Documents/maps.db")]
    by_table = {}
    for r in maps:
        by_table.setdefault(r.locator.split("#")[0], []).append(r)
    assert set(by_table) == {"CostBookItem", "DriverLogItem", "SettingsItem"}
    assert len(by_table["CostBookItem"]) == len(gt.scenario.refuels)
    assert len(by_table["DriverLogItem"]) == len(gt.scenario.drives)
    refuel = by_table["CostBookItem"][0]
    assert refuel.kind_hint == "refuel"
    assert refuel.fields["fuel_liters"] == gt.scenario.refuels[0].liters
    assert refuel.fields["price"] == gt.scenario.refuels[0].price
    trip = by_table["DriverLogItem"][0].fields
    assert trip["address_start"] and trip["address_end"] == gt.scenario.drives[0].end_address


def test_mercedes_android_encrypted(gt, tmp_path):
    _, (result,) = _extract(render(gt, "mercedes", "android", "logged_in", tmp_path))
    enc = [p for p in result.encrypted_artifacts if p.endswith("driverlogbookDatabase.db")]
    assert len(enc) == 1
    from_logbook = [r for r in result.records if r.artifact_path == enc[0]]
    assert [r.kind_hint for r in from_logbook] == ["encrypted_artifact"]
    assert all(r.kind_hint != "trip" for r in result.records)


def test_plaintext_mercedes_android_parses(gt, tmp_path):
    _, (result,) = _extract(render(gt, "mercedes", "android", "logged_in", tmp_path, encrypt=False))
    assert result.encrypted_artifacts == []
    assert any(r.kind_hint == "trip" for r in result.records)


def test_uninstalled_container_is_empty(gt, tmp_path):
    run = run_tree(render(gt, "weconnect_go", "ios", "uninstalled", tmp_path))
    assert run.matches == [] and run.events == []


def test_extraction_is_deterministic(gt, tmp_path):
    path = render(gt, "fordpass", "ios", "logged_in", tmp_path)
    _, a = _extract(path)
    _, b = _extract(path)
    assert [r.records for r in a] == [r.records for r in b]


def test_extraction_is_read_only(gt, tmp_path):
    path = render(gt, "weconnect_go", "android", "logged_in", tmp_path)
    with open_source(path) as src:
        entries = enumerate_files(src)
        for m in detect(entries, src.read):
            extract_artifacts(m, src)
        assert verify(src, entries).ok


def test_closed_source(gt, tmp_path):
    path = render(gt, "tesla", "android", "logged_in", tmp_path)
    src = open_source(path)
    matches = detect(enumerate_files(src), src.read)
    src.close()
    with pytest.raises(SourceClosed):
        extract_artifacts(matches[0], src)


def test_coverage_of_matching_files(gt, tmp_path):
    path = render(gt, "drivemii", "android", "logged_in", tmp_path)
    with open_source(path) as src:
        entries = enumerate_files(src)
        (m,) = detect(entries, src.read)
        result = extract_artifacts(m, src)
        prefix = m.container_root.rstrip("/") + "/"
        matching = {e.path for e in entries
                    if e.path.startswith(prefix) and not e.is_symlink and e.sha256 is not None
                    and any(s.matches(e.path[len(prefix):]) for s in m.descriptor.artifact_specs)}
    accounted = ({r.artifact_path for r in result.records} | {s.path for s in result.skipped}
                 | set(result.encrypted_artifacts))
    # sidecars are read with their database rather than as artifacts of their own
    assert {p for p in matching if not p.endswith(("-wal", "-journal"))} <= accounted


def test_unparseable_artifact_is_skipped(gt, tmp_path):
    path = render(gt, "my_bmw", "android", "logged_in", tmp_path)
    target = next(path.rglob(".hydrated_bloc.json"))
    target.write_bytes(b"{ not json")
    run = run_tree(path)
    assert any(".hydrated_bloc.json" in s.artifact_path for s in run.skips)
    assert run.events == []


@pytest.mark.parametrize("desc", registry(), ids=lambda d: f"{d.app_id}-{d.platform}")
def test_logged_in_round_trip(gt, tmp_path, desc):
    got = recovered(gt, desc.app_id, desc.platform, "logged_in", tmp_path)
    assert got == expected_recovery(gt.scenario, desc.app_id, desc.platform, "logged_in")


@pytest.mark.parametrize("state", STATES)
def test_weconnect_ios_states(gt, tmp_path, state):
    got = recovered(gt, "weconnect_go", "ios", state, tmp_path)
    assert got == gt.expected_events("weconnect_go", "ios", state)
