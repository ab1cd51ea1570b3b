import hashlib
import json
import os
import tarfile
import zipfile
from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vapp.errors import NotFound, SourceClosed, UnsupportedArchive
from vapp.evidence import (
    EMPTY_SHA256,
    CustodyLog,
    custody_log,
    custody_ndjson,
    enumerate_files,
    fixed_clock,
    normalize_path,
    open_source,
    read_custody_ndjson,
    sha256_hex,
    verify,
)

from _util import render

TESLA = "data/data/com.teslamotors.tesla"


def _tree(root, files):
    for rel, data in files.items():
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_bytes(data)
    return root


def test_empty_directory(tmp_path):
    src = open_source(tmp_path)
    assert src.kind == "directory"
    assert enumerate_files(src) == []


def test_plain_text_file_is_unsupported(tmp_path):
    p = tmp_path / "notes.txt"
    p.write_text("hello")
    with pytest.raises(UnsupportedArchive):
        open_source(p)


def test_missing_location(tmp_path):
    with pytest.raises(NotFound):
        open_source(tmp_path / "nope")


def test_declared_kind_must_agree(tmp_path):
    with pytest.raises(UnsupportedArchive):
        open_source(tmp_path, "zip_archive")


def test_empty_file_digest(tmp_path):
    (tmp_path / "empty").write_bytes(b"")
    [entry] = enumerate_files(open_source(tmp_path))
    assert entry.path == "/empty"
    assert entry.size == 0
    assert entry.sha256 == EMPTY_SHA256


def test_zip_paths_preserved(gt, tmp_path):
    tree = render(gt, "tesla", "android", "logged_in", tmp_path)
    archive = tmp_path / "extraction.bin"
    with zipfile.ZipFile(archive, "w") as zf:
        for p in sorted(tree.rglob("*")):
            if p.is_file():
                zf.write(p, p.relative_to(tree).as_posix())
    with open_source(archive) as src:
        assert src.kind == "zip_archive"
        zip_entries = enumerate_files(src)
    dir_entries = enumerate_files(open_source(tree))
    assert [(e.path, e.size, e.sha256) for e in zip_entries] == [(e.path, e.size, e.sha256) for e in dir_entries]
    assert all(e.path.startswith("/" + TESLA) for e in zip_entries)


@pytest.mark.parametrize("mode", ["w", "w:gz"])
def test_tar_archive(tmp_path, mode):
    _tree(tmp_path / "t", {f"{TESLA}/files/a.json": b"{}", "data/data/x/y": b"1"})
    archive = tmp_path / "image"
    with tarfile.open(archive, mode, format=tarfile.USTAR_FORMAT) as tf:
        tf.add(tmp_path / "t" / "data", arcname="data")
    with open_source(archive) as src:
        assert src.kind == "tar_archive"
        paths = [e.path for e in enumerate_files(src)]
    assert paths == ["/data/data/com.teslamotors.tesla/files/a.json", "/data/data/x/y"]


def test_root_prefix_strips_wrapper(tmp_path):
    _tree(tmp_path, {"dump/private/var/mobile/a.txt": b"x"})
    with open_source(tmp_path, root_prefix="/dump") as src:
        assert [e.path for e in enumerate_files(src)] == ["/private/var/mobile/a.txt"]


def test_digests_match_independent_hash(gt, tmp_path):
    tree = render(gt, "myaudi", "android", "logged_in", tmp_path)
    entries = enumerate_files(open_source(tree))
    on_disk = {"/" + p.relative_to(tree).as_posix(): p for p in tree.rglob("*") if p.is_file()}
    assert len(entries) == len(on_disk)
    for e in entries:
        assert e.sha256 == hashlib.sha256(on_disk[e.path].read_bytes()).hexdigest()


def test_identical_content_identical_entries(tmp_path):
    files = {"a/b": b"one", "a/c": b"two", "z": b""}
    a = enumerate_files(open_source(_tree(tmp_path / "a", files)))
    b = enumerate_files(open_source(_tree(tmp_path / "b", files)))
    assert [(e.path, e.size, e.sha256) for e in a] == [(e.path, e.size, e.sha256) for e in b]


@pytest.mark.skipif(os.name == "nt", reason="symlinks")
def test_symlink_recorded_not_followed(tmp_path):
    outside = tmp_path / "outside"
    outside.write_bytes(b"secret")
    root = _tree(tmp_path / "root", {"data/f": b"x"})
    (root / "data" / "link").symlink_to(outside)
    entries = {e.path: e for e in enumerate_files(open_source(root))}
    assert entries["/data/link"].is_symlink
    assert entries["/data/link"].sha256 is None


def test_verify_flags_flip_and_deletion(tmp_path):
    root = _tree(tmp_path, {"a": b"alpha", "b": b"beta", "c": b"gamma"})
    src = open_source(root)
    entries = enumerate_files(src)
    assert verify(src, entries).all_ok
    data = bytearray((root / "b").read_bytes())
    data[2] ^= 0x01
    (root / "b").write_bytes(bytes(data))
    (root / "c").unlink()
    report = verify(src, entries)
    assert report.changed == ("/b",)
    assert report.missing == ("/c",)
    assert report.ok == ("/a",)
    assert report.status("/b") == "changed"


def test_custody_session(tmp_path):
    root = _tree(tmp_path, {"a": b"1", "b": b"2"})
    src = open_source(root)
    assert custody_log(src) == []
    entries = enumerate_files(src)
    src.read("/a")
    src.record_parsed("/a")
    log = custody_log(src)
    assert [r.action for r in log] == ["inventoried", "inventoried", "parsed"]
    inventoried = {r.file_path: r.sha256 for r in log if r.action == "inventoried"}
    assert inventoried == {e.path: e.sha256 for e in entries}
    assert log[-1].sha256 == inventoried["/a"]
    assert all(a.at <= b.at for a, b in zip(log, log[1:]))


def test_custody_clock_never_goes_backwards():
    times = iter([datetime(2024, 1, 2, tzinfo=timezone.utc), datetime(2024, 1, 1, tzinfo=timezone.utc)])
    log = CustodyLog(lambda: next(times))
    log.append("s", "/a", EMPTY_SHA256, "inventoried", "t")
    second = log.append("s", "/b", EMPTY_SHA256, "inventoried", "t")
    assert second.at == datetime(2024, 1, 2, tzinfo=timezone.utc)


def test_custody_ndjson_round_trip(tmp_path):
    src = open_source(_tree(tmp_path, {"a": b"1"}), clock=fixed_clock("2024-05-01T10:00:00Z"))
    enumerate_files(src)
    text = custody_ndjson(custody_log(src))
    line = json.loads(text.splitlines()[0])
    assert set(line) == {"source_id", "file_path", "sha256", "action", "actor", "at"}
    assert line["at"] == "2024-05-01T10:00:00.000Z"
    assert read_custody_ndjson(text) == custody_log(src)


def test_unknown_custody_action_rejected():
    with pytest.raises(ValueError):
        CustodyLog().append("s", "/a", EMPTY_SHA256, "deleted", "t")


def test_read_rejects_content_changed_after_inventory(tmp_path):
    root = _tree(tmp_path, {"a": b"1"})
    src = open_source(root)
    enumerate_files(src)
    (root / "a").write_bytes(b"2")
    with pytest.raises(Exception, match="no longer matches"):
        src.read("/a")


def test_closed_source(tmp_path):
    src = open_source(_tree(tmp_path, {"a": b"1"}))
    enumerate_files(src)
    src.close()
    with pytest.raises(SourceClosed):
        src.read("/a")


_segment = st.text(alphabet="abcXYZ01._-", min_size=1, max_size=6)


@given(st.lists(st.one_of(_segment, st.sampled_from([".", "..", ""])), max_size=8))
def test_normalize_path_idempotent(parts):
    once = normalize_path("/".join(parts))
    assert normalize_path(once) == once
    assert once.startswith("/")
    assert ".." not in once.split("/")


@given(st.binary(max_size=2048))
def test_sha256_matches_hashlib(data):
    assert sha256_hex(data) == hashlib.sha256(data).hexdigest()


@given(st.dictionaries(st.from_regex(r"[a-z]{1,5}(/[a-z]{1,5}){0,2}", fullmatch=True), st.binary(max_size=64),
                       max_size=6))
def test_verify_after_enumerate_is_clean(files):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        written = {}
        for rel, data in files.items():
            p = root / rel
            if any(q.is_file() for q in [p, *p.parents] if q != root) or p.is_dir():
                continue
            p.parent.mkdir(parents=True, exist_ok=True)
            p.write_bytes(data)
            written[rel] = data
        src = open_source(root)
        entries = enumerate_files(src)
        assert verify(src, entries).all_ok
        assert [e.path for e in entries] == sorted(e.path for e in entries)
