import base64
import gzip
import math
import os
import shutil
import sqlite3
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vapp.errors import Corrupt, NotBase64, NotGzip, NotJson, NotPlist, NotPrefsXml, NotSqlite, UnsupportedVersion
from vapp.formats import (
    LossyReal,
    decode_base64_image,
    detect_encrypted_db,
    read_gzip_json,
    read_json,
    read_plist,
    read_sqlite,
    read_tlv_mapsettings,
    read_xml_prefs,
    scan_json_bodies,
    shannon_entropy,
)
from vapp.forge.writers import Db, gzip_bytes, plist_bytes, prefs_xml, scramble, sqlite_bytes, tlv_bytes

# --- sqlite ----------------------------------------------------------------


def test_not_sqlite():
    with pytest.raises(NotSqlite):
        read_sqlite(b"SQLite format 2\x00" + b"\x00" * 100)


def test_empty_database(tmp_path):
    path = tmp_path / "empty.db"
    con = sqlite3.connect(path)
    con.execute("PRAGMA user_version = 1")
    con.commit()
    con.close()
    assert read_sqlite(path.read_bytes()).tables == {}


def test_avacar_trips_round_trip():
    rows = [(1, 1604300000000, "Hafenweg 3, 48155 Münster", 51.95, 7.61, 12.5),
            (2, 1604310000000, "Kanalstraße 1", 51.96, 7.62, None),
            (3, 1604320000000, "", -0.0, 0.0, 3.25)]
    data = sqlite_bytes(Db().table("trips", "id INTEGER PRIMARY KEY, ts INTEGER, address TEXT, lat REAL, "
                                            "lon REAL, km REAL", rows))
    t = read_sqlite(data).tables["trips"]
    assert t.columns == ["id", "ts", "address", "lat", "lon", "km"]
    assert [tuple(r) for r in t.rows] == rows


def test_overflow_pages_and_blobs():
    big = "x" * 20_000
    blob = bytes(range(256)) * 40
    data = sqlite_bytes(Db().table("t", "a TEXT, b BLOB", [(big, blob), ("small", b"")]))
    t = read_sqlite(data).tables["t"]
    assert t.rows[0] == [big, blob]
    assert t.rows[1] == ["small", b""]


def test_many_rows_multilevel_btree():
    rows = [(i, f"row {i}" * 5) for i in range(3000)]
    data = sqlite_bytes(Db().table("t", "a INTEGER, b TEXT", rows))
    assert [tuple(r) for r in read_sqlite(data).tables["t"].rows] == rows


def test_wal_sidecar_merged(tmp_path):
    path = tmp_path / "w.db"
    con = sqlite3.connect(path)
    con.execute("PRAGMA journal_mode=WAL")
    con.execute("PRAGMA wal_autocheckpoint=0")
    con.execute("CREATE TABLE t (a INTEGER)")
    con.commit()
    con.execute("INSERT INTO t VALUES (1)")
    con.execute("INSERT INTO t VALUES (2)")
    con.commit()
    shutil.copy(path, tmp_path / "copy.db")
    wal = (tmp_path / "w.db-wal").read_bytes()
    main = (tmp_path / "copy.db").read_bytes()
    con.close()
    assert wal
    merged = read_sqlite(main, wal=wal)
    assert [r[0] for r in merged.tables["t"].rows] == [1, 2]


def test_truncated_database_reports_corrupt():
    data = sqlite_bytes(Db().table("t", "a TEXT", [("v" * 100,)] * 200))
    try:
        ts = read_sqlite(data[: len(data) // 2])
    except Corrupt:
        return
    assert ts.errors


_cell = st.one_of(
    st.none(),
    st.integers(min_value=-(2 ** 63), max_value=2 ** 63 - 1),
    st.floats(allow_nan=False),
    st.text(max_size=300),
    st.binary(max_size=300),
)


@settings(max_examples=60)
@given(st.lists(st.tuples(_cell, _cell, _cell), max_size=40))
def test_sqlite_round_trip_against_stdlib_writer(rows):
    data = sqlite_bytes(Db().table("t", "a, b, c", rows))
    got = read_sqlite(data).tables["t"].rows
    assert len(got) == len(rows)
    for g, r in zip(got, rows):
        for x, y in zip(g, r):
            if isinstance(y, float):
                assert x == y or (x == 0 and y == 0)
            else:
                assert x == y


# --- encryption --------------------------------------------------------------


def test_encryption_detection():
    plain = sqlite_bytes(Db().table("t", "a TEXT", [("hello " * 50,)] * 50))
    assert not detect_encrypted_db(plain)
    scrambled = scramble(plain, b"key")
    assert shannon_entropy(scrambled[:4096]) > 7.5
    assert detect_encrypted_db(scrambled)
    assert not detect_encrypted_db(b"")
    assert not detect_encrypted_db(b"\x00" * 8192)


@given(st.binary(min_size=1, max_size=4096))
def test_valid_header_never_encrypted(tail):
    assert not detect_encrypted_db(b"SQLite format 3\x00" + tail)


# --- plist ---------------------------------------------------------------------


def test_xml_plist_single_key():
    assert read_plist(plist_bytes({"k": "v"})) == {"k": "v"}


def test_binary_equals_xml():
    obj = {"a": [1, 2.5, "x", {"d": datetime(2020, 11, 3, 14, 0)}], "b": {"c": True, "e": b"\x00\x01"}}
    xml = read_plist(plist_bytes(obj))
    binary = read_plist(plist_bytes(obj, binary=True))
    assert xml == binary
    assert xml["a"][3]["d"] == datetime(2020, 11, 3, 14, 0, tzinfo=timezone.utc)


def test_truncated_binary_plist():
    data = plist_bytes({"a": [1, 2, 3]}, binary=True)
    with pytest.raises(NotPlist):
        read_plist(data[:-10])


def test_plist_errors():
    with pytest.raises(NotPlist):
        read_plist(b"hello")
    with pytest.raises(UnsupportedVersion):
        read_plist(b"bplist15" + b"\x00" * 40)


# --- json / gzip --------------------------------------------------------------


def test_json_basics():
    assert read_json(b"{}") == {}
    assert read_json(b'{"vehicleList": [{"model": "A4 Avant"}]}')["vehicleList"][0]["model"] == "A4 Avant"
    with pytest.raises(NotJson):
        read_json(b"{} trailing")
    with pytest.raises(NotJson):
        read_json(b"NaN")


def test_json_big_integer_is_lossy_real():
    value = read_json(b"123456789012345678901234567890")
    assert isinstance(value, LossyReal) and value.precision_loss
    assert read_json(b"9223372036854775807") == 2 ** 63 - 1


def test_gzip_json():
    assert read_gzip_json(gzip_bytes(b"{}")) == {}
    assert read_gzip_json(gzip.compress(b'{"vin": "W0L000051T2123456"}'))["vin"] == "W0L000051T2123456"
    with pytest.raises(NotGzip):
        read_gzip_json(b"{}")
    with pytest.raises(NotJson):
        read_gzip_json(gzip.compress(b"not json"))


def test_scan_json_bodies_in_cache_blob():
    body = gzip.compress(b'{"a": 1}')
    blob = b"HTTP/1.1 200\r\nheader: x\r\n\r\n" + body + b"\x00\x01garbage{\"b\": [2]}tail"
    values = [v for _, v in scan_json_bodies(blob)]
    assert {"a": 1} in values and {"b": [2]} in values


# --- prefs xml -------------------------------------------------------------------


def test_prefs():
    assert read_xml_prefs(b"<map/>") == {}
    assert read_xml_prefs(prefs_xml({})) == {}
    values = {"vin": "W0L000051T2123456", "flag": True, "n": 7, "big": 1 << 40, "f": 1.5, "s": {"b", "a"}}
    got = read_xml_prefs(prefs_xml(values))
    assert got["vin"] == "W0L000051T2123456"
    assert got["flag"] is True and got["n"] == 7 and got["big"] == 1 << 40 and got["f"] == 1.5
    assert sorted(got["s"]) == ["a", "b"]


def test_non_prefs_xml():
    with pytest.raises(NotPrefsXml):
        read_xml_prefs(b"<html><body/></html>")
    with pytest.raises(NotPrefsXml):
        read_xml_prefs(b"\xff\xfe")


@given(st.dictionaries(st.text(min_size=1, max_size=10).filter(lambda s: s.isprintable()),
                       st.one_of(st.booleans(), st.integers(-(2 ** 63), 2 ** 63 - 1),
                                 st.text(max_size=20).filter(lambda s: s.isprintable() and s.strip() == s)),
                       max_size=8))
def test_prefs_round_trip(values):
    assert read_xml_prefs(prefs_xml(values)) == values


# --- tlv -----------------------------------------------------------------------


def test_tlv_strings_in_order():
    assert read_tlv_mapsettings(tlv_bytes(["Münster", "Hafenweg"])) == ["Münster", "Hafenweg"]
    assert read_tlv_mapsettings(tlv_bytes(["Hafenweg 3", "Hafenweg 3"])) == ["Hafenweg 3", "Hafenweg 3"]


def test_tlv_without_text():
    assert read_tlv_mapsettings(bytes(range(0, 32)) * 4) == []
    assert read_tlv_mapsettings(b"") == []


def test_tlv_utf16_run():
    data = b"\x00\x00" + "Ludgeristraße".encode("utf-16-le") + b"\x00\x00"
    assert read_tlv_mapsettings(data) == ["Ludgeristraße"]


@given(st.lists(st.text(alphabet=st.characters(min_codepoint=0x20, max_codepoint=0x24F,
                                               blacklist_categories=("Cs", "Cc")).filter(str.isprintable), min_size=4, max_size=40)
                .filter(lambda s: s.strip() == s and len(s) >= 4), max_size=6))
def test_tlv_round_trip(strings):
    assert read_tlv_mapsettings(tlv_bytes(strings)) == strings


# --- base64 images ------------------------------------------------------------------


def test_base64_images():
    jpeg = decode_base64_image(base64.b64encode(b"\xff\xd8\xff\xe0rest").decode())
    assert jpeg.format == "jpeg"
    png = decode_base64_image(base64.b64encode(b"\x89PNG\r\n\x1a\n....").decode())
    assert png.format == "png"
    urlsafe = decode_base64_image(base64.urlsafe_b64encode(b"\xff\xd8\xff\xfe\xff\xff").decode())
    assert urlsafe.data == b"\xff\xd8\xff\xfe\xff\xff"
    with pytest.raises(NotBase64):
        decode_base64_image("not base64!!")


@given(st.binary(max_size=200))
def test_base64_round_trip(data):
    if data:
        assert decode_base64_image(base64.b64encode(data)).data == data


def test_entropy_bounds():
    assert shannon_entropy(b"") == 0.0
    assert shannon_entropy(b"aaaa") == 0.0
    assert math.isclose(shannon_entropy(bytes(range(256))), 8.0)
    assert shannon_entropy(os.urandom(4096)) > 7.9


def test_prefs_unknown_declared_encoding():
    with pytest.raises(NotPrefsXml):
        read_xml_prefs(b'<?xml version="1.0" encoding="upf-8"?><map/>')
