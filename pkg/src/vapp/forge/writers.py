"""Byte-level writers for fixture files.

These use the standard library's own encoders (sqlite3, plistlib, gzip) so
the readers under test are checked against an independent implementation.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import os
import plistlib
import sqlite3
import tempfile
from typing import Any, Iterable, Sequence
from xml.sax.saxutils import escape, quoteattr

from ..events import APPLE_EPOCH_MS


def apple_s(ms: int) -> float:
    return (ms - APPLE_EPOCH_MS) / 1000.0


def unix_s(ms: int) -> int:
    return ms // 1000


def iso(ms: int) -> str:
    from ..events import ms_to_datetime

    return ms_to_datetime(ms).strftime("%Y-%m-%dT%H:%M:%SZ")


def dt(ms: int):
    """Naive UTC datetime, the form plistlib writes as a date."""
    from ..events import ms_to_datetime

    return ms_to_datetime(ms).replace(tzinfo=None)


class Db:
    """A table-by-table description of a SQLite file."""

    def __init__(self):
        self.tables: list[tuple[str, str, list[Sequence[Any]]]] = []

    def table(self, name: str, ddl_columns: str, rows: Iterable[Sequence[Any]] = ()) -> "Db":
        self.tables.append((name, ddl_columns, list(rows)))
        return self

    def empty(self) -> "Db":
        """Same schema, no rows."""
        out = Db()
        out.tables = [(n, c, []) for n, c, _ in self.tables]
        return out


def sqlite_bytes(db: Db, page_size: int = 4096) -> bytes:
    """Serialize through the stdlib driver and return the main database file."""
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "fixture.db")
        con = sqlite3.connect(path)
        try:
            con.execute(f"PRAGMA page_size={page_size}")
            con.execute("PRAGMA journal_mode=DELETE")
            for name, columns, rows in db.tables:
                con.execute(f'CREATE TABLE "{name}" ({columns})')
                if rows:
                    marks = ",".join("?" * len(rows[0]))
                    con.executemany(f'INSERT INTO "{name}" VALUES ({marks})', rows)
            con.commit()
        finally:
            con.close()
        with open(path, "rb") as fh:
            return fh.read()


def plist_bytes(obj: Any, binary: bool = False) -> bytes:
    return plistlib.dumps(obj, fmt=plistlib.FMT_BINARY if binary else plistlib.FMT_XML, sort_keys=True)


def json_bytes(obj: Any) -> bytes:
    return json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False).encode("utf-8")


def gzip_bytes(data: bytes) -> bytes:
    # mtime pinned so output is reproducible
    return gzip.compress(data, mtime=0)


def _prefs_entry(key: str, value: Any) -> str:
    name = quoteattr(key)
    if isinstance(value, bool):
        return f"    <boolean name={name} value=\"{'true' if value else 'false'}\" />"
    if isinstance(value, int):
        kind = "int" if -(1 << 31) <= value < (1 << 31) else "long"
        return f"    <{kind} name={name} value=\"{value}\" />"
    if isinstance(value, float):
        return f"    <float name={name} value=\"{value!r}\" />"
    if isinstance(value, (set, frozenset, list, tuple)):
        items = "".join(f"\n        <string>{escape(str(v))}</string>" for v in sorted(value))
        return f"    <set name={name}>{items}\n    </set>"
    return f"    <string name={name}>{escape(str(value))}</string>"


def prefs_xml(values: dict[str, Any]) -> bytes:
    """Android SharedPreferences document."""
    if not values:
        return b"<?xml version='1.0' encoding='utf-8' standalone='yes' ?>\n<map />\n"
    body = "\n".join(_prefs_entry(k, v) for k, v in sorted(values.items()))
    return f"<?xml version='1.0' encoding='utf-8' standalone='yes' ?>\n<map>\n{body}\n</map>\n".encode("utf-8")


def tlv_bytes(strings: Iterable[str], seed: int = 0) -> bytes:
    """A MapSettings-like container: tag byte, u16 LE length, UTF-8 value.

    Tags are non-printable and interleaved with short binary records so no
    stray text runs appear.
    """
    out = bytearray(b"\x00\x02\x00\x00")
    for i, text in enumerate(strings):
        raw = text.encode("utf-8")
        out += bytes([0x01]) + len(raw).to_bytes(2, "little") + raw
        # an opaque numeric record between strings
        out += bytes([0x02, 0x04, 0x00]) + ((seed + i) & 0x7F).to_bytes(1, "little") + b"\x00\x00\x00"
    return bytes(out)


def scramble(data: bytes, key: bytes) -> bytes:
    """XOR with a SHA-256 counter-mode keystream, so the result is uniformly random-looking."""
    out = bytearray(len(data))
    for block in range(0, len(data), 32):
        pad = hashlib.sha256(key + block.to_bytes(8, "big")).digest()
        chunk = data[block:block + 32]
        out[block:block + len(chunk)] = bytes(a ^ b for a, b in zip(chunk, pad))
    return bytes(out)
