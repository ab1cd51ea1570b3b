"""Read-only decoder for the SQLite 3 single-file database format.

Works purely on bytes: no engine, no temporary files. Table b-trees are
walked from the schema table on page 1, overflow chains are followed, and
the freelist is traversed for accounting. A write-ahead log or a hot
rollback journal supplied alongside is applied to the page image first.
Deleted-record recovery is not attempted.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

from ..errors import Corrupt, NotSqlite

MAGIC = b"SQLite format 3\x00"
WAL_MAGICS = (0x377F0682, 0x377F0683)
JOURNAL_MAGIC = bytes.fromhex("d9d505f920a163d7")

_LEAF_TABLE, _INTERIOR_TABLE, _LEAF_INDEX, _INTERIOR_INDEX = 13, 5, 10, 2


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def dicts(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]


@dataclass
class TableSet:
    tables: dict[str, Table] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)
    unsupported: list[str] = field(default_factory=list)
    freelist_pages: int = 0

    def __contains__(self, name: str) -> bool:
        return name in self.tables

    def get(self, name: str, default=None):
        """Case-insensitive table lookup."""
        if name in self.tables:
            return self.tables[name]
        lowered = name.lower()
        for key, table in self.tables.items():
            if key.lower() == lowered:
                return table
        return default


def _varint(buf: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for i in range(8):
        if pos + i >= len(buf):
            raise Corrupt("varint runs past end of page")
        byte = buf[pos + i]
        value = (value << 7) | (byte & 0x7F)
        if byte < 0x80:
            return value, pos + i + 1
    if pos + 8 >= len(buf):
        raise Corrupt("varint runs past end of page")
    value = (value << 8) | buf[pos + 8]
    return value, pos + 9


class _Pager:
    def __init__(self, pages: dict[int, bytes], page_size: int, reserved: int, n_pages: int):
        self.pages = pages
        self.page_size = page_size
        self.usable = page_size - reserved
        self.n_pages = n_pages

    def page(self, number: int) -> bytes:
        if not 1 <= number <= self.n_pages or number not in self.pages:
            raise Corrupt(f"page {number} out of range")
        return self.pages[number]


def _split_pages(data: bytes, page_size: int) -> dict[int, bytes]:
    pages = {}
    for i in range(len(data) // page_size):
        pages[i + 1] = data[i * page_size:(i + 1) * page_size]
    return pages


def _wal_checksum(data: bytes, s0: int, s1: int, big_endian: bool) -> tuple[int, int]:
    fmt = ">" if big_endian else "<"
    words = struct.unpack(f"{fmt}{len(data) // 4}I", data[: len(data) // 4 * 4])
    for i in range(0, len(words) - 1, 2):
        s0 = (s0 + words[i] + s1) & 0xFFFFFFFF
        s1 = (s1 + words[i + 1] + s0) & 0xFFFFFFFF
    return s0, s1


def _apply_wal(pages: dict[int, bytes], wal: bytes, page_size: int) -> tuple[dict[int, bytes], int | None]:
    """Overlay committed WAL frames; returns pages and the committed db size."""
    if len(wal) < 32:
        return pages, None
    magic, _version, wal_page_size, _seq, salt1, salt2, ck1, ck2 = struct.unpack(">8I", wal[:32])
    if magic not in WAL_MAGICS or wal_page_size != page_size:
        return pages, None
    big_endian = magic == 0x377F0683
    s0, s1 = _wal_checksum(wal[:24], 0, 0, big_endian)
    if (s0, s1) != (ck1, ck2):
        return pages, None
    frame_size = 24 + page_size
    pending: dict[int, bytes] = {}
    committed = dict(pages)
    db_size = None
    pos = 32
    while pos + frame_size <= len(wal):
        header = wal[pos:pos + 24]
        pgno, commit_size, f_salt1, f_salt2, f_ck1, f_ck2 = struct.unpack(">6I", header)
        body = wal[pos + 24:pos + frame_size]
        if (f_salt1, f_salt2) != (salt1, salt2):
            break
        s0, s1 = _wal_checksum(header[:8], s0, s1, big_endian)
        s0, s1 = _wal_checksum(body, s0, s1, big_endian)
        if (s0, s1) != (f_ck1, f_ck2):
            break
        pending[pgno] = body
        if commit_size:
            committed.update(pending)
            pending = {}
            db_size = commit_size
        pos += frame_size
    return committed, db_size


def _apply_journal(pages: dict[int, bytes], journal: bytes, page_size: int) -> tuple[dict[int, bytes], int | None]:
    """Roll back pages recorded in a hot rollback journal."""
    if len(journal) < 28 or journal[:8] != JOURNAL_MAGIC:
        return pages, None
    n_rec, nonce, orig_pages, sector, j_page_size = struct.unpack(">5I", journal[8:28])
    if j_page_size != page_size or sector < 28 or sector > 65536:
        return pages, None
    record_size = 4 + page_size + 4
    if n_rec in (0, 0xFFFFFFFF):
        n_rec = max(0, (len(journal) - sector) // record_size)
    restored = dict(pages)
    pos = sector
    for _ in range(n_rec):
        if pos + record_size > len(journal):
            break
        pgno = struct.unpack(">I", journal[pos:pos + 4])[0]
        body = journal[pos + 4:pos + 4 + page_size]
        (stored,) = struct.unpack(">I", journal[pos + 4 + page_size:pos + record_size])
        checksum = nonce
        i = page_size - 200
        while i > 0:
            checksum = (checksum + body[i]) & 0xFFFFFFFF
            i -= 200
        if checksum != stored:
            break
        restored[pgno] = body
        pos += record_size
    return restored, orig_pages or None


def _payload(pager: _Pager, page: bytes, pos: int, size: int, is_table: bool, seen: set[int]) -> bytes:
    usable = pager.usable
    max_local = usable - 35 if is_table else ((usable - 12) * 64 // 255) - 23
    if size <= max_local:
        if pos + size > len(page):
            raise Corrupt("cell payload exceeds page")
        return page[pos:pos + size]
    min_local = ((usable - 12) * 32 // 255) - 23
    local = min_local + (size - min_local) % (usable - 4)
    if local > max_local:
        local = min_local
    if pos + local + 4 > len(page):
        raise Corrupt("cell payload exceeds page")
    chunks = [page[pos:pos + local]]
    remaining = size - local
    (next_page,) = struct.unpack(">I", page[pos + local:pos + local + 4])
    while remaining > 0:
        if next_page in seen or next_page == 0:
            raise Corrupt("broken overflow chain")
        seen.add(next_page)
        overflow = pager.page(next_page)
        take = min(remaining, usable - 4)
        chunks.append(overflow[4:4 + take])
        remaining -= take
        (next_page,) = struct.unpack(">I", overflow[:4])
    return b"".join(chunks)


def _decode_record(payload: bytes, encoding: str) -> list:
    header_size, pos = _varint(payload, 0)
    if header_size > len(payload) or header_size < pos:
        raise Corrupt("record header exceeds payload")
    types = []
    while pos < header_size:
        serial, pos = _varint(payload, pos)
        types.append(serial)
    values = []
    body = header_size
    for serial in types:
        if serial == 0:
            values.append(None)
            continue
        if serial in (8, 9):
            values.append(serial - 8)
            continue
        if 1 <= serial <= 6:
            width = (1, 2, 3, 4, 6, 8)[serial - 1]
            raw = payload[body:body + width]
            if len(raw) != width:
                raise Corrupt("integer field truncated")
            values.append(int.from_bytes(raw, "big", signed=True))
            body += width
        elif serial == 7:
            raw = payload[body:body + 8]
            if len(raw) != 8:
                raise Corrupt("real field truncated")
            values.append(struct.unpack(">d", raw)[0])
            body += 8
        elif serial >= 12:
            length = (serial - 12) // 2 if serial % 2 == 0 else (serial - 13) // 2
            raw = payload[body:body + length]
            if len(raw) != length:
                raise Corrupt("blob/text field truncated")
            values.append(raw if serial % 2 == 0 else raw.decode(encoding, "replace"))
            body += length
        else:
            raise Corrupt(f"reserved serial type {serial}")
    return values


def _walk_table(pager: _Pager, root: int, encoding: str) -> list[tuple[int, list]]:
    """All (rowid, values) of a table b-tree, in key order."""
    rows: list[tuple[int, list]] = []
    seen_pages: set[int] = set()
    overflow_seen: set[int] = set()
    stack = [root]
    order: list[int] = []
    # iterative in-order traversal: interior pages push children right-to-left
    while stack:
        number = stack.pop()
        if number in seen_pages:
            raise Corrupt(f"b-tree cycle at page {number}")
        seen_pages.add(number)
        page = pager.page(number)
        offset = 100 if number == 1 else 0
        if offset + 8 > len(page):
            raise Corrupt("page too small")
        kind = page[offset]
        n_cells = struct.unpack(">H", page[offset + 3:offset + 5])[0]
        header = 12 if kind in (_INTERIOR_TABLE, _INTERIOR_INDEX) else 8
        pointers_at = offset + header
        if pointers_at + 2 * n_cells > len(page):
            raise Corrupt("cell pointer array exceeds page")
        pointers = struct.unpack(f">{n_cells}H", page[pointers_at:pointers_at + 2 * n_cells])
        if kind == _INTERIOR_TABLE:
            children = []
            for ptr in pointers:
                if ptr + 4 > len(page):
                    raise Corrupt("cell pointer out of page")
                children.append(struct.unpack(">I", page[ptr:ptr + 4])[0])
            children.append(struct.unpack(">I", page[offset + 8:offset + 12])[0])
            stack.extend(reversed(children))
        elif kind == _LEAF_TABLE:
            order.append(number)
            for ptr in pointers:
                if ptr >= len(page):
                    raise Corrupt("cell pointer out of page")
                size, pos = _varint(page, ptr)
                rowid, pos = _varint(page, pos)
                if rowid >= 1 << 63:
                    rowid -= 1 << 64
                payload = _payload(pager, page, pos, size, True, overflow_seen)
                rows.append((rowid, _decode_record(payload, encoding)))
        else:
            raise Corrupt(f"unexpected page type {kind} in table b-tree")
    return rows


_CONSTRAINT_WORDS = {"CONSTRAINT", "PRIMARY", "UNIQUE", "CHECK", "FOREIGN"}


def _split_top_level(text: str) -> list[str]:
    parts, depth, current, quote = [], 0, [], None
    for ch in text:
        if quote:
            current.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in "\"'`[":
            quote = "]" if ch == "[" else ch
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
            continue
        current.append(ch)
    parts.append("".join(current))
    return [p.strip() for p in parts if p.strip()]


_IDENT = re.compile(r'\s*("(?:[^"]|"")*"|`[^`]*`|\[[^\]]*\]|[^\s(]+)\s*(.*)', re.S)


def _unquote(name: str) -> str:
    if len(name) >= 2 and name[0] in "\"`[":
        inner = name[1:-1]
        return inner.replace('""', '"') if name[0] == '"' else inner
    return name


def parse_create_table(sql: str) -> tuple[list[str], int | None, bool]:
    """Column names, index of an INTEGER PRIMARY KEY alias, WITHOUT ROWID flag."""
    start, end = sql.find("("), sql.rfind(")")
    if start < 0 or end <= start:
        raise Corrupt("unparseable CREATE TABLE")
    without_rowid = bool(re.search(r"WITHOUT\s+ROWID\s*;?\s*$", sql[end + 1:], re.I))
    columns, alias = [], None
    for definition in _split_top_level(sql[start + 1:end]):
        first = definition.split(None, 1)[0].upper() if definition.split() else ""
        if first in _CONSTRAINT_WORDS:
            continue
        match = _IDENT.match(definition)
        if not match:
            continue
        name, rest = _unquote(match.group(1)), match.group(2)
        tokens = rest.upper().split()
        if tokens[:1] == ["INTEGER"] and re.search(r"PRIMARY\s+KEY", rest, re.I) and not re.search(r"PRIMARY\s+KEY\s+DESC", rest, re.I):
            alias = len(columns)
        columns.append(name)
    return columns, alias, without_rowid


def read_sqlite(data: bytes, wal: bytes | None = None, journal: bytes | None = None) -> TableSet:
    """Decode every user table of a SQLite 3 database image.

    Raises :class:`NotSqlite` on a magic mismatch. Structural faults raise
    :class:`Corrupt` carrying the tables decoded so far in ``partial``.
    """
    if len(data) < 100 or data[:16] != MAGIC:
        raise NotSqlite("missing SQLite 3 header")
    page_size = struct.unpack(">H", data[16:18])[0]
    if page_size == 1:
        page_size = 65536
    if page_size < 512 or page_size & (page_size - 1):
        raise Corrupt("invalid page size", TableSet())
    reserved = data[20]
    if page_size - reserved < 480:
        raise Corrupt("invalid reserved space", TableSet())
    enc_code = struct.unpack(">I", data[56:60])[0]
    encoding = {2: "utf-16-le", 3: "utf-16-be"}.get(enc_code, "utf-8")

    pages = _split_pages(data, page_size)
    n_pages = len(pages)
    if wal:
        pages, size = _apply_wal(pages, wal, page_size)
        n_pages = max(n_pages, max(pages, default=0)) if size is None else size
    elif journal:
        pages, size = _apply_journal(pages, journal, page_size)
        if size:
            n_pages = size
    if 1 not in pages:
        raise Corrupt("database shorter than one page", TableSet())
    pager = _Pager(pages, page_size, reserved, n_pages)
    result = TableSet()

    try:
        schema_rows = _walk_table(pager, 1, encoding)
    except Corrupt as exc:
        raise Corrupt(f"schema table: {exc}", result) from exc

    page1 = pager.page(1)
    trunk = struct.unpack(">I", page1[32:36])[0]
    seen: set[int] = set()
    while trunk and trunk not in seen and 1 <= trunk <= n_pages and trunk in pages:
        seen.add(trunk)
        body = pages[trunk]
        leaves = struct.unpack(">I", body[4:8])[0]
        result.freelist_pages += 1 + min(leaves, (pager.usable - 8) // 4)
        trunk = struct.unpack(">I", body[:4])[0]

    for _rowid, values in schema_rows:
        if len(values) < 5:
            result.errors.append("short schema row")
            continue
        kind, name, _tbl, root, sql = values[:5]
        if kind != "table" or not isinstance(name, str) or name.startswith("sqlite_"):
            continue
        if not isinstance(sql, str) or not isinstance(root, int):
            result.errors.append(f"{name}: malformed schema entry")
            continue
        try:
            columns, alias, without_rowid = parse_create_table(sql)
        except Corrupt as exc:
            result.errors.append(f"{name}: {exc}")
            continue
        table = Table(columns)
        result.tables[name] = table
        if without_rowid:
            result.unsupported.append(name)
            continue
        if root == 0:
            continue
        try:
            for rowid, row in _walk_table(pager, root, encoding):
                row = (row + [None] * len(columns))[:len(columns)] if len(row) != len(columns) else row
                if alias is not None and row[alias] is None:
                    row[alias] = rowid
                table.rows.append(row)
        except Corrupt as exc:
            result.errors.append(f"{name}: {exc}")
    if result.errors:
        raise Corrupt("; ".join(result.errors), result)
    return result
