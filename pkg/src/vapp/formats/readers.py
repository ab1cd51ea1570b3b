"""Readers for the tree-shaped and ad-hoc formats the apps leave behind.

Every reader is pure over its input bytes and total: it returns a value or
raises a :class:`~vapp.errors.FormatError` subclass.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
import plistlib
import re
import struct
import xml.etree.ElementTree as ET
import zlib
from collections import Counter
from datetime import datetime, timezone
from typing import Any, NamedTuple

from ..errors import NotBase64, NotGzip, NotJson, NotPlist, NotPrefsXml, UnsupportedVersion
from .sqlite import MAGIC as SQLITE_MAGIC

ENTROPY_WINDOW = 4096
ENTROPY_THRESHOLD = 7.5
MAX_INFLATE = 64 << 20
MIN_RUN = 4
MAX_STRING = 1024
_INT64 = (-(1 << 63), (1 << 63) - 1)


class LossyReal(float):
    """A JSON integer outside the signed 64-bit range, decoded as a real."""

    precision_loss = True


class DecodedImage(NamedTuple):
    data: bytes
    format: str


def _to_tree(value: Any, active: set[int] | None = None) -> Any:
    """Normalize plist output: aware UTC datetimes, UIDs as ints, no cycles."""
    active = set() if active is None else active
    if isinstance(value, datetime):
        return value.replace(tzinfo=timezone.utc) if value.tzinfo is None else value.astimezone(timezone.utc)
    if isinstance(value, plistlib.UID):
        return value.data
    if isinstance(value, (list, tuple, dict)):
        if id(value) in active:
            raise NotPlist("cyclic object graph")
        active.add(id(value))
        try:
            if isinstance(value, dict):
                out = {}
                for key, item in value.items():
                    if not isinstance(key, str):
                        raise NotPlist("non-string dictionary key")
                    out[key] = _to_tree(item, active)
                return out
            return [_to_tree(item, active) for item in value]
        finally:
            active.discard(id(value))
    return value


def _check_bplist_trailer(data: bytes) -> None:
    if len(data) < 8 + 32 + 1:
        raise NotPlist("binary plist too short")
    offset_size, ref_size, n_objects, top, table_at = struct.unpack(">6xBBQQQ", data[-32:])
    if not (1 <= offset_size <= 8 and 1 <= ref_size <= 8):
        raise NotPlist("bad trailer sizes")
    if n_objects == 0 or top >= n_objects:
        raise NotPlist("bad object count")
    if table_at < 8 or table_at + n_objects * offset_size > len(data) - 32:
        raise NotPlist("offset table outside file")


def read_plist(data: bytes) -> Any:
    """Decode an XML or binary property list into a tree of native values."""
    if data.startswith(b"bplist"):
        if data[6:8] != b"00":
            raise UnsupportedVersion(f"binary plist version {data[6:8]!r}")
        _check_bplist_trailer(data)
        fmt = plistlib.FMT_BINARY
    else:
        head = data.lstrip(b"\xef\xbb\xbf \t\r\n")[:64]
        if not (head.startswith(b"<?xml") or head.startswith(b"<plist") or head.startswith(b"<!DOCTYPE plist")):
            raise NotPlist("not a property list")
        fmt = plistlib.FMT_XML
    try:
        value = plistlib.loads(data, fmt=fmt)
        return _to_tree(value)
    except NotPlist:
        raise
    except (Exception, RecursionError) as exc:
        raise NotPlist(f"{type(exc).__name__}: {exc}") from exc


def _parse_int(text: str):
    value = int(text)
    if _INT64[0] <= value <= _INT64[1]:
        return value
    return LossyReal(float(value))


def _reject_constant(name: str):
    raise ValueError(f"non-standard JSON constant {name}")


def read_json(data: bytes) -> Any:
    """Strict RFC 8259 JSON."""
    try:
        text = data.decode("utf-8")
        return json.loads(text, parse_int=_parse_int, parse_constant=_reject_constant)
    except (ValueError, UnicodeDecodeError, RecursionError, OverflowError) as exc:
        raise NotJson(str(exc)) from exc


def gunzip(data: bytes, limit: int = MAX_INFLATE) -> bytes:
    """Inflate all gzip members of ``data``; raises NotGzip on any fault."""
    if data[:2] != b"\x1f\x8b":
        raise NotGzip("missing gzip magic")
    out = []
    total = 0
    rest = data
    try:
        while rest[:2] == b"\x1f\x8b":
            inflater = zlib.decompressobj(wbits=31)
            chunk = inflater.decompress(rest, limit - total + 1)
            total += len(chunk)
            if total > limit or inflater.unconsumed_tail:
                raise NotGzip("inflated size exceeds limit")
            if not inflater.eof:
                raise NotGzip("truncated gzip member")
            out.append(chunk)
            rest = inflater.unused_data
    except zlib.error as exc:
        raise NotGzip(str(exc)) from exc
    return b"".join(out)


def read_gzip_json(data: bytes) -> Any:
    return read_json(gunzip(data))


def _prefs_value(elem: ET.Element) -> Any:
    tag = elem.tag
    if tag == "string":
        return elem.text or ""
    if tag == "boolean":
        value = elem.get("value", "").lower()
        if value not in ("true", "false"):
            raise NotPrefsXml(f"bad boolean {value!r}")
        return value == "true"
    if tag in ("int", "long"):
        return int(elem.get("value", ""))
    if tag == "float":
        return float(elem.get("value", ""))
    if tag == "set":
        return [child.text or "" for child in elem if child.tag == "string"]
    if tag == "null":
        return None
    raise NotPrefsXml(f"unknown preference tag <{tag}>")


def read_xml_prefs(data: bytes) -> dict[str, Any]:
    """Android shared-preferences XML to a typed map."""
    try:
        root = ET.fromstring(data)
    # expat raises LookupError for an unknown encoding in the XML declaration
    except (ET.ParseError, ValueError, LookupError, RecursionError) as exc:
        raise NotPrefsXml(str(exc)) from exc
    if root.tag != "map":
        raise NotPrefsXml(f"root element <{root.tag}> is not <map>")
    prefs: dict[str, Any] = {}
    for child in root:
        name = child.get("name")
        if name is None:
            raise NotPrefsXml(f"<{child.tag}> without name attribute")
        try:
            prefs[name] = _prefs_value(child)
        except (ValueError, OverflowError) as exc:
            raise NotPrefsXml(f"{name}: {exc}") from exc
    return prefs


def _printable(ch: str) -> bool:
    return ch.isprintable() and ch not in "�"


def _valid_text(raw: bytes) -> str | None:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        return None
    if len(text) >= MIN_RUN and all(_printable(c) for c in text):
        return text
    return None


def _utf8_run(data: bytes, i: int) -> tuple[str, int]:
    """Longest run of printable UTF-8 characters starting at ``i``."""
    chars = []
    n = len(data)
    while i < n:
        byte = data[i]
        width = 1 if byte < 0x80 else 2 if byte >> 5 == 0b110 else 3 if byte >> 4 == 0b1110 else 4 if byte >> 3 == 0b11110 else 0
        if width == 0 or i + width > n:
            break
        try:
            ch = data[i:i + width].decode("utf-8")
        except UnicodeDecodeError:
            break
        if not _printable(ch):
            break
        chars.append(ch)
        i += width
    return "".join(chars), i


def _utf16_run(data: bytes, i: int) -> tuple[str, int]:
    chars = []
    n = len(data)
    while i + 1 < n:
        ch = data[i:i + 2].decode("utf-16-le", "replace")
        if not _printable(ch) or (data[i + 1] != 0 and data[i] < 0x20):
            break
        chars.append(ch)
        i += 2
    return "".join(chars), i


def read_tlv_mapsettings(data: bytes) -> list[str]:
    """Destination strings embedded in a navigation MapSettings container.

    The container grammar is undocumented, so this is a conservative
    string-run extractor: length-prefixed UTF-8 strings (1, 2 or 4 byte
    little-endian prefixes) are taken whole, other printable UTF-8 or
    UTF-16LE runs of at least four characters are taken as found. Order of
    appearance is kept; duplicates are kept.
    """
    found: list[str] = []
    i, n = 0, len(data)
    while i < n:
        matched = False
        for width in (2, 1, 4):
            if i + width > n:
                continue
            length = int.from_bytes(data[i:i + width], "little")
            if MIN_RUN <= length <= min(n - i - width, MAX_STRING):
                text = _valid_text(data[i + width:i + width + length])
                if text is not None:
                    found.append(text)
                    i += width + length
                    matched = True
                    break
        if matched:
            continue
        if i + 1 < n and data[i + 1] == 0 and 0x20 <= data[i] < 0x7F:
            text, end = _utf16_run(data, i)
            if len(text) >= MIN_RUN:
                found.append(text)
                i = end
                continue
        text, end = _utf8_run(data, i)
        if len(text) >= MIN_RUN:
            found.append(text)
            i = end
        else:
            i = max(end, i + 1)
    return found


_B64_STD = re.compile(rb"^[A-Za-z0-9+/]*={0,2}$")
_B64_URL = re.compile(rb"^[A-Za-z0-9_-]*={0,2}$")


def sniff_image(data: bytes) -> str:
    if data[:3] == b"\xff\xd8\xff":
        return "jpeg"
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return "png"
    return "unknown"


def decode_base64_image(text: str | bytes) -> DecodedImage:
    """Decode standard or URL-safe Base64 and sniff the image type."""
    raw = text.encode("ascii", "replace") if isinstance(text, str) else bytes(text)
    raw = re.sub(rb"\s+", b"", raw)
    if raw.startswith(b"data:"):
        raw = raw.split(b",", 1)[-1]
    if not raw:
        raise NotBase64("empty input")
    raw = raw.rstrip(b"=")
    raw += b"=" * (-len(raw) % 4)
    try:
        if _B64_STD.match(raw):
            data = base64.b64decode(raw, validate=True)
        elif _B64_URL.match(raw):
            data = base64.urlsafe_b64decode(raw)
        else:
            raise NotBase64("characters outside the Base64 alphabets")
    except (binascii.Error, ValueError) as exc:
        raise NotBase64(str(exc)) from exc
    return DecodedImage(data, sniff_image(data))


def shannon_entropy(data: bytes) -> float:
    """Bits per byte of ``data``."""
    if not data:
        return 0.0
    total = len(data)
    return -sum(c / total * math.log2(c / total) for c in Counter(data).values())


def detect_encrypted_db(data: bytes) -> bool:
    """True when a database file lacks the SQLite header and looks random."""
    if not data or data.startswith(SQLITE_MAGIC):
        return False
    return shannon_entropy(data[:ENTROPY_WINDOW]) > ENTROPY_THRESHOLD


def scan_json_bodies(data: bytes, max_attempts: int = 256) -> list[tuple[str, Any]]:
    """JSON documents embedded in a cache file, gzip members inflated.

    Proprietary cache indexes are not interpreted; the file is searched for
    gzip member headers and for JSON object/array boundaries. Returns
    ``(locator, value)`` pairs.
    """
    blobs: list[tuple[str, bytes]] = [("raw", data)]
    start = 0
    attempts = 0
    while attempts < max_attempts:
        at = data.find(b"\x1f\x8b\x08", start)
        if at < 0:
            break
        attempts += 1
        try:
            inflater = zlib.decompressobj(wbits=31)
            body = inflater.decompress(data[at:], MAX_INFLATE)
            if inflater.eof:
                blobs.append((f"gzip@{at}", body))
                start = len(data) - len(inflater.unused_data)
                continue
        except zlib.error:
            pass
        start = at + 1
    found = []
    decoder = json.JSONDecoder(parse_int=_parse_int, parse_constant=_reject_constant)
    for label, blob in blobs:
        text = blob.decode("utf-8", "replace")
        pos, tries = 0, 0
        while tries < max_attempts:
            match = re.compile(r"[\{\[]").search(text, pos)
            if match is None:
                break
            tries += 1
            try:
                value, end = decoder.raw_decode(text, match.start())
            except (ValueError, RecursionError, OverflowError):
                pos = match.start() + 1
                continue
            if isinstance(value, dict) or (isinstance(value, list) and value and isinstance(value[0], dict)):
                found.append((f"{label}/json@{match.start()}", value))
            pos = end
    return found
