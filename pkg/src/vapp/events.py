"""Canonical driver-activity events and the normalization from raw records."""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta, timezone
from typing import Any, Iterable, NamedTuple

from . import __version__
from .errors import ImplausibleYear, Unparseable
from .registry import EVENT_KINDS

EPOCHS = ("unix_s", "unix_ms", "apple_s", "iso8601")
APPLE_EPOCH_MS = 978_307_200_000
TIME_CONFIDENCES = ("exact", "inferred", "undated")
MIN_YEAR, MAX_YEAR = 2000, 2100
_MIN_MS = int(datetime(MIN_YEAR, 1, 1, tzinfo=timezone.utc).timestamp() * 1000)
_MAX_MS = int(datetime(MAX_YEAR + 1, 1, 1, tzinfo=timezone.utc).timestamp() * 1000) - 1
_EPOCH_0 = datetime(1970, 1, 1, tzinfo=timezone.utc)

VIN_ALPHABET = re.compile(r"[A-HJ-NPR-Z0-9]{17}")
_VIN_VALUES = {**{str(d): d for d in range(10)}, **dict(zip("ABCDEFGH", range(1, 9))),
               **dict(zip("JKLMN", range(1, 6))), "P": 7, "R": 9, **dict(zip("STUVWXYZ", range(2, 10)))}
_VIN_WEIGHTS = (8, 7, 6, 5, 4, 3, 2, 10, 0, 9, 8, 7, 6, 5, 4, 3, 2)

REQUIRES_START = ("trip", "refuel")
IDENTITY_FIELDS = ("name", "email", "phone", "date_of_birth", "address", "user_id")

# raw field suffix -> (canonical suffix, converter)
_MI = 1.609344
UNIT_SUFFIXES = (
    ("_mph", "_kmh", lambda v: v * _MI),
    ("_mps", "_kmh", lambda v: v * 3.6),
    ("_mi", "_km", lambda v: v * _MI),
    ("_ml", "_liters", lambda v: v / 1000.0),
    ("_wh", "_kwh", lambda v: v / 1000.0),
    ("_f", "_c", lambda v: (v - 32.0) * 5.0 / 9.0),
    ("_m", "_km", lambda v: v / 1000.0),
)
_RESERVED = {"start", "end", "lat", "lon", "lat_end", "lon_end", "accuracy_m", "vin"}


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    accuracy_m: float | None = None

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise ValueError(f"coordinates out of range: {self.lat}, {self.lon}")

    @property
    def suspect(self) -> bool:
        return self.lat == 0.0 and self.lon == 0.0

    def to_json(self) -> dict:
        out = {"lat": self.lat, "lon": self.lon}
        if self.accuracy_m is not None:
            out["accuracy_m"] = self.accuracy_m
        return out

    @classmethod
    def from_json(cls, obj: dict | None) -> "GeoPoint | None":
        if obj is None:
            return None
        return cls(obj["lat"], obj["lon"], obj.get("accuracy_m"))


def haversine_m(a: GeoPoint | tuple, b: GeoPoint | tuple) -> float:
    lat1, lon1 = (a.lat, a.lon) if isinstance(a, GeoPoint) else a
    lat2, lon2 = (b.lat, b.lon) if isinstance(b, GeoPoint) else b
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp, dl = p2 - p1, math.radians(lon2 - lon1)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * 6_371_008.8 * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class Provenance:
    source_id: str
    artifact_path: str
    sha256: str
    locator: str
    extractor_version: str
    app_id: str = ""
    platform: str = ""

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id,
            "artifact_path": self.artifact_path,
            "sha256": self.sha256,
            "locator": self.locator,
            "extractor_version": self.extractor_version,
            "app_id": self.app_id,
            "platform": self.platform,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Provenance":
        return cls(**{k: obj.get(k, "") for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class CanonicalEvent:
    event_id: str
    kind: str
    start: int | None
    end: int | None = None
    geo_start: GeoPoint | None = None
    geo_end: GeoPoint | None = None
    vin: str | None = None
    attributes: dict[str, Any] = field(default_factory=dict)
    provenance: tuple[Provenance, ...] = ()
    time_confidence: str = "exact"

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.start is not None and self.end is not None and self.end < self.start:
            raise ValueError("event ends before it starts")
        if self.kind in REQUIRES_START and self.start is None:
            raise ValueError(f"{self.kind} requires a start time")
        if self.vin is not None and not validate_vin(self.vin).valid:
            raise ValueError(f"invalid VIN {self.vin!r}")
        if not self.provenance:
            raise ValueError("event without provenance")

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(self.attributes.get("categories", ()))

    @property
    def dated(self) -> bool:
        return self.start is not None

    def with_provenance(self, extra: Iterable[Provenance]) -> "CanonicalEvent":
        merged = sorted(set(self.provenance) | set(extra), key=_prov_key)
        return replace(self, provenance=tuple(merged))

    def to_json(self) -> dict:
        return {
            "event_id": self.event_id,
            "kind": self.kind,
            "start": self.start,
            "end": self.end,
            "geo_start": self.geo_start.to_json() if self.geo_start else None,
            "geo_end": self.geo_end.to_json() if self.geo_end else None,
            "vin": self.vin,
            "attributes": self.attributes,
            "provenance": [p.to_json() for p in self.provenance],
            "time_confidence": self.time_confidence,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CanonicalEvent":
        return cls(
            event_id=obj["event_id"],
            kind=obj["kind"],
            start=obj.get("start"),
            end=obj.get("end"),
            geo_start=GeoPoint.from_json(obj.get("geo_start")),
            geo_end=GeoPoint.from_json(obj.get("geo_end")),
            vin=obj.get("vin"),
            attributes=dict(obj.get("attributes", {})),
            provenance=tuple(Provenance.from_json(p) for p in obj.get("provenance", ())),
            time_confidence=obj.get("time_confidence", "exact"),
        )


def _prov_key(p: Provenance):
    return (p.source_id, p.artifact_path, p.locator, p.sha256)


@dataclass(frozen=True)
class IdentityRecord:
    name: str | None = None
    email: str | None = None
    phone: str | None = None
    date_of_birth: str | None = None
    address: str | None = None
    user_id: str | None = None
    provenance: tuple[Provenance, ...] = ()

    def __post_init__(self):
        if all(getattr(self, f) in (None, "") for f in IDENTITY_FIELDS):
            raise ValueError("identity record without any field")

    def to_json(self) -> dict:
        return {f: getattr(self, f) for f in IDENTITY_FIELDS if getattr(self, f) not in (None, "")}

    @classmethod
    def from_event(cls, event: CanonicalEvent) -> "IdentityRecord":
        values = {f: _text(event.attributes.get(f)) for f in IDENTITY_FIELDS}
        return cls(**values, provenance=event.provenance)


def _text(value) -> str | None:
    return None if value in (None, "") else str(value)


class SkipNote(NamedTuple):
    artifact_path: str
    locator: str
    reason: str


class VinCheck(NamedTuple):
    valid: bool
    reason: str


def vin_check_digit(vin: str) -> str:
    total = sum(_VIN_VALUES[c] * w for c, w in zip(vin, _VIN_WEIGHTS))
    rem = total % 11
    return "X" if rem == 10 else str(rem)


def validate_vin(text: Any, check_digit: bool = False) -> VinCheck:
    """ISO 3779 length and alphabet check, optionally with the check digit."""
    if not isinstance(text, str):
        return VinCheck(False, "not text")
    if len(text) != 17:
        return VinCheck(False, f"length {len(text)} != 17")
    if not VIN_ALPHABET.fullmatch(text):
        return VinCheck(False, "characters outside the VIN alphabet")
    if check_digit and (text[8].isdigit() or text[8] == "X"):
        if vin_check_digit(text) != text[8]:
            return VinCheck(False, "check digit mismatch")
    return VinCheck(True, "ok")


def _parse_iso(text: str) -> datetime:
    s = text.strip()
    if not s:
        raise Unparseable("empty timestamp text")
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    # fromisoformat on 3.10 accepts only 3 or 6 fractional digits
    m = re.fullmatch(r"(\d{4}-\d{2}-\d{2})[T ](\d{2}:\d{2}(?::\d{2})?)(?:[.,](\d+))?(.*)", s)
    if m:
        frac = (m.group(3) or "")[:6].ljust(6, "0") if m.group(3) else ""
        s = f"{m.group(1)}T{m.group(2)}" + (f".{frac}" if frac else "") + m.group(4)
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as exc:
        raise Unparseable(f"not an ISO 8601 timestamp: {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def _dt_to_ms(dt: datetime) -> int:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - _EPOCH_0
    return delta.days * 86_400_000 + delta.seconds * 1000 + delta.microseconds // 1000


def normalize_timestamp(raw: Any, epoch: str, check_year: bool = False) -> int:
    """Convert a stored time value to UTC milliseconds since the Unix epoch.

    With ``check_year`` the result must fall in 2000..2100, otherwise
    :class:`ImplausibleYear` is raised.
    """
    if epoch not in EPOCHS:
        raise ValueError(f"unknown epoch {epoch!r}")
    if isinstance(raw, bool) or raw is None:
        raise Unparseable(f"not a timestamp: {raw!r}")
    if isinstance(raw, datetime):
        ms = _dt_to_ms(raw)
    elif isinstance(raw, date):
        ms = _dt_to_ms(datetime(raw.year, raw.month, raw.day, tzinfo=timezone.utc))
    elif epoch == "iso8601":
        if not isinstance(raw, str):
            raise Unparseable(f"expected ISO 8601 text, got {type(raw).__name__}")
        ms = _dt_to_ms(_parse_iso(raw))
    else:
        if isinstance(raw, (bytes, bytearray)):
            raise Unparseable("binary value is not a timestamp")
        if isinstance(raw, str):
            try:
                raw = float(raw.strip()) if not raw.strip().lstrip("-").isdigit() else int(raw.strip())
            except ValueError as exc:
                raise Unparseable(f"not a number: {raw!r}") from exc
        if not isinstance(raw, (int, float)) or (isinstance(raw, float) and not math.isfinite(raw)):
            raise Unparseable(f"not a finite number: {raw!r}")
        if epoch == "unix_ms":
            ms = raw
        elif epoch == "unix_s":
            ms = raw * 1000
        else:
            ms = raw * 1000 + APPLE_EPOCH_MS
        if abs(ms) > 1e17:
            raise Unparseable(f"timestamp magnitude out of range: {raw!r}")
        ms = int(round(ms))
    if check_year and not (_MIN_MS <= ms <= _MAX_MS):
        raise ImplausibleYear(f"{raw!r} as {epoch} lies outside {MIN_YEAR}..{MAX_YEAR}")
    return ms


def plausible(ms: int) -> bool:
    return _MIN_MS <= ms <= _MAX_MS


def _default_epoch(raw: Any) -> str:
    return "iso8601" if isinstance(raw, str) and not re.fullmatch(r"\s*-?\d+(\.\d+)?\s*", raw) else "unix_ms"


def resolve_time(raw: Any, epoch: str | None) -> tuple[int, str, str | None]:
    """(ms, confidence, note); re-infers the epoch when the result is implausible."""
    declared = epoch or _default_epoch(raw)
    ms = normalize_timestamp(raw, declared)
    if plausible(ms) or isinstance(raw, (datetime, date)) or declared == "iso8601":
        if not plausible(ms):
            raise ImplausibleYear(f"{raw!r} lies outside {MIN_YEAR}..{MAX_YEAR}")
        return ms, "exact", None
    for alt in ("unix_ms", "unix_s", "apple_s"):
        if alt == declared:
            continue
        try:
            alt_ms = normalize_timestamp(raw, alt)
        except Unparseable:
            continue
        if plausible(alt_ms):
            return alt_ms, "inferred", f"epoch re-inferred: {declared} -> {alt}"
    raise ImplausibleYear(f"{raw!r} is implausible under every known epoch")


def _convert_units(key: str, value: Any) -> tuple[str, Any]:
    if key in _RESERVED or isinstance(value, bool) or not isinstance(value, (int, float)):
        return key, value
    for suffix, target, convert in UNIT_SUFFIXES:
        if key.endswith(suffix):
            return key[: -len(suffix)] + target, round(convert(float(value)), 6)
    return key, value


def _clean(value: Any) -> Any:
    """Attribute values as JSON-safe trees."""
    if isinstance(value, (bytes, bytearray)):
        return {"bytes_sha256": hashlib.sha256(value).hexdigest(), "length": len(value)}
    if isinstance(value, datetime):
        return _dt_to_ms(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, float):
        return float(value)
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def event_id_for(kind, start, vin, attributes, artifact_path, locator) -> str:
    payload = canonical_json([kind, start, vin, attributes, artifact_path, locator])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _geo(fields: dict, lat_key: str, lon_key: str) -> GeoPoint | None:
    lat, lon = fields.get(lat_key), fields.get(lon_key)
    if lat is None and lon is None:
        return None
    try:
        lat, lon = float(lat), float(lon)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"non-numeric coordinates {lat!r}, {lon!r}") from exc
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError("non-finite coordinates")
    accuracy = fields.get("accuracy_m") if lat_key == "lat" else None
    return GeoPoint(lat, lon, float(accuracy) if isinstance(accuracy, (int, float)) else None)


def _provenance(record) -> Provenance:
    return Provenance(
        source_id=record.source_id,
        artifact_path=record.artifact_path,
        sha256=record.sha256,
        locator=record.locator,
        extractor_version=f"vapp/{__version__}/{record.decoder}",
        app_id=record.app_id,
        platform=record.platform,
    )


def _normalize_one(record) -> CanonicalEvent:
    prov = _provenance(record)
    if record.encrypted:
        attributes = {"categories": sorted(record.categories), "app_id": record.app_id}
        eid = event_id_for("encrypted_artifact", None, None, attributes, record.artifact_path, record.locator)
        return CanonicalEvent(eid, "encrypted_artifact", None, attributes=attributes,
                              provenance=(prov,), time_confidence="undated")
    kind = record.kind_hint
    fields = dict(record.fields)
    notes = []
    confidence = "undated"
    start = end = None
    if fields.get("start") is not None:
        start, confidence, note = resolve_time(fields["start"], record.epoch)
        if note:
            notes.append(note)
    if fields.get("end") is not None:
        end, end_conf, note = resolve_time(fields["end"], record.epoch)
        if note and note not in notes:
            notes.append(note)
        if start is None:
            raise ValueError("end time without start time")
        if end_conf == "inferred":
            confidence = "inferred"
    if start is not None and end is not None and end < start:
        raise ValueError("end before start")
    if kind in REQUIRES_START and start is None:
        raise ValueError(f"{kind} record without start time")
    geo_start = _geo(fields, "lat", "lon")
    geo_end = _geo(fields, "lat_end", "lon_end")
    vin = None
    attributes: dict[str, Any] = {}
    raw_vin = fields.get("vin")
    if raw_vin not in (None, ""):
        candidate = str(raw_vin).strip().upper()
        check = validate_vin(candidate)
        if check.valid:
            vin = candidate
        else:
            attributes["vin_raw"] = str(raw_vin)
            attributes["vin_invalid_reason"] = check.reason
    for key, value in fields.items():
        if key in _RESERVED or value is None:
            continue
        new_key, new_value = _convert_units(key, value)
        attributes[new_key] = _clean(new_value)
    if record.categories:
        attributes["categories"] = sorted(record.categories)
    if notes:
        attributes["time_note"] = "; ".join(notes)
    if any(g is not None and g.suspect for g in (geo_start, geo_end)):
        attributes["geo_suspect"] = True
    eid = event_id_for(kind, start, vin, attributes, record.artifact_path, record.locator)
    return CanonicalEvent(eid, kind, start, end, geo_start, geo_end, vin, attributes, (prov,), confidence)


def event_sort_key(event: CanonicalEvent):
    if event.start is None:
        p = event.provenance[0]
        return (1, 0, p.artifact_path, p.locator, event.kind, event.event_id)
    return (0, event.start, "", "", event.kind, event.event_id)


def _normalize_key(event: CanonicalEvent):
    if event.start is None:
        p = event.provenance[0]
        return (1, 0, p.artifact_path, p.locator, event.event_id)
    return (0, event.start, "", "", event.event_id)


def normalize_with_skips(records: Iterable) -> tuple[list[CanonicalEvent], list[SkipNote]]:
    events: dict[str, CanonicalEvent] = {}
    skips: list[SkipNote] = []
    for record in records:
        if record.kind_hint not in EVENT_KINDS and not record.encrypted:
            skips.append(SkipNote(record.artifact_path, record.locator, f"unknown kind {record.kind_hint!r}"))
            continue
        try:
            event = _normalize_one(record)
        except (ValueError, Unparseable, ImplausibleYear, TypeError, OverflowError) as exc:
            skips.append(SkipNote(record.artifact_path, record.locator, str(exc)))
            continue
        if event.event_id in events:
            event = events[event.event_id].with_provenance(event.provenance)
        events[event.event_id] = event
    ordered = sorted(events.values(), key=_normalize_key)
    return ordered, skips


def normalize(records: Iterable) -> list[CanonicalEvent]:
    """Raw records to canonical events ordered by (start, event_id)."""
    return normalize_with_skips(records)[0]


def attach_container_vin(events: list[CanonicalEvent]) -> list[CanonicalEvent]:
    """Give VIN-less events the container's VIN when exactly one is known."""
    vins = {e.vin for e in events if e.vin}
    if len(vins) != 1:
        return events
    (vin,) = vins
    out = []
    for e in events:
        if e.vin is None and e.kind not in ("encrypted_artifact", "schema_present", "identity"):
            p = e.provenance[0]
            eid = event_id_for(e.kind, e.start, vin, e.attributes, p.artifact_path, p.locator)
            e = replace(e, vin=vin, event_id=eid)
        out.append(e)
    return sorted(out, key=_normalize_key)


def ms_to_datetime(ms: int) -> datetime:
    return _EPOCH_0 + timedelta(milliseconds=ms)
