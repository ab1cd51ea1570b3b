"""Manufacturer data-request exports: import, telemetry, and correlation.

A container is a directory holding ``manifest.json`` plus one CSV or JSON
table per category. The manifest looks like::

    {"manufacturer": "onstar",
     "categories": [{"name": "customer_data", "presence": "data",
                     "file": "customer.csv", "role": "customer"}, ...],
     "telemetry": "telemetry.csv"}

``role`` says how rows are read: ``customer``, ``vehicles``, ``events`` or
``records`` (kept verbatim, the default).
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from . import __version__
from .errors import VappError, MalformedManifest, NoTimestampColumn, UnknownManufacturer
from .events import CanonicalEvent, GeoPoint, IdentityRecord, Provenance, event_id_for, normalize_timestamp
from .evidence import sha256_hex
from .registry import MANUFACTURERS, SAR_CATEGORIES, SAR_PRESENCE_VALUES
from .timeline import Timeline, timeline_key

ROLES = ("customer", "vehicles", "events", "records")
EXTRACTOR = f"vapp/{__version__}/sar_import"
# a drive segment splits when telemetry goes quiet this long
SEGMENT_GAP_MS = 5_000
_NUMBER = re.compile(r"-?\d+(\.\d+)?")
TIME_HEADERS = ("t", "time", "timestamp", "datetime", "date", "utc", "time_utc")


@dataclass(frozen=True)
class TelemetrySeries:
    columns: tuple[str, ...]
    rows: tuple[tuple[int, tuple[Any, ...]], ...]
    nominal_rate_hz: float
    # True when input rows were out of order and had to be re-sorted
    resorted: bool = False
    time_column: str = "timestamp"
    dictionary: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for t, values in self.rows:
            if len(values) != len(self.columns):
                raise ValueError(f"row at {t} has {len(values)} values for {len(self.columns)} columns")

    def column(self, name: str) -> list[Any]:
        i = self.columns.index(name)
        return [values[i] for _, values in self.rows]


@dataclass(frozen=True)
class SarTable:
    name: str
    presence: str
    file: str
    role: str
    rows: tuple[dict, ...]


@dataclass(frozen=True)
class SarDataset:
    manufacturer: str
    customer: IdentityRecord | None
    vehicles: tuple[dict, ...]
    categories: Mapping[str, str]
    event_logs: tuple[CanonicalEvent, ...]
    telemetry: TelemetrySeries | None
    tables: tuple[SarTable, ...] = ()
    source_id: str = ""

    def records(self, category: str) -> list[dict]:
        return [r for tab in self.tables if tab.name == category for r in tab.rows]


def _time_ms(raw: Any) -> int | None:
    """RFC 3339 text or epoch milliseconds; None when neither."""
    if raw in (None, "") or isinstance(raw, bool):
        return None
    text = raw if isinstance(raw, (int, float)) else str(raw).strip()
    epoch = "unix_ms" if isinstance(text, (int, float)) or _NUMBER.fullmatch(text) else "iso8601"
    try:
        return normalize_timestamp(text, epoch)
    except (VappError, ValueError, OverflowError):
        return None


def _cell(text: str) -> Any:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        return text
    return value if math.isfinite(value) else text


# Columns converted from CSV text; everything else stays text so identifiers keep their form.
_NUMERIC = {"lat", "lon", "latitude", "longitude", "speed_kmh", "duration_s", "amount", "odometer_km"}


def _typed_row(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if v is None:
            continue
        out[k] = _cell(v) if k in _NUMERIC else (v if v != "" else None)
    return out


def _read_table(path: Path) -> list[dict]:
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            rows = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedManifest(f"{path.name}: {exc}") from None
        if not isinstance(rows, list) or not all(isinstance(r, dict) for r in rows):
            raise MalformedManifest(f"{path.name}: expected a JSON array of objects")
        return rows
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise MalformedManifest(f"{path.name}: {exc}") from None
    return [_typed_row(r) for r in csv.DictReader(io.StringIO(text, newline=""))]


def _load_manifest(root: Path) -> dict:
    path = root / "manifest.json" if root.is_dir() else root
    try:
        doc = json.loads(path.read_text("utf-8"))
    except FileNotFoundError:
        raise MalformedManifest(f"no manifest at {path}") from None
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedManifest(f"manifest: {exc}") from None
    if not isinstance(doc, dict) or not doc:
        raise MalformedManifest("empty manifest")
    if not isinstance(doc.get("manufacturer"), str) or not isinstance(doc.get("categories"), list):
        raise MalformedManifest("manifest needs manufacturer and categories[]")
    return doc


def _event(kind: str, start: int, end: int | None, vin: str | None, attrs: dict, prov: Provenance,
           geo: GeoPoint | None = None) -> CanonicalEvent:
    attrs = {k: v for k, v in attrs.items() if v is not None}
    return CanonicalEvent(
        event_id=event_id_for(kind, start, vin, attrs, prov.artifact_path, prov.locator),
        kind=kind, start=start, end=end, geo_start=geo, geo_end=None, vin=vin,
        attributes=attrs, time_confidence="exact", provenance=(prov,),
    )


def _geo(row: dict) -> GeoPoint | None:
    lat, lon = row.get("lat", row.get("latitude")), row.get("lon", row.get("longitude"))
    if isinstance(lat, (int, float)) and isinstance(lon, (int, float)):
        try:
            return GeoPoint(float(lat), float(lon))
        except ValueError:
            return None
    return None


def row_event(row: dict, prov: Provenance) -> CanonicalEvent | None:
    """Map one event-like SAR row onto a canonical event, or None."""
    start = _time_ms(row.get("start", row.get("timestamp")))
    if start is None:
        return None
    end = _time_ms(row.get("end"))
    vin = row.get("vin") or None
    geo = _geo(row)
    if row.get("call_type") is not None or row.get("end") is not None:
        attrs = {"snapshot": "advisor_call", "call_type": row.get("call_type")}
        if end is not None:
            attrs["duration_s"] = (end - start) / 1000.0
        return _event("status_snapshot", start, end, vin, attrs, prov, geo)
    action = str(row.get("action", "")).lower()
    if action in ("lock", "unlock"):
        return _event("lock_state", start, None, vin, {"doors_locked": action == "lock"}, prov, geo)
    if geo is not None:
        attrs = {"speed_kmh": row.get("speed_kmh")} if row.get("speed_kmh") is not None else {}
        return _event("location_fix", start, None, vin, attrs, prov, geo)
    return None


def import_sar(path: str | Path, manufacturer: str | None = None) -> SarDataset:
    root = Path(path)
    doc = _load_manifest(root)
    if root.is_file():
        root = root.parent
    declared = doc["manufacturer"].lower()
    if declared not in MANUFACTURERS:
        raise UnknownManufacturer(declared)
    if manufacturer is not None and manufacturer.lower() != declared:
        if manufacturer.lower() not in MANUFACTURERS:
            raise UnknownManufacturer(manufacturer)
        raise MalformedManifest(f"manifest is for {declared}, not {manufacturer}")
    source_id = "sar-" + sha256_hex((root / "manifest.json").read_bytes())[:16]

    presence = {c: "none" for c in SAR_CATEGORIES}
    tables, events, vehicles = [], [], []
    customer = None
    for entry in doc["categories"]:
        if not isinstance(entry, dict) or entry.get("name") not in SAR_CATEGORIES:
            raise MalformedManifest(f"bad category entry {entry!r}")
        name, pres = entry["name"], entry.get("presence", "data")
        if pres not in SAR_PRESENCE_VALUES:
            raise MalformedManifest(f"{name}: unknown presence {pres!r}")
        role = entry.get("role", "records")
        if role not in ROLES:
            raise MalformedManifest(f"{name}: unknown role {role!r}")
        if pres != "none" and presence[name] == "none":
            presence[name] = pres
        if not entry.get("file"):
            if pres != "none":
                raise MalformedManifest(f"{name} marked {pres} without a file")
            continue
        fpath = root / entry["file"]
        if not fpath.is_file():
            raise MalformedManifest(f"{name}: missing file {entry['file']}")
        rows = _read_table(fpath)
        if pres != "none" and not rows:
            raise MalformedManifest(f"{name} marked {pres} but has no records")
        tables.append(SarTable(name, pres, entry["file"], role, tuple(rows)))
        digest = sha256_hex(fpath.read_bytes())
        for i, row in enumerate(rows):
            if role == "customer" and customer is None:
                values = {k: (None if row.get(k) in (None, "") else str(row[k]))
                          for k in ("name", "email", "phone", "date_of_birth", "address", "user_id")}
                try:
                    customer = IdentityRecord(**values)
                except ValueError:
                    pass
            elif role == "vehicles":
                vehicles.append(dict(row))
            elif role == "events":
                prov = Provenance(source_id, "/" + entry["file"], digest, f"row {i + 1}", EXTRACTOR,
                                  declared, "sar")
                ev = row_event(row, prov)
                if ev is not None:
                    events.append(ev)

    telemetry = None
    if doc.get("telemetry"):
        tpath = root / doc["telemetry"]
        if not tpath.is_file():
            raise MalformedManifest(f"missing telemetry file {doc['telemetry']}")
        telemetry = import_telemetry(tpath)
    events.sort(key=timeline_key)
    return SarDataset(declared, customer, tuple(vehicles), presence, tuple(events), telemetry,
                      tuple(tables), source_id)


def import_telemetry(csv_source: str | Path | bytes | Iterable[str],
                     signal_dictionary: Mapping[str, str] | None = None) -> TelemetrySeries:
    """Read a telemetry table whose first column is a timestamp.

    ``csv_source`` is a path, raw bytes, or an iterable of lines. The
    nominal rate is 1000 / median inter-row spacing in milliseconds.
    """
    if isinstance(csv_source, (str, Path)) and not (isinstance(csv_source, str) and "\n" in csv_source):
        text = Path(csv_source).read_text("utf-8-sig")
    elif isinstance(csv_source, bytes):
        text = csv_source.decode("utf-8-sig")
    elif isinstance(csv_source, str):
        text = csv_source
    else:
        text = "\n".join(csv_source)
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if not header:
        raise NoTimestampColumn("empty telemetry table")
    body = [r for r in reader if r]
    first = body[0][0] if body else None
    if header[0].strip().lower() not in TIME_HEADERS and (first is None or _time_ms(first) is None):
        raise NoTimestampColumn(f"first column {header[0]!r} is not a timestamp")
    columns = tuple(header[1:])
    rows = []
    for n, r in enumerate(body):
        t = _time_ms(r[0])
        if t is None:
            raise NoTimestampColumn(f"row {n + 2}: {r[0]!r} is not a timestamp")
        values = tuple(_cell(v) for v in r[1:])
        values = values[:len(columns)] + (None,) * (len(columns) - len(values))
        rows.append((t, values))
    resorted = any(b[0] < a[0] for a, b in zip(rows, rows[1:]))
    if resorted:
        rows.sort(key=lambda r: r[0])
    deltas = [b[0] - a[0] for a, b in zip(rows, rows[1:]) if b[0] > a[0]]
    rate = 1000.0 / statistics.median(deltas) if deltas else 0.0
    return TelemetrySeries(columns, tuple(rows), rate, resorted, header[0], dict(signal_dictionary or {}))


def _csv_text(rows: list[dict], columns: list[str] | None = None) -> str:
    cols = columns or sorted({k for r in rows for k in r})
    buf = io.StringIO(newline="")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\r\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_value(r.get(k)) for k in cols})
    return buf.getvalue()


def _csv_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def telemetry_csv(series: TelemetrySeries) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow([series.time_column, *series.columns])
    for t, values in series.rows:
        w.writerow([t, *(_csv_value(v) for v in values)])
    return buf.getvalue()


def export_sar(dataset: SarDataset, out: str | Path) -> Path:
    """Write ``dataset`` back out as an interchange container."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for tab in dataset.tables:
        target = out / tab.file
        target.parent.mkdir(parents=True, exist_ok=True)
        if tab.file.lower().endswith(".json"):
            target.write_text(json.dumps(list(tab.rows), indent=1, sort_keys=True, ensure_ascii=False), "utf-8")
        else:
            target.write_text(_csv_text(list(tab.rows)), "utf-8")
        entries.append({"name": tab.name, "presence": tab.presence, "file": tab.file, "role": tab.role})
    listed = {t.name for t in dataset.tables}
    for name, pres in dataset.categories.items():
        if name not in listed:
            entries.append({"name": name, "presence": pres})
    manifest: dict[str, Any] = {"manufacturer": dataset.manufacturer, "categories": entries}
    if dataset.telemetry is not None:
        (out / "telemetry.csv").write_text(telemetry_csv(dataset.telemetry), "utf-8")
        manifest["telemetry"] = "telemetry.csv"
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True), "utf-8")
    return out


# --- correlation -----------------------------------------------------------


@dataclass(frozen=True)
class SarItem:
    """One piece of SAR evidence: an event row or a telemetry drive segment."""

    ref: str
    kind: str
    start: int
    end: int | None
    vin: str | None

    def to_json(self) -> dict:
        return {"ref": self.ref, "kind": self.kind, "start": self.start, "end": self.end, "vin": self.vin}


@dataclass(frozen=True)
class Match:
    phone_event_id: str
    sar: SarItem
    delta_ms: int

    def to_json(self) -> dict:
        return {"phone_event_id": self.phone_event_id, "sar": self.sar.to_json(), "delta_ms": self.delta_ms}


@dataclass(frozen=True)
class CorrelationReport:
    window_ms: int
    matched: tuple[Match, ...]
    phone_only: tuple[tuple[str, str], ...]
    sar_only: tuple[tuple[SarItem, str], ...]

    def to_json(self) -> dict:
        return {
            "window_ms": self.window_ms,
            "matched": [m.to_json() for m in self.matched],
            "phone_only": [{"event_id": e, "reason": r} for e, r in self.phone_only],
            "sar_only": [{**item.to_json(), "reason": r} for item, r in self.sar_only],
        }


def speed_columns(series: TelemetrySeries) -> list[int]:
    return [i for i, c in enumerate(series.columns) if "speed" in c.lower() and "wheel" not in c.lower()]


def drive_segments(series: TelemetrySeries, vin: str | None = None) -> list[SarItem]:
    """Stretches where any speed-like signal is nonzero."""
    cols = speed_columns(series)
    out: list[SarItem] = []
    lo = hi = None
    for t, values in series.rows:
        moving = any(isinstance(values[i], (int, float)) and values[i] > 0 for i in cols)
        if moving and lo is not None and t - hi > SEGMENT_GAP_MS:
            out.append(SarItem(f"telemetry:{lo}", "trip", lo, hi, vin))
            lo = None
        if moving:
            lo = t if lo is None else lo
            hi = t
        elif lo is not None:
            out.append(SarItem(f"telemetry:{lo}", "trip", lo, hi, vin))
            lo = None
    if lo is not None:
        out.append(SarItem(f"telemetry:{lo}", "trip", lo, hi, vin))
    return out


def sar_items(s: SarDataset) -> list[SarItem]:
    items = [SarItem(e.event_id, e.kind, e.start, e.end, e.vin) for e in s.event_logs if e.start is not None]
    if s.telemetry is not None:
        vins = {v.get("vin") for v in s.vehicles if v.get("vin")}
        items += drive_segments(s.telemetry, next(iter(vins)) if len(vins) == 1 else None)
    return items


def _delta(e: CanonicalEvent, item: SarItem) -> int:
    d = abs(e.start - item.start)
    if e.kind == "trip" and e.end is not None and item.end is not None:
        d = max(d, abs(e.end - item.end))
    return d


def correlate(t: Timeline, s: SarDataset, window_ms: int) -> CorrelationReport:
    """Pair phone events with SAR evidence by VIN and time.

    Pairs are formed greedily, closest first, and each side is used at most
    once. A missing VIN on either side does not block a pair. Absence of
    telemetry is never read as absence of driving.
    """
    if window_ms <= 0:
        raise ValueError("window must be positive")
    phone = [e for e in t.dated if e.kind not in ("encrypted_artifact", "schema_present")]
    items = sar_items(s)
    candidates = []
    for e in phone:
        for item in items:
            if e.kind != item.kind:
                continue
            if e.vin and item.vin and e.vin != item.vin:
                continue
            d = _delta(e, item)
            if d <= window_ms:
                candidates.append((d, e.event_id, item.ref, e, item))
    candidates.sort(key=lambda c: c[:3])
    used_p, used_s, matched = set(), set(), []
    for d, pid, sid, e, item in candidates:
        if pid in used_p or sid in used_s:
            continue
        used_p.add(pid)
        used_s.add(sid)
        matched.append(Match(pid, item, d))
    matched.sort(key=lambda m: (m.sar.start, m.phone_event_id))

    span = (s.telemetry.rows[0][0], s.telemetry.rows[-1][0]) if s.telemetry and s.telemetry.rows else None
    phone_only = []
    for e in sorted(phone, key=timeline_key):
        if e.event_id in used_p:
            continue
        if e.kind == "trip" and span is not None and not (span[0] <= e.start <= span[1]):
            reason = "outside telemetry coverage"
        elif not items:
            reason = "no SAR evidence"
        else:
            reason = "phone-only"
        phone_only.append((e.event_id, reason))

    first_seen = min((e.start for e in phone), default=None)
    owned = [_time_ms(v.get("ownership_from")) for v in s.vehicles]
    owned_from = min((o for o in owned if o is not None), default=None)
    sar_only = []
    for item in sorted(items, key=lambda i: (i.start, i.ref)):
        if item.ref in used_s:
            continue
        reason = "SAR-only"
        if owned_from is not None and item.start < owned_from:
            reason = "SAR-only: predates ownership"
        elif first_seen is not None and item.start < first_seen - window_ms:
            reason = "SAR-only: predates phone first_seen"
        sar_only.append((item, reason))
    return CorrelationReport(window_ms, tuple(matched), tuple(phone_only), tuple(sar_only))
