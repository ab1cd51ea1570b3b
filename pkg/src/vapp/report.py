"""Machine outputs (JSON, CSV, NDJSON) and the static HTML report built from them."""

from __future__ import annotations

import csv
import html
import io
import json
from datetime import datetime
from typing import Any, Iterable

from .events import CanonicalEvent, canonical_json, ms_to_datetime
from .evidence import CustodyRecord, custody_ndjson, rfc3339
from .sar import CorrelationReport, SarDataset
from .timeline import Timeline, summarize, timeline_json

EVENTS_CSV_COLUMNS = (
    "event_id",
    "kind",
    "start",
    "start_utc",
    "end",
    "end_utc",
    "vin",
    "lat_start",
    "lon_start",
    "lat_end",
    "lon_end",
    "time_confidence",
    "categories",
    "apps",
    "source_ids",
    "artifact_paths",
    "locators",
    "attributes",
)


def dumps(doc: Any) -> bytes:
    return (json.dumps(doc, indent=1, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8")


def _utc(ms: int | None) -> str:
    return "" if ms is None else ms_to_datetime(ms).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


def _join(values: Iterable[str]) -> str:
    return ";".join(dict.fromkeys(values))


def event_row(e: CanonicalEvent) -> dict[str, Any]:
    gs, ge = e.geo_start, e.geo_end
    return {
        "event_id": e.event_id,
        "kind": e.kind,
        "start": "" if e.start is None else e.start,
        "start_utc": _utc(e.start),
        "end": "" if e.end is None else e.end,
        "end_utc": _utc(e.end),
        "vin": e.vin or "",
        "lat_start": "" if gs is None else gs.lat,
        "lon_start": "" if gs is None else gs.lon,
        "lat_end": "" if ge is None else ge.lat,
        "lon_end": "" if ge is None else ge.lon,
        "time_confidence": e.time_confidence,
        "categories": ";".join(e.attributes.get("categories") or ()),
        "apps": _join(f"{p.app_id}/{p.platform}" for p in e.provenance),
        "source_ids": _join(p.source_id for p in e.provenance),
        "artifact_paths": _join(p.artifact_path for p in e.provenance),
        "locators": _join(p.locator for p in e.provenance),
        "attributes": canonical_json(e.attributes),
    }


def events_json(t: Timeline, built_at: datetime | None = None) -> bytes:
    return dumps(timeline_json(t, built_at))


def events_csv(t: Timeline) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.DictWriter(buf, fieldnames=EVENTS_CSV_COLUMNS, lineterminator="\r\n")
    w.writeheader()
    for e in t.events:
        w.writerow(event_row(e))
    return buf.getvalue().encode("utf-8")


def summary_doc(t: Timeline, *, built_at: datetime | None = None, containers: Iterable[dict] = (),
                skips: Iterable[dict] = (), failed: Iterable[dict] = ()) -> dict:
    kinds: dict[str, int] = {}
    for e in t.events:
        kinds[e.kind] = kinds.get(e.kind, 0) + 1
    return {
        "built_at": rfc3339(built_at or t.built_at),
        "sources": list(t.sources),
        "event_count": len(t.events),
        "events_by_kind": kinds,
        "per_vin": summarize(t).to_json(),
        "containers": list(containers),
        "skipped": list(skips),
        "failed": list(failed),
    }


def custody_bytes(records: Iterable[CustodyRecord]) -> bytes:
    return custody_ndjson(records).encode("utf-8")


def sar_doc(s: SarDataset) -> dict:
    return {
        "manufacturer": s.manufacturer,
        "source_id": s.source_id,
        "categories": dict(s.categories),
        "customer": s.customer.to_json() if s.customer else None,
        "vehicles": list(s.vehicles),
        "event_logs": [e.to_json() for e in s.event_logs],
        "telemetry": None if s.telemetry is None else {
            "columns": len(s.telemetry.columns),
            "rows": len(s.telemetry.rows),
            "nominal_rate_hz": round(s.telemetry.nominal_rate_hz, 6),
            "from": s.telemetry.rows[0][0] if s.telemetry.rows else None,
            "to": s.telemetry.rows[-1][0] if s.telemetry.rows else None,
            "resorted": s.telemetry.resorted,
        },
    }


def correlation_doc(reports: Iterable[tuple[SarDataset, CorrelationReport]], *,
                    built_at: datetime) -> dict:
    return {
        "built_at": rfc3339(built_at),
        "sar": [{**sar_doc(s), "correlation": r.to_json()} for s, r in reports],
    }


# --- HTML ------------------------------------------------------------------

_CSS = """
body{font-family:sans-serif;margin:1.5em;color:#222}
table{border-collapse:collapse;margin:.5em 0 1.5em}
td,th{border:1px solid #bbb;padding:2px 6px;font-size:12px;text-align:left;vertical-align:top}
th{background:#eee}
code{font-size:11px}
"""


def _e(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (dict, list)):
        value = canonical_json(value)
    return html.escape(str(value), quote=True)


def _table(columns: list[str], rows: Iterable[Iterable[Any]]) -> str:
    head = "".join(f"<th>{_e(c)}</th>" for c in columns)
    body = "".join("<tr>" + "".join(f"<td>{_e(v)}</td>" for v in r) + "</tr>" for r in rows)
    return f"<table><thead><tr>{head}</tr></thead><tbody>{body}</tbody></table>"


def html_report(*, events: dict | None = None, summary: dict | None = None, correlation: dict | None = None,
                custody: Iterable[dict] = (), title: str = "Vehicle app forensic report") -> bytes:
    """A single static page. No scripts, no external stylesheets, no links."""
    parts = [f"<h1>{_e(title)}</h1>"]
    built = (summary or events or correlation or {}).get("built_at")
    parts.append(f"<p>Built at {_e(built)}</p>")
    if summary is not None:
        parts.append("<h2>Sources</h2>" + _table(["source_id"], [[s] for s in summary["sources"]]))
        if summary["containers"]:
            parts.append("<h2>Containers</h2>" + _table(
                ["source_id", "app", "platform", "container_root", "confidence"],
                [[c["source_id"], c["app_id"], c["platform"], c["container_root"], c["confidence"]]
                 for c in summary["containers"]]))
        parts.append("<h2>Per-VIN summary</h2>")
        rows = []
        for vin, s in summary["per_vin"].items():
            rows.append([vin, s["trip_count"], s["total_distance_km"], s["refuel_count"], s["total_fuel_liters"],
                         len(s["parking_episodes"]), s["lock_unlock_count"], _utc(s["first_seen"]),
                         _utc(s["last_seen"])])
        parts.append(_table(["vin", "trips", "distance km", "refuels", "fuel l", "parking", "lock/unlock",
                             "first seen", "last seen"], rows))
        if summary["failed"]:
            parts.append("<h2>Failed containers</h2>" + _table(
                ["source_id", "container", "reason"],
                [[f["source_id"], f["container"], f["reason"]] for f in summary["failed"]]))
    if events is not None:
        parts.append("<h2>Events</h2>")
        rows = []
        for ev in events["events"]:
            prov = "; ".join(f"{p['app_id']}/{p['platform']} {p['artifact_path']} {p['locator']}"
                             for p in ev["provenance"])
            rows.append([_utc(ev["start"]), _utc(ev["end"]), ev["kind"], ev["vin"], ev["attributes"], prov])
        parts.append(_table(["start", "end", "kind", "vin", "attributes", "provenance"], rows))
    if correlation is not None:
        for s in correlation["sar"]:
            c = s["correlation"]
            parts.append(f"<h2>SAR: {_e(s['manufacturer'])}</h2>")
            parts.append(_table(["category", "presence"], sorted(s["categories"].items())))
            parts.append("<h3>Matched</h3>" + _table(
                ["phone event", "SAR kind", "SAR start", "delta ms"],
                [[m["phone_event_id"], m["sar"]["kind"], _utc(m["sar"]["start"]), m["delta_ms"]]
                 for m in c["matched"]]))
            parts.append("<h3>Phone-only</h3>" + _table(
                ["phone event", "reason"], [[p["event_id"], p["reason"]] for p in c["phone_only"]]))
            parts.append("<h3>SAR-only</h3>" + _table(
                ["SAR ref", "kind", "start", "reason"],
                [[x["ref"], x["kind"], _utc(x["start"]), x["reason"]] for x in c["sar_only"]]))
    custody = list(custody)
    if custody:
        parts.append("<h2>Custody appendix</h2>" + _table(
            ["at", "source_id", "action", "file", "sha256"],
            [[r["at"], r["source_id"], r["action"], r["file_path"], r["sha256"]] for r in custody]))
    doc = ("<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\">"
           f"<title>{_e(title)}</title><style>{_CSS}</style></head><body>\n"
           + "\n".join(parts) + "\n</body></html>\n")
    return doc.encode("utf-8")
