"""Manufacturer export containers rendered from a scenario."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from ..registry import MANUFACTURERS, SAR_CATEGORIES, sar_presence
from .scenario import Action, Scenario, stable_rng
from .writers import iso

DAY_MS = 86_400_000
TELEMETRY_STEP_MS = 100

# Signals that carry values derived from the drive; the rest fill out the table.
_CORE_SIGNALS = (
    "Vehicle Speed (km/h)",
    "Accelerator Pedal Position (%)",
    "Estimated Brake Pedal Position",
    "Autosteer Driver Hands On Detection",
    "Primary Steering Angle Sensor (degrees) (Positive indicates right turn)",
    "GPS Latitude (deg)",
    "GPS Longitude (deg)",
    "Odometer (km)",
    "Gear Selector Position",
    "State of Charge (%)",
)
TELEMETRY_COLUMNS = 229


def telemetry_columns() -> list[str]:
    cols = list(_CORE_SIGNALS)
    families = (
        ("Battery Module {} Temperature (C)", 16),
        ("Battery Module {} Voltage (V)", 16),
        ("Battery Brick {} Voltage (V)", 96),
        ("Tire Pressure Sensor {} (bar)", 4),
        ("Cabin Temperature Zone {} (C)", 4),
        ("Seat Occupancy Sensor {}", 5),
        ("Door Switch {}", 4),
        ("Window Position {} (%)", 4),
        ("Inverter Phase {} Current (A)", 3),
        ("Ultrasonic Sensor {} Distance (cm)", 12),
        ("Camera {} Status", 8),
        ("Thermal Loop {} Flow (l/min)", 4),
    )
    for pattern, n in families:
        cols += [pattern.format(i) for i in range(1, n + 1)]
    i = 1
    while len(cols) < TELEMETRY_COLUMNS:
        cols.append(f"Diagnostic Channel {i:03d}")
        i += 1
    return cols[:TELEMETRY_COLUMNS]


def _interp(drive: Action, t: int) -> tuple[float, float, float]:
    route = drive.route
    if t <= route[0].t:
        p = route[0]
        return p.lat, p.lon, 0.0
    for a, b in zip(route, route[1:]):
        if a.t <= t <= b.t:
            f = (t - a.t) / (b.t - a.t)
            return (a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon),
                    a.speed_kmh + f * (b.speed_kmh - a.speed_kmh))
    p = route[-1]
    return p.lat, p.lon, 0.0


def telemetry_rows(s: Scenario, *, pad_ms: int = 0, drives: list[Action] | None = None) -> list[list]:
    """10 Hz rows across each drive, ``pad_ms`` of standstill on either side.

    Speed interpolates the route's 10 s samples, so it is zero at the drive's
    first and last instant and positive in between.
    """
    rng = stable_rng(s, "telemetry")
    cols = telemetry_columns()
    filler = [round(rng.uniform(0, 100), 2) for _ in range(len(cols) - len(_CORE_SIGNALS))]
    rows = []
    for drive in drives if drives is not None else s.drives:
        odo = drive.odometer_km or 0.0
        soc = 80.0
        for t in range(drive.t - pad_ms, drive.end + pad_ms, TELEMETRY_STEP_MS):
            lat, lon, speed = _interp(drive, t)
            moving = speed > 0
            k = (t - drive.t) // TELEMETRY_STEP_MS
            core = [
                round(speed, 2),
                round(min(100.0, speed * 0.6), 1) if moving else 0.0,
                0.0 if moving else 12.5,
                "true" if moving else "false",
                round(15 * math.sin(k / 50.0), 2) if moving else 0.0,
                round(lat, 6),
                round(lon, 6),
                round(odo, 3),
                "D" if moving else "P",
                round(soc, 2),
            ]
            odo += speed / 3.6 * TELEMETRY_STEP_MS / 1000 / 1000
            soc -= speed * 1e-6
            # slow channels report once per second; the table leaves the rest empty
            rest = filler if k % 10 == 0 else [""] * len(filler)
            rows.append([t, *core, *rest])
    return rows


def telemetry_csv(s: Scenario, **kwargs) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["timestamp", *telemetry_columns()])
    w.writerows(telemetry_rows(s, **kwargs))
    return buf.getvalue().encode("utf-8")


def _csv(rows: list[dict], columns: list[str]) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\r\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: "" if r.get(k) is None else r[k] for k in columns})
    return buf.getvalue().encode("utf-8")


def _json(rows: list[dict]) -> bytes:
    return json.dumps(rows, indent=1, sort_keys=True, ensure_ascii=False).encode("utf-8")


def _customer(s: Scenario, manufacturer: str) -> list[dict]:
    u = s.user
    if manufacturer == "ford":
        fields = ("name", "email")
    elif manufacturer == "mercedes":
        fields = ("name", "date_of_birth", "email", "address")
    else:
        fields = ("name", "date_of_birth", "address", "phone", "email")
    row = {f: u[f] for f in fields}
    if manufacturer == "seat":
        row["nickname"] = s.vehicle["nickname"]
    if manufacturer == "onstar":
        row["account_created"] = iso(s.first_seen - 30 * DAY_MS)
    return [row]


def _vehicles(s: Scenario) -> list[dict]:
    return [{"vin": s.vin, "model": s.vehicle["model"], "plate": s.vehicle["plate"],
             "ownership_from": iso(s.first_seen - 30 * DAY_MS)[:10], "ownership_to": ""}]


def _positions(s: Scenario) -> list[dict]:
    rows = []
    for d in s.drives:
        for p in (d.route[0], d.route[-1]):
            rows.append({"timestamp": iso(p.t), "vin": s.vin, "lat": p.lat, "lon": p.lon})
    return rows


def _advisor_calls(s: Scenario) -> list[dict]:
    """One call during the first drive, one from before the current owner."""
    d = s.drives[0]
    t = d.t + 120_000
    lat, lon = s.position_at(t)
    early = s.first_seen - 400 * DAY_MS
    return [
        {"start": iso(early), "end": iso(early + 240_000), "vin": s.vin, "call_type": "roadside",
         "lat": round(s.start_lat, 6), "lon": round(s.start_lon, 6)},
        {"start": iso(t), "end": iso(t + 90_000), "vin": s.vin, "call_type": "advisor",
         "lat": round(lat, 6), "lon": round(lon, 6)},
    ]


def _usage(s: Scenario) -> list[dict]:
    rows = [{"timestamp": iso(a.t), "service": "navigation", "detail": a.destination}
            for a in s.of("navigate", "send_trip")]
    return rows or [{"timestamp": iso(s.first_seen), "service": "login", "detail": "app"}]


def render_sar(gt, manufacturer: str, *, telemetry_pad_ms: int = 10_000) -> dict[str, bytes]:
    """Container files (relative path -> bytes) for one manufacturer.

    Categories follow the presence row for ``manufacturer``; categories
    marked none are listed in the manifest without a file.
    """
    if manufacturer not in MANUFACTURERS:
        raise ValueError(f"unknown manufacturer {manufacturer!r}")
    s: Scenario = getattr(gt, "scenario", gt)
    presence = sar_presence(manufacturer)
    files: dict[str, bytes] = {}
    entries: list[dict] = []

    def add(name: str, file: str, data: bytes, role: str = "records") -> None:
        files[file] = data
        entries.append({"name": name, "presence": presence[name], "file": file, "role": role})

    cust = _customer(s, manufacturer)
    add("customer_data", "customer.csv", _csv(cust, list(cust[0])), "customer")
    if presence["vehicle_data"] != "none":
        add("vehicle_data", "vehicles.csv",
            _csv(_vehicles(s), ["vin", "model", "plate", "ownership_from", "ownership_to"]), "vehicles")
        if manufacturer == "seat":
            access = [{"timestamp": iso(a.t), "vin": s.vin, "action": a.kind} for a in s.of("lock", "unlock")]
            if access:
                add("vehicle_data", "vehicle_access.csv", _csv(access, ["timestamp", "vin", "action"]), "events")
        if manufacturer == "onstar":
            warn = [{"timestamp": iso(s.last_sync - k * DAY_MS), "message": m}
                    for k, m in ((3, "oil"), (1, "low tires"))]
            add("vehicle_data", "warnings.csv", _csv(warn, ["timestamp", "message"]))
    if presence["infotainment_usage"] != "none":
        add("infotainment_usage", "infotainment.json", _json(_usage(s)))
    if presence["correspondence"] != "none":
        add("correspondence", "correspondence.csv",
            _csv([{"date": iso(s.first_seen - 7 * DAY_MS)[:10], "channel": "email", "subject": "service"}],
                 ["date", "channel", "subject"]))
    if presence["order_history"] != "none":
        add("order_history", "orders.csv",
            _csv([{"date": iso(s.first_seen - 60 * DAY_MS)[:10], "item": "connect services", "amount": 0}],
                 ["date", "item", "amount"]))
    if presence["position_data"] != "none":
        rows = _positions(s) if manufacturer != "onstar" else [
            {"timestamp": iso(a.t), "vin": s.vin, "lat": a.lat, "lon": a.lon} for a in s.of("locate")
        ] or _positions(s)[-1:]
        add("position_data", "positions.csv", _csv(rows, ["timestamp", "vin", "lat", "lon"]), "events")
    manifest: dict = {"manufacturer": manufacturer, "categories": entries}
    if presence["additional_data"] != "none":
        if manufacturer == "onstar":
            add("additional_data", "advisor_calls.csv",
                _csv(_advisor_calls(s), ["start", "end", "vin", "call_type", "lat", "lon"]), "events")
        elif manufacturer == "tesla":
            files["telemetry.csv"] = telemetry_csv(s, pad_ms=telemetry_pad_ms)
            manifest["telemetry"] = "telemetry.csv"
            days = sorted({iso(d.t)[:10] for d in s.drives})
            add("additional_data", "telemetry_days.json",
                _json([{"date": day, "columns": TELEMETRY_COLUMNS} for day in days]))
        else:
            add("additional_data", "processing.json",
                _json([{"category": c, "entries": 1} for c in ("Car2X", "accident", "contract")]))
    listed = {e["name"] for e in entries}
    entries += [{"name": c, "presence": "none"} for c in SAR_CATEGORIES if c not in listed]
    files["manifest.json"] = json.dumps(manifest, indent=1, sort_keys=True).encode("utf-8")
    return dict(sorted(files.items()))


def write_sar(files: dict[str, bytes], out: str | Path) -> Path:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for rel, data in files.items():
        (out / rel).write_bytes(data)
    return out
