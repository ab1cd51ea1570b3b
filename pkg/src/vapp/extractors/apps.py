"""Per-app decoders. Each turns one artifact's bytes into record drafts.

Column and key names follow the documented fixture schemas (docs/schemas.md);
lookups are by name with positional fallback, so reordered columns still
decode.
"""

from __future__ import annotations

import re
from typing import Any

from ..events import validate_vin
from ..formats import (
    decode_base64_image,
    read_gzip_json,
    read_json,
    read_plist,
    read_tlv_mapsettings,
    read_xml_prefs,
    scan_json_bodies,
    sniff_image,
)
from ..errors import NotBase64, NotGzip
from ..evidence import sha256_hex as sha256_hex_bytes
from .base import Artifact, Draft, col, decoder, draft, rows

D, R, P, F, U, C = "drive_log", "recent_location", "parking", "refueling", "user_info", "car_info"

_EMAIL = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}")
_VIN_TOKEN = re.compile(r"\b[A-HJ-NPR-Z0-9]{17}\b")


def _name(first, last) -> str | None:
    parts = [p for p in (first, last) if p]
    return " ".join(str(p) for p in parts) or None


def _num(value) -> float | None:
    if isinstance(value, bool) or value is None:
        return None
    if isinstance(value, (int, float)):
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


# shared -------------------------------------------------------------------

_AUTOFILL_FIELDS = {
    "email": "email", "emailaddress": "email", "e-mail": "email",
    "name": "name", "full_name": "name", "fullname": "name",
    "street-address": "address", "address": "address", "street": "address",
    "phone": "phone", "tel": "phone",
}


@decoder("webdata_autofill")
def webdata_autofill(art: Artifact) -> list[Draft]:
    out = []
    for i, row in enumerate(rows(art.tables(), "autofill")):
        field = _AUTOFILL_FIELDS.get(str(col(row, "name", pos=0) or "").lower())
        value = col(row, "value", pos=1)
        if field is None or not value:
            continue
        created, used = col(row, "date_created", pos=3), col(row, "date_last_used", pos=4)
        out.append(draft("identity", f"autofill#{i}", U, **{
            field: str(value),
            "date_created_unix_s": created if isinstance(created, int) and created > 0 else None,
            "date_last_used_unix_s": used if isinstance(used, int) and used > 0 else None,
        }))
    return out


@decoder("parking_photo")
def parking_photo(art: Artifact) -> list[Draft]:
    fmt = sniff_image(art.data)
    if fmt == "unknown":
        return []
    return [draft("status_snapshot", "file", snapshot="parking_photo", image_format=fmt,
                  image_size=len(art.data), image_sha256=sha256_hex_bytes(art.data))]


@decoder("schema_only")
def schema_only(art: Artifact) -> list[Draft]:
    tables = art.tables()
    return [draft("schema_present", f"table:{name}", table=name, columns=list(t.columns), row_count=len(t.rows))
            for name, t in sorted(tables.tables.items())]


def _text_lines(data: bytes) -> str:
    return data.decode("utf-8", "replace")


# myAudi -------------------------------------------------------------------

@decoder("audi_maps_ios")
def audi_maps_ios(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    for row in rows(t, "CostBookItem"):
        out.append(draft("refuel", f"CostBookItem#{col(row, 'id', pos=0)}", F, epoch="iso8601",
                         start=col(row, "timestamp", pos=1), fuel_liters=_num(col(row, "amount", pos=2)),
                         price=_num(col(row, "price", pos=3)), currency=col(row, "currency", pos=4),
                         mileage_km=_num(col(row, "mileage", pos=5))))
    for row in rows(t, "DriverLogItem"):
        out.append(draft("trip", f"DriverLogItem#{col(row, 'id', pos=0)}", D, epoch="iso8601",
                         start=col(row, "startTime", pos=1), end=col(row, "endTime", pos=2),
                         address_start=col(row, "startAddress", pos=3),
                         address_end=col(row, "destinationAddress", pos=4),
                         distance_km=_num(col(row, "distance", pos=5))))
    for row in rows(t, "SettingsItem"):
        if col(row, "key", pos=0) == "lastSync":
            out.append(draft("status_snapshot", "SettingsItem#lastSync", epoch="iso8601",
                             start=col(row, "value", pos=1), snapshot="last_sync"))
    return out


@decoder("audi_maps_android")
def audi_maps_android(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    for row in rows(t, "drivers_log_item"):
        m0, m1 = _num(col(row, "start_mileage", pos=5)), _num(col(row, "end_mileage", pos=6))
        out.append(draft("trip", f"drivers_log_item#{col(row, 'id', pos=0)}", D, epoch="unix_ms",
                         start=col(row, "start_time", pos=1), end=col(row, "end_time", pos=2),
                         address_start=col(row, "start_address", pos=3),
                         address_end=col(row, "destination_address", pos=4),
                         mileage_start_km=m0, mileage_end_km=m1,
                         distance_km=round(m1 - m0, 3) if m0 is not None and m1 is not None else None))
    for row in rows(t, "cost_book_item"):
        out.append(draft("refuel", f"cost_book_item#{col(row, 'id', pos=0)}", F, epoch="unix_ms",
                         start=col(row, "timestamp", pos=1), price=_num(col(row, "price", pos=2)),
                         mileage_km=_num(col(row, "mileage", pos=3)),
                         fuel_liters=_num(col(row, "fuel_amount", pos=4))))
    return out


@decoder("audi_vehicle_list")
def audi_vehicle_list(art: Artifact) -> list[Draft]:
    doc = read_json(art.data)
    vehicles = doc.get("vehicles", []) if isinstance(doc, dict) else doc
    out = []
    for i, v in enumerate(vehicles if isinstance(vehicles, list) else []):
        if isinstance(v, dict):
            out.append(draft("vehicle_info", f"vehicles[{i}]", C, vin=v.get("vin"), model=v.get("modelName"),
                             year=v.get("modelYear"), assistance_systems=v.get("assistanceSystems")))
    return out


@decoder("audi_user_account")
def audi_user_account(art: Artifact) -> list[Draft]:
    doc = read_json(art.data)
    if not isinstance(doc, dict):
        return []
    fields = dict(name=_name(doc.get("firstName"), doc.get("lastName")), email=doc.get("email"),
                  date_of_birth=doc.get("dateOfBirth"), user_id=doc.get("userId"))
    if not any(fields.values()):
        return []
    return [draft("identity", "$", U, **fields)]


def _latlon(obj) -> tuple[Any, Any]:
    if not isinstance(obj, dict):
        return None, None
    return obj.get("latitude", obj.get("lat")), obj.get("longitude", obj.get("lon"))


@decoder("audi_geokit")
def audi_geokit(art: Artifact) -> list[Draft]:
    doc = read_json(art.data)
    if not isinstance(doc, dict) or "destination" not in doc:
        return []
    lat0, lon0 = _latlon(doc.get("start"))
    lat1, lon1 = _latlon(doc.get("destination"))
    if lat1 is None:
        return []
    return [draft("nav_destination", "$", lat=lat0, lon=lon0, lat_end=lat1, lon_end=lon1)]


@decoder("audi_webcache")
def audi_webcache(art: Artifact) -> list[Draft]:
    out = []
    for loc, body in scan_json_bodies(art.data):
        if not isinstance(body, dict):
            continue
        for i, p in enumerate(body.get("positions") or []):
            if isinstance(p, dict):
                out.append(draft("location_fix", f"{loc}/positions[{i}]", D, epoch="iso8601",
                                 start=p.get("timestamp"), lat=p.get("lat"), lon=p.get("lon")))
        for i, a in enumerate(body.get("lockActions") or []):
            if isinstance(a, dict) and a.get("action") in ("LOCK", "UNLOCK"):
                out.append(draft("lock_state", f"{loc}/lockActions[{i}]", epoch="unix_ms",
                                 start=a.get("timestamp"), doors_locked=a["action"] == "LOCK"))
        if isinstance(body.get("doors"), dict):
            out.append(draft("status_snapshot", f"{loc}/status", epoch="unix_ms", start=body.get("timestamp"),
                             snapshot="door_status", doors=body["doors"], mileage_km=_num(body.get("mileage")),
                             nickname=body.get("nickname"), next_inspection=body.get("nextInspection")))
    return out


# my BMW -------------------------------------------------------------------

@decoder("bmw_hydrated_bloc")
def bmw_hydrated_bloc(art: Artifact) -> list[Draft]:
    doc = read_json(art.data)
    if not isinstance(doc, dict):
        return []
    out = []
    vehicle = doc.get("VehicleBloc")
    if isinstance(vehicle, dict) and vehicle.get("vin"):
        out.append(draft("vehicle_info", "VehicleBloc", C, vin=vehicle.get("vin"), model=vehicle.get("modelName"),
                         year=vehicle.get("constructionYear")))
    status = doc.get("VehicleStatusBloc")
    if isinstance(status, dict) and status.get("timestamp"):
        lat, lon = _latlon(status.get("location"))
        out.append(draft("status_snapshot", "VehicleStatusBloc", R, epoch="iso8601", start=status["timestamp"],
                         snapshot="vehicle_status", lat=lat, lon=lon, doors_locked=status.get("doorsLocked"),
                         upcoming_services=status.get("upcomingServices"),
                         vin=vehicle.get("vin") if isinstance(vehicle, dict) else None))
    return out


# FordPass -----------------------------------------------------------------

@decoder("ford_coredata")
def ford_coredata(art: Artifact) -> list[Draft]:
    return [draft("vehicle_info", f"ZVEHICLE#{col(r, 'Z_PK', pos=0)}", C, vin=col(r, "ZVIN", pos=3),
                  model=col(r, "ZMODELNAME", pos=4), nickname=col(r, "ZNICKNAME", pos=5),
                  year=col(r, "ZMODELYEAR", pos=6))
            for r in rows(art.tables(), "ZVEHICLE")]


@decoder("ford_cv_modules")
def ford_cv_modules(art: Artifact) -> list[Draft]:
    mods = rows(art.tables(), "ZMODULE")
    if not mods:
        return []
    vin = next((col(r, "ZVIN", pos=1) for r in mods if col(r, "ZVIN", pos=1)), None)
    names = sorted(str(col(r, "ZNAME", pos=2)) for r in mods if col(r, "ZINSTALLED", pos=3))
    return [draft("vehicle_info", "ZMODULE", C, vin=vin, installed_modules=names)]


@decoder("ford_snapshot")
def ford_snapshot(art: Artifact) -> list[Draft]:
    doc = read_json(art.data)
    fuel = doc.get("fuelLevel") if isinstance(doc, dict) else None
    if not isinstance(fuel, dict):
        return []
    vin = art.path.rstrip("/").split("/")[-2]
    return [draft("status_snapshot", "fuelLevel", epoch="unix_ms", start=fuel.get("timestamp"),
                  snapshot="fuel_level", fuel_level_pct=_num(fuel.get("value")),
                  vin=vin if validate_vin(vin).valid else None)]


@decoder("ford_dtx")
def ford_dtx(art: Artifact) -> list[Draft]:
    return [draft("identity", f"ZUSERACCOUNT#{col(r, 'Z_PK', pos=0)}", U, email=col(r, "ZEMAIL", pos=1))
            for r in rows(art.tables(), "ZUSERACCOUNT") if col(r, "ZEMAIL", pos=1)]


@decoder("ford_prefs_plist")
def ford_prefs_plist(art: Artifact) -> list[Draft]:
    doc = read_plist(art.data)
    if not isinstance(doc, dict):
        return []
    out = []
    if doc.get("userId"):
        out.append(draft("identity", "userId", U, user_id=doc["userId"]))
    for i, r in enumerate(doc.get("refuelings") or []):
        if isinstance(r, dict):
            out.append(draft("refuel", f"refuelings[{i}]", F, start=r.get("date"), fuel_liters=_num(r.get("liters")),
                             price=_num(r.get("price")), lat=r.get("stationLatitude"),
                             lon=r.get("stationLongitude")))
    pos = doc.get("lastKnownPosition")
    if isinstance(pos, dict):
        out.append(draft("location_fix", "lastKnownPosition", R, start=pos.get("date"), lat=pos.get("latitude"),
                         lon=pos.get("longitude"), address=pos.get("address")))
    for i, p in enumerate(doc.get("parkingSpots") or []):
        if not isinstance(p, dict):
            continue
        fields = dict(start=p.get("date"), lat=p.get("latitude"), lon=p.get("longitude"))
        if p.get("photo"):
            try:
                img = decode_base64_image(p["photo"])
                fields.update(photo_format=img.format, photo_size=len(img.data),
                              photo_sha256=sha256_hex_bytes(img.data))
            except NotBase64:
                fields["photo_format"] = "invalid"
        out.append(draft("parking", f"parkingSpots[{i}]", P, **fields))
    for i, d in enumerate(doc.get("recentDestinations") or []):
        if isinstance(d, dict) and d.get("name"):
            out.append(draft("nav_destination", f"recentDestinations[{i}]", destination=d["name"],
                             lat_end=d.get("latitude"), lon_end=d.get("longitude")))
    return out


def _prefs(art: Artifact) -> dict:
    return read_xml_prefs(art.data)


@decoder("ford_ngsdn")
def ford_ngsdn(art: Artifact) -> list[Draft]:
    return [draft("vehicle_info", f"vehicle#{i}", C, vin=col(r, "vin", pos=0), name=col(r, "vehicle_name", pos=1),
                  year=col(r, "model_year", pos=2), nickname=col(r, "nickname", pos=3))
            for i, r in enumerate(rows(art.tables(), "vehicle"))]


@decoder("ford_vin_details")
def ford_vin_details(art: Artifact) -> list[Draft]:
    return [draft("vehicle_info", f"vin_details#{i}", C, vin=col(r, "vin", pos=0), engine=col(r, "engine", pos=1),
                  transmission=col(r, "transmission", pos=2), warranty_end=col(r, "warranty_end", pos=3),
                  emission_class=col(r, "emission_class", pos=4))
            for i, r in enumerate(rows(art.tables(), "vin_details"))]


@decoder("ford_prefs_xml")
def ford_prefs_xml(art: Artifact) -> list[Draft]:
    p = _prefs(art)
    fields = dict(email=p.get("user_email"), name=_name(p.get("user_first_name"), p.get("user_last_name")),
                  vin=p.get("vin"))
    return [draft("identity", "prefs", U, **fields)] if fields["email"] or fields["name"] else []


@decoder("ford_expertconnect")
def ford_expertconnect(art: Artifact) -> list[Draft]:
    p = _prefs(art)
    fields = dict(name=p.get("expertconnect_user_name"), email=p.get("expertconnect_email"))
    return [draft("identity", "prefs", U, **fields)] if any(fields.values()) else []


@decoder("ford_token_presence")
def ford_token_presence(art: Artifact) -> list[Draft]:
    p = _prefs(art)
    if not p.get("access_token"):
        return []
    return [draft("status_snapshot", "access_token", snapshot="access_token_present", present=True,
                  token_length=len(str(p["access_token"])))]


@decoder("ford_pin_presence")
def ford_pin_presence(art: Artifact) -> list[Draft]:
    p = _prefs(art)
    if not (p.get("pin_salt") and p.get("pin_hash")):
        return []
    return [draft("status_snapshot", "pin", snapshot="pin_hash_present", present=True)]


# Mercedes me --------------------------------------------------------------

@decoder("mb_last_trip")
def mb_last_trip(art: Artifact) -> list[Draft]:
    folder = art.path.split("/")[-2]
    if not re.fullmatch(r"[0-9a-f]{32}", folder):
        return []
    doc = read_json(art.data)
    trip = doc.get("lastTrip") if isinstance(doc, dict) else None
    if not isinstance(trip, dict):
        return []
    return [draft("status_snapshot", "lastTrip", D, epoch="unix_ms", start=trip.get("end"), snapshot="last_trip",
                  distance_m=_num(trip.get("distance")))]


@decoder("mb_live")
def mb_live(art: Artifact) -> list[Draft]:
    doc = read_json(art.data)
    if not isinstance(doc, dict) or not isinstance(doc.get("values"), dict):
        return []
    values = dict(doc["values"])
    lat, lon = values.pop("latitude", None), values.pop("longitude", None)
    return [draft("status_snapshot", "$", R, epoch="unix_ms", start=doc.get("timestamp"), snapshot="dashboard",
                  lat=lat, lon=lon, values=values)]


@decoder("mb_logbook")
def mb_logbook(art: Artifact) -> list[Draft]:
    t = art.tables()
    points: dict[Any, list[dict]] = {}
    for r in rows(t, "ZDLCOREDATRACKPOINTS"):
        points.setdefault(col(r, "ZTRIP", pos=1), []).append(r)
    out = []
    for r in rows(t, "ZDLCOREDATRIP"):
        pk = col(r, "Z_PK", pos=0)
        ref = f"ZDLCOREDATRIP:{pk}"
        pts = sorted(points.get(pk, []), key=lambda p: col(p, "ZTIMESTAMP", pos=2) or 0)
        first, last = (pts[0], pts[-1]) if pts else (None, None)
        out.append(draft(
            "trip", f"ZDLCOREDATRIP#{pk}", D, epoch="apple_s",
            start=col(r, "ZSTARTDATE", pos=1), end=col(r, "ZENDDATE", pos=2),
            address_start=col(r, "ZSTARTADDRESS", pos=3), address_end=col(r, "ZDESTINATIONADDRESS", pos=4),
            distance_m=_num(col(r, "ZDISTANCE", pos=5)), vin=col(r, "ZVIN", pos=6),
            trip_ref=ref, trackpoint_count=len(pts),
            lat=col(first, "ZLATITUDE", pos=3) if first else None,
            lon=col(first, "ZLONGITUDE", pos=4) if first else None,
            lat_end=col(last, "ZLATITUDE", pos=3) if last else None,
            lon_end=col(last, "ZLONGITUDE", pos=4) if last else None,
        ))
        for p in pts:
            out.append(draft("location_fix", f"ZDLCOREDATRACKPOINTS#{col(p, 'Z_PK', pos=0)}", D, epoch="apple_s",
                             start=col(p, "ZTIMESTAMP", pos=2), lat=col(p, "ZLATITUDE", pos=3),
                             lon=col(p, "ZLONGITUDE", pos=4), speed_kmh=_num(col(p, "ZSPEED", pos=5)),
                             trip_ref=ref))
    for r in rows(t, "ZDLCOREDAPARKEDVEHICLE"):
        out.append(draft("parking", f"ZDLCOREDAPARKEDVEHICLE#{col(r, 'Z_PK', pos=0)}", P, epoch="apple_s",
                         start=col(r, "ZTIMESTAMP", pos=1), lat=col(r, "ZLATITUDE", pos=2),
                         lon=col(r, "ZLONGITUDE", pos=3), address=col(r, "ZADDRESS", pos=4)))
    return out


@decoder("mb_mbfa")
def mb_mbfa(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    for r in rows(t, "ZREFUEL"):
        out.append(draft("refuel", f"ZREFUEL#{col(r, 'Z_PK', pos=0)}", F, epoch="apple_s",
                         start=col(r, "ZDATE", pos=1), fuel_liters=_num(col(r, "ZLITERS", pos=2)),
                         price=_num(col(r, "ZPRICE", pos=3)), lat=col(r, "ZLATITUDE", pos=4),
                         lon=col(r, "ZLONGITUDE", pos=5), mileage_km=_num(col(r, "ZODOMETER", pos=6))))
    for r in rows(t, "ZUSER"):
        out.append(draft("identity", f"ZUSER#{col(r, 'Z_PK', pos=0)}", U,
                         name=_name(col(r, "ZFIRSTNAME", pos=1), col(r, "ZLASTNAME", pos=2)),
                         email=col(r, "ZEMAIL", pos=3), date_of_birth=col(r, "ZBIRTHDATE", pos=4),
                         address=col(r, "ZADDRESS", pos=5)))
    for r in rows(t, "ZVEHICLE"):
        out.append(draft("vehicle_info", f"ZVEHICLE#{col(r, 'Z_PK', pos=0)}", C, vin=col(r, "ZVIN", pos=1),
                         model=col(r, "ZMODEL", pos=2), adapter_id=col(r, "ZADAPTERID", pos=3)))
    return out


_TILE_URL = re.compile(r"https?://[^\s\"'<>]+")


@decoder("volley_tiles")
def volley_tiles(art: Artifact) -> list[Draft]:
    urls = sorted(set(_TILE_URL.findall(_text_lines(art.data))))
    if not urls:
        return []
    return [draft("status_snapshot", "urls", snapshot="map_tiles_viewed", tile_count=len(urls), urls=urls)]


@decoder("mb_prefs")
def mb_prefs(art: Artifact) -> list[Draft]:
    p = _prefs(art)
    if not p.get("vin"):
        return []
    # VIN and adapter identifiers only; not credited as car info for this platform
    return [draft("vehicle_info", "prefs", vin=p.get("vin"), adapter_id=p.get("adapter_id"),
                  km_to_service=p.get("km_to_service"))]


# myOpel -------------------------------------------------------------------

@decoder("opel_logs")
def opel_logs(art: Artifact) -> list[Draft]:
    text = _text_lines(art.data)
    out = []
    if "/Documents/LogDirectory/" in art.path:
        for email in dict.fromkeys(_EMAIL.findall(text)):
            out.append(draft("identity", f"email:{email}", U, email=email))
    for vin in dict.fromkeys(v for v in _VIN_TOKEN.findall(text) if validate_vin(v).valid):
        out.append(draft("vehicle_info", f"vin:{vin}", C, vin=vin))
    return out


@decoder("opel_user_profile")
def opel_user_profile(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    ios = "ZUSERPROFILE" in t.tables
    users = rows(t, "ZUSERPROFILE") if ios else rows(t, "user_profile")
    for i, r in enumerate(users):
        out.append(draft("identity", f"user#{i}", U,
                         name=_name(col(r, "ZFIRSTNAME", "first_name", pos=1), col(r, "ZLASTNAME", "last_name", pos=2)),
                         email=col(r, "ZEMAIL", "email", pos=3), phone=col(r, "ZPHONE", "phone", pos=4)))
    dealers = rows(t, "ZDEALER") if ios else rows(t, "dealer")
    dealer = col(dealers[0], "ZNAME", "name", pos=1) if dealers else None
    for i, r in enumerate(rows(t, "ZVEHICLE") if ios else rows(t, "vehicle")):
        out.append(draft("vehicle_info", f"vehicle#{i}", C, vin=col(r, "ZVIN", "vin", pos=1),
                         model=col(r, "ZMODEL", "model", pos=2), dealer=dealer))
    return out


@decoder("opel_bta")
def opel_bta(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    for name, table in sorted(t.tables.items()):
        if not table.rows:
            out.append(draft("schema_present", f"table:{name}", table=name, columns=list(table.columns), row_count=0))
    for r in rows(t, "ZROUTE"):
        out.append(draft("trip", f"ZROUTE#{col(r, 'Z_PK', pos=0)}", D, epoch="apple_s",
                         start=col(r, "ZSTARTDATE", pos=1), end=col(r, "ZENDDATE", pos=2),
                         distance_m=_num(col(r, "ZDISTANCE", pos=3))))
    return out


@decoder("opel_bouser")
def opel_bouser(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    users = rows(t, "ZBOUSER") or rows(t, "bo_user")
    for i, r in enumerate(users):
        email, vin = col(r, "ZEMAIL", "email", pos=1), col(r, "ZVIN", "vin", pos=2)
        warranty = col(r, "ZWARRANTYEND", "warranty_end", pos=3)
        if email:
            out.append(draft("identity", f"bo_user#{i}", U, email=email))
        if vin:
            out.append(draft("vehicle_info", f"bo_user#{i}/vehicle", C, vin=vin, warranty_end=warranty))
    return out


@decoder("opel_prefs_plist")
def opel_prefs_plist(art: Artifact) -> list[Draft]:
    doc = read_plist(art.data)
    if not isinstance(doc, dict):
        return []
    out = []
    if doc.get("userEmail") or doc.get("userName"):
        out.append(draft("identity", "user", U, email=doc.get("userEmail"), name=doc.get("userName")))
    if doc.get("vin"):
        out.append(draft("vehicle_info", "vin", C, vin=doc["vin"]))
    loc = doc.get("lastPhoneLocation")
    if isinstance(loc, dict):
        out.append(draft("location_fix", "lastPhoneLocation", start=loc.get("timestamp"), lat=loc.get("latitude"),
                         lon=loc.get("longitude"), device="phone"))
    return out


@decoder("opel_prefs_xml")
def opel_prefs_xml(art: Artifact) -> list[Draft]:
    p = _prefs(art)
    out = []
    if p.get("user_email"):
        out.append(draft("identity", "user_email", U, email=p["user_email"]))
    if p.get("vin"):
        out.append(draft("vehicle_info", "vin", C, vin=p["vin"], units=p.get("settings_units")))
    return out


# OnStar -------------------------------------------------------------------

@decoder("onstar_gemini")
def onstar_gemini(art: Artifact) -> list[Draft]:
    try:
        doc = read_gzip_json(art.data)
    except NotGzip:
        doc = read_json(art.data)
    if not isinstance(doc, dict):
        return []
    out = []
    for i, v in enumerate(doc.get("vehicles") or []):
        if isinstance(v, dict):
            out.append(draft("vehicle_info", f"vehicles[{i}]", C, vin=v.get("vin"), make=v.get("make"),
                             model=v.get("model"), year=v.get("year")))
    prof = doc.get("profile")
    if isinstance(prof, dict):
        fields = dict(name=_name(prof.get("firstName"), prof.get("lastName")), email=prof.get("email"))
        if any(fields.values()):
            out.append(draft("identity", "profile", U, **fields))
    return out


@decoder("onstar_mylink")
def onstar_mylink(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    for i, r in enumerate(rows(t, "vehicles")):
        out.append(draft("vehicle_info", f"vehicles#{i}", C, vin=col(r, "vin", pos=0), make=col(r, "make", pos=1),
                         model=col(r, "model", pos=2), year=col(r, "year", pos=3)))
    for i, r in enumerate(rows(t, "vehicle_diagnostics")):
        out.append(draft("status_snapshot", f"vehicle_diagnostics#{i}", epoch="unix_ms",
                         start=col(r, "timestamp", pos=1), snapshot="diagnostics", vin=col(r, "vin", pos=0),
                         tire_pressure_kpa=[_num(col(r, k)) for k in ("tire_fl_kpa", "tire_fr_kpa",
                                                                      "tire_rl_kpa", "tire_rr_kpa")],
                         mileage_km=_num(col(r, "odometer_km", pos=6)), oil_life_pct=_num(col(r, "oil_life_pct"))))
    for name in ("parking_positions", "routes"):
        table = t.get(name)
        if table is not None and not table.rows:
            out.append(draft("schema_present", f"table:{name}", table=name, columns=list(table.columns), row_count=0))
    return out


# DriveMii -----------------------------------------------------------------

@decoder("drivemii_prefs_plist")
def drivemii_prefs_plist(art: Artifact) -> list[Draft]:
    doc = read_plist(art.data)
    vin = doc.get("pairedVehicleVIN") if isinstance(doc, dict) else None
    return [draft("vehicle_info", "pairedVehicleVIN", C, vin=vin)] if vin else []


@decoder("drivemii_prefs_xml")
def drivemii_prefs_xml(art: Artifact) -> list[Draft]:
    vin = _prefs(art).get("connected_vehicle_vin")
    return [draft("vehicle_info", "connected_vehicle_vin", C, vin=vin)] if vin else []


@decoder("drivemii_recuperation")
def drivemii_recuperation(art: Artifact) -> list[Draft]:
    return [draft("recuperation", f"ZRECUPERATIONHISTORY#{col(r, 'Z_PK', pos=0)}", D, epoch="apple_s",
                  start=col(r, "ZTIMESTAMP", pos=1), recuperated_wh=_num(col(r, "ZRECUPERATEDENERGY", pos=2)),
                  consumed_wh=_num(col(r, "ZCONSUMEDENERGY", pos=3)))
            for r in rows(art.tables(), "ZRECUPERATIONHISTORY")]


@decoder("drivemii_nav_db")
def drivemii_nav_db(art: Artifact) -> list[Draft]:
    # Only seen encrypted; a plaintext copy is reported by structure.
    return schema_only(art)


@decoder("drivemii_tlv")
def drivemii_tlv(art: Artifact) -> list[Draft]:
    return [draft("nav_destination", f"string#{i}", destination=s)
            for i, s in enumerate(read_tlv_mapsettings(art.data))]


# Seat Connect -------------------------------------------------------------

@decoder("seat_prefs_plist")
def seat_prefs_plist(art: Artifact) -> list[Draft]:
    doc = read_plist(art.data)
    if not isinstance(doc, dict):
        return []
    out = []
    fields = dict(email=doc.get("userEmail"), phone=doc.get("userPhone"), date_of_birth=doc.get("userBirthDate"))
    if any(fields.values()):
        out.append(draft("identity", "user", U, **fields))
    if doc.get("vin"):
        out.append(draft("vehicle_info", "vin", C, vin=doc["vin"]))
    if doc.get("lastLoginDate"):
        out.append(draft("status_snapshot", "lastLoginDate", start=doc["lastLoginDate"], snapshot="last_login",
                         device_model=doc.get("deviceModel"), os_version=doc.get("osVersion")))
    return out


@decoder("seat_modapp")
def seat_modapp(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    for i, r in enumerate(rows(t, "PersistentUser")):
        out.append(draft("identity", f"PersistentUser#{i}", U, email=col(r, "email", pos=1),
                         name=_name(col(r, "first_name", pos=2), col(r, "last_name", pos=3))))
    for i, r in enumerate(rows(t, "PersistentVehicleMetadata")):
        out.append(draft("vehicle_info", f"PersistentVehicleMetadata#{i}", C, vin=col(r, "vin", pos=0),
                         nickname=col(r, "nickname", pos=1), name=col(r, "name", pos=2)))
    return out


# Tesla --------------------------------------------------------------------

def _tesla_body(loc: str, body: Any) -> list[Draft]:
    if not isinstance(body, dict) or "response" not in body:
        return []
    resp = body["response"]
    if isinstance(resp, list):
        return [draft("vehicle_info", f"{loc}/response[{i}]", C, vin=v.get("vin"), name=v.get("display_name"),
                      vehicle_id=v.get("vehicle_id"), state=v.get("state"))
                for i, v in enumerate(resp) if isinstance(v, dict) and v.get("vin")]
    if not isinstance(resp, dict):
        return []
    if "email" in resp or "full_name" in resp:
        return [draft("identity", f"{loc}/response", U, email=resp.get("email"), name=resp.get("full_name"),
                      user_id=resp.get("user_id"))]
    ds, cs = resp.get("drive_state"), resp.get("charge_state")
    if isinstance(ds, dict) and resp.get("vin"):
        if ds.get("shift_state") in ("D", "R", "N"):
            return [draft("location_fix", f"{loc}/drive_state", D, epoch="unix_ms", start=ds.get("timestamp"),
                          lat=ds.get("latitude"), lon=ds.get("longitude"), speed_mph=_num(ds.get("speed")),
                          gear=ds.get("shift_state"), vin=resp.get("vin"))]
        climate = resp.get("climate_state") if isinstance(resp.get("climate_state"), dict) else {}
        charge = cs if isinstance(cs, dict) else {}
        vstate = resp.get("vehicle_state") if isinstance(resp.get("vehicle_state"), dict) else {}
        # gps_as_of is stored in seconds; left undeclared so the epoch is re-inferred
        return [draft("status_snapshot", f"{loc}/vehicle_data", R, start=ds.get("gps_as_of"),
                      snapshot="vehicle_status", lat=ds.get("latitude"), lon=ds.get("longitude"),
                      gear=ds.get("shift_state"), interior_temp_c=_num(climate.get("inside_temp")),
                      battery_level_pct=_num(charge.get("battery_level")), odometer_mi=_num(vstate.get("odometer")),
                      doors_locked=vstate.get("locked"), vin=resp.get("vin"))]
    if isinstance(ds, dict) and ds.get("shift_state") == "P":
        return [draft("parking", f"{loc}/drive_state", P, epoch="unix_ms", start=ds.get("timestamp"),
                      lat=ds.get("latitude"), lon=ds.get("longitude"))]
    if isinstance(cs, dict) and cs.get("charging_state") == "Complete":
        return [draft("refuel", f"{loc}/charge_state", F, epoch="unix_ms", start=cs.get("timestamp"),
                      energy_added_kwh=_num(cs.get("charge_energy_added")), battery_level_pct=_num(cs.get("battery_level")),
                      lat=cs.get("latitude"), lon=cs.get("longitude"))]
    return []


@decoder("tesla_api_json")
def tesla_api_json(art: Artifact) -> list[Draft]:
    out = []
    for loc, body in scan_json_bodies(art.data):
        out.extend(_tesla_body(loc, body))
    return out


@decoder("tesla_cache_db")
def tesla_cache_db(art: Artifact) -> list[Draft]:
    t = art.tables()
    urls = {col(r, "entry_ID", pos=0): col(r, "request_key", pos=4) for r in rows(t, "cfurl_cache_response")}
    out = []
    for r in rows(t, "cfurl_cache_receiver_data"):
        entry, on_fs, blob = col(r, "entry_ID", pos=0), col(r, "isDataOnFS", pos=1), col(r, "receiver_data", pos=2)
        if on_fs or blob is None:
            continue
        data = blob if isinstance(blob, bytes) else str(blob).encode("utf-8")
        for loc, body in scan_json_bodies(data):
            for d in _tesla_body(f"cfurl_cache_receiver_data#{entry}/{loc}", body):
                if urls.get(entry):
                    d.fields["url"] = urls[entry]
                out.append(d)
    return out


# We Connect Go ------------------------------------------------------------

@decoder("vw_avacar")
def vw_avacar(art: Artifact) -> list[Draft]:
    t = art.tables()
    out = []
    for r in rows(t, "vehicle"):
        out.append(draft("vehicle_info", f"vehicle#{col(r, 'id', pos=0)}", C, vin=col(r, "vin", pos=1),
                         model_code=col(r, "model_code", pos=2), model=col(r, "model_name", pos=3),
                         engine=col(r, "engine", pos=4), transmission=col(r, "transmission", pos=5)))
    for r in rows(t, "fuel_level"):
        out.append(draft("status_snapshot", f"fuel_level#{col(r, 'id', pos=0)}", epoch="unix_ms",
                         start=col(r, "timestamp", pos=1), snapshot="fuel_level",
                         fuel_level_pct=_num(col(r, "level_pct", pos=2))))
    for r in rows(t, "refuel"):
        out.append(draft("refuel", f"refuel#{col(r, 'id', pos=0)}", F, epoch="unix_ms",
                         start=col(r, "timestamp", pos=1), lat=col(r, "latitude", pos=2),
                         lon=col(r, "longitude", pos=3), fuel_ml=_num(col(r, "fuel_ml", pos=4)),
                         price=_num(col(r, "price", pos=5))))
    for r in rows(t, "trip"):
        out.append(draft("trip", f"trip#{col(r, 'id', pos=0)}", D, epoch="unix_ms",
                         start=col(r, "start_time", pos=1), end=col(r, "end_time", pos=2),
                         address_start=col(r, "start_address", pos=3), address_end=col(r, "end_address", pos=4),
                         lat=col(r, "start_lat", pos=5), lon=col(r, "start_lon", pos=6),
                         lat_end=col(r, "end_lat", pos=7), lon_end=col(r, "end_lon", pos=8),
                         distance_m=_num(col(r, "distance_m", pos=9))))
    for r in rows(t, "driving_event"):
        out.append(draft("status_snapshot", f"driving_event#{col(r, 'id', pos=0)}", epoch="unix_ms",
                         start=col(r, "timestamp", pos=1), snapshot="driving_event",
                         event_type=col(r, "type", pos=2), acceleration_mps2=_num(col(r, "value_mps2", pos=3)),
                         speed_kmh=_num(col(r, "velocity_kmh", pos=4))))
    for r in rows(t, "parking"):
        out.append(draft("parking", f"parking#{col(r, 'id', pos=0)}", P, epoch="unix_ms",
                         start=col(r, "timestamp", pos=1), lat=col(r, "latitude", pos=2),
                         lon=col(r, "longitude", pos=3)))
    for r in rows(t, "vehicle_position"):
        out.append(draft("location_fix", f"vehicle_position#{col(r, 'id', pos=0)}", R, epoch="unix_ms",
                         start=col(r, "timestamp", pos=1), lat=col(r, "latitude", pos=2),
                         lon=col(r, "longitude", pos=3)))
    return out


@decoder("vw_dataplug")
def vw_dataplug(art: Artifact) -> list[Draft]:
    return [draft("vehicle_info", f"ZDATAPLUG#{col(r, 'Z_PK', pos=0)}", C, adapter_id=col(r, "ZADAPTERID", pos=1),
                  adapter_name=col(r, "ZNAME", pos=2))
            for r in rows(art.tables(), "ZDATAPLUG")]
