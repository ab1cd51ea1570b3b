"""Render a scenario into the files each app would leave on a phone.

Paths and schemas are the fixture schemas documented in docs/schemas/.
Each renderer returns :class:`File` entries relative to the app container;
``residual`` marks files that survive a logout which otherwise wipes the
app's data.
"""

from __future__ import annotations

import base64
import hashlib
import math
from pathlib import Path
from typing import Callable, NamedTuple

from ..errors import UnknownApp
from ..registry import IOS_METADATA_PLIST, get_descriptor
from .matrix import STATES, AvailabilityMatrix, load_matrix
from .scenario import Scenario, container_uuid, midpoint, minute_marks, stable_rng
from .writers import (
    Db,
    apple_s,
    dt,
    gzip_bytes,
    iso,
    json_bytes,
    plist_bytes,
    prefs_xml,
    scramble,
    sqlite_bytes,
    tlv_bytes,
    unix_s,
)

IOS_ROOT = "/private/var/mobile/Containers/Data/Application"


class File(NamedTuple):
    path: str
    data: bytes
    residual: bool = False


class Rendering(NamedTuple):
    files: list[File]
    # what is left behind when a logout wipes the data
    stub: list[File]


def _first_last(s: Scenario) -> tuple[str, str]:
    first, _, last = s.user["name"].partition(" ")
    return first, last


def _scrambled(s: Scenario, label: str, data: bytes, encrypt: bool) -> bytes:
    if not encrypt:
        return data
    key = hashlib.sha256(f"vapp-fixture-key/{s.seed}/{label}".encode()).digest()
    return scramble(data, key)


def _webdata(s: Scenario, fields: list[tuple[str, str]]) -> bytes:
    created = unix_s(s.first_seen) - 86_400 * 30
    used = unix_s(s.first_seen)
    return sqlite_bytes(
        Db()
        .table("meta", "key LONGVARCHAR NOT NULL UNIQUE PRIMARY KEY, value LONGVARCHAR",
               [("version", "83"), ("last_compatible_version", "83")])
        .table("autofill", "name VARCHAR, value VARCHAR, value_lower VARCHAR, date_created INTEGER DEFAULT 0, "
                           "date_last_used INTEGER DEFAULT 0, count INTEGER DEFAULT 1, PRIMARY KEY (name, value)",
               [(k, v, v.lower(), created, used, 1) for k, v in fields])
    )


def _tiles(route, zoom: int = 15) -> list[str]:
    seen = []
    for p in route:
        n = 2 ** zoom
        x = int((p.lon + 180.0) / 360.0 * n)
        y = int((1.0 - math.asinh(math.tan(math.radians(p.lat))) / math.pi) / 2.0 * n)
        url = f"https://maps.googleapis.com/maps/vt?pb=!1m5!1m4!1i{zoom}!2i{x}!3i{y}!4i256"
        if url not in seen:
            seen.append(url)
    return seen


def _nav_actions(s: Scenario):
    return s.of("navigate", "send_trip")


# myAudi ------------------------------------------------------------------

def _myaudi_ios(s: Scenario, encrypt: bool) -> Rendering:
    db = Db()
    db.table("CostBookItem", "id INTEGER PRIMARY KEY, timestamp TEXT, amount REAL, price REAL, currency TEXT, "
                             "mileage REAL",
             [(i + 1, iso(a.t), a.liters, a.price, "EUR", a.odometer_km) for i, a in enumerate(s.refuels)])
    db.table("DriverLogItem", "id INTEGER PRIMARY KEY, startTime TEXT, endTime TEXT, startAddress TEXT, "
                              "destinationAddress TEXT, distance REAL",
             [(i + 1, iso(a.t), iso(a.end), a.address, a.end_address, round(a.distance_km, 3))
              for i, a in enumerate(s.drives)])
    db.table("SettingsItem", "key TEXT PRIMARY KEY, value TEXT",
             [("lastSync", iso(s.last_sync)), ("units", "metric")])
    return Rendering([File("Documents/maps.db", sqlite_bytes(db))],
                     [File("Documents/maps.db", sqlite_bytes(db.empty()))])


def _myaudi_android(s: Scenario, encrypt: bool) -> Rendering:
    rng = stable_rng(s, "myaudi", "android")
    db = Db()
    db.table("drivers_log_item", "id INTEGER PRIMARY KEY, start_time INTEGER, end_time INTEGER, "
                                 "start_address TEXT, destination_address TEXT, start_mileage REAL, end_mileage REAL",
             [(i + 1, a.t, a.end, a.address, a.end_address, a.odometer_km, round(a.odometer_km + a.distance_km, 1))
              for i, a in enumerate(s.drives)])
    db.table("cost_book_item", "id INTEGER PRIMARY KEY, timestamp INTEGER, price REAL, mileage REAL, "
                               "fuel_amount REAL",
             [(i + 1, a.t, a.price, a.odometer_km, a.liters) for i, a in enumerate(s.refuels)])
    files = [
        File("databases/audiMapsDatabase.db", sqlite_bytes(db)),
        File("files/vehicleList", json_bytes({"vehicles": [{
            "vin": s.vin, "modelName": s.vehicle["model"], "modelYear": s.vehicle["year"],
            "assistanceSystems": ["adaptive cruise control", "lane assist"]}]})),
        File("files/PERSISTENCE_KEY_USER_ACCOUNT", json_bytes({
            "userId": s.user["user_id"], "firstName": _first_last(s)[0], "lastName": _first_last(s)[1],
            "email": s.user["email"], "dateOfBirth": s.user["date_of_birth"]})),
    ]
    for i, a in enumerate(_nav_actions(s)):
        lat, lon = s.position_at(a.t)
        files.append(File(f"cache/DiskLruCache/GeoKitDecodedCoordinate/1/{i}", json_bytes({
            "start": {"latitude": round(lat, 6), "longitude": round(lon, 6)},
            "destination": {"latitude": a.lat, "longitude": a.lon}})))

    def cached(url: str, body: dict) -> File:
        name = hashlib.md5(url.encode()).hexdigest()
        header = b"WRMC\x00\x01" + url.encode() + b"\n\x00\x00"
        return File(f"cache/WebRequestManagerCache/{name}", header + gzip_bytes(json_bytes(body)))

    positions = []
    for a in s.drives:
        positions.append({"timestamp": iso(a.t), "lat": a.route[0].lat, "lon": a.route[0].lon})
        positions.append({"timestamp": iso(a.end), "lat": a.route[-1].lat, "lon": a.route[-1].lon})
    files.append(cached(f"https://msg.audi.de/api/vehicles/{s.vin}/positions", {"positions": positions}))
    locks = [{"timestamp": a.t, "action": a.kind.upper()} for a in s.of("lock", "unlock")]
    if locks:
        files.append(cached(f"https://msg.audi.de/api/vehicles/{s.vin}/rlu/actions", {"lockActions": locks}))
    files.append(cached(f"https://msg.audi.de/api/vehicles/{s.vin}/status", {
        "timestamp": s.last_sync, "doors": {"frontLeft": "closed", "frontRight": "closed", "trunk": "closed"},
        "mileage": s.odometer_at(s.last_sync), "nickname": s.vehicle["nickname"],
        "nextInspection": rng.randint(30, 400)}))
    return Rendering(files, [])


# my BMW ------------------------------------------------------------------

def _bmw_android(s: Scenario, encrypt: bool) -> Rendering:
    lat, lon = s.position_at(s.last_sync)
    doc = {
        "VehicleBloc": {"vin": s.vin, "modelName": "M140i", "constructionYear": s.vehicle["year"]},
        "VehicleStatusBloc": {
            "timestamp": iso(s.last_sync), "location": {"lat": round(lat, 6), "lon": round(lon, 6)},
            "doorsLocked": True, "upcomingServices": [{"type": "OIL", "dueKm": 4200}]},
    }
    return Rendering([File("app_flutter/.hydrated_bloc.json", json_bytes(doc))],
                     [File("app_flutter/.hydrated_bloc.json", json_bytes({}))])


def _bmw_ios(s: Scenario, encrypt: bool) -> Rendering:
    f = File("Library/Preferences/de.bmw.connected.mobile20.row.plist",
             plist_bytes({"lastAppVersion": "1.0.1", "onboardingDone": True}))
    return Rendering([f], [f])


# FordPass ----------------------------------------------------------------

def _ford_ios(s: Scenario, encrypt: bool) -> Rendering:
    lat, lon = s.position_at(s.last_sync)
    prefs = {
        "userId": s.user["user_id"],
        "refuelings": [{"date": dt(a.t), "liters": a.liters, "price": a.price,
                        "stationLatitude": a.lat, "stationLongitude": a.lon} for a in s.refuels],
        "lastKnownPosition": {"date": dt(s.last_sync), "latitude": round(lat, 6), "longitude": round(lon, 6),
                              "address": s.address_at(s.last_sync)},
        "parkingSpots": [{"date": dt(a.t), "latitude": a.lat, "longitude": a.lon,
                          "photo": base64.b64encode(a.photo).decode("ascii")} for a in s.of("save_parking")],
        "recentDestinations": [{"name": a.destination, "latitude": a.lat, "longitude": a.lon}
                               for a in _nav_actions(s)],
        "appLaunchCount": 7,
    }
    modules = ["SYNC 3", "FordPass Connect", "Remote Start"]
    files = [
        File("Documents/CoreData.sqlite", sqlite_bytes(Db().table(
            "ZVEHICLE", "Z_PK INTEGER PRIMARY KEY, Z_ENT INTEGER, Z_OPT INTEGER, ZVIN VARCHAR, ZMODELNAME VARCHAR, "
                        "ZNICKNAME VARCHAR, ZMODELYEAR INTEGER",
            [(1, 3, 1, s.vin, "Kuga", s.vehicle["nickname"], s.vehicle["year"])]))),
        File("Documents/CVCoreDataModel.sqlite", sqlite_bytes(Db().table(
            "ZMODULE", "Z_PK INTEGER PRIMARY KEY, ZVIN VARCHAR, ZNAME VARCHAR, ZINSTALLED INTEGER",
            [(i + 1, s.vin, m, 1) for i, m in enumerate(modules)]))),
        File(f"Documents/DigitalCoPilot/dataPoints/{s.vin}/snapshot", json_bytes(
            {"fuelLevel": {"value": 63.5, "timestamp": s.last_sync}})),
        File("Documents/DTX_8.183.1.1002.sqlite", sqlite_bytes(Db().table(
            "ZUSERACCOUNT", "Z_PK INTEGER PRIMARY KEY, ZEMAIL VARCHAR", [(1, s.user["email"])]))),
        File("Library/Preferences/com.ford.fordpasseu.plist", plist_bytes(prefs, binary=True)),
    ]
    return Rendering(files, [File("Library/Preferences/com.ford.fordpasseu.plist",
                                  plist_bytes({"appLaunchCount": 7}, binary=True))])


def _ford_android(s: Scenario, encrypt: bool) -> Rendering:
    first, last = _first_last(s)
    rng = stable_rng(s, "fordpass", "android")
    files = [
        File("databases/NGSDN_DATABASE", sqlite_bytes(Db().table(
            "vehicle", "vin TEXT PRIMARY KEY, vehicle_name TEXT, model_year INTEGER, nickname TEXT",
            [(s.vin, "Ford Kuga Titanium", s.vehicle["year"], s.vehicle["nickname"])]))),
        File("databases/VIN_DETAILS_LOOKUP", sqlite_bytes(Db().table(
            "vin_details", "vin TEXT PRIMARY KEY, engine TEXT, transmission TEXT, warranty_end TEXT, "
                           "emission_class TEXT",
            [(s.vin, s.vehicle["engine"], s.vehicle["transmission"], "2023-06-30", "Euro 6")]))),
        File("databases/TRIP_DATABASE", sqlite_bytes(
            Db().table("trip_destinations", "id INTEGER PRIMARY KEY, name TEXT, latitude REAL, longitude REAL, "
                                            "timestamp INTEGER")
                .table("vehicle_locations", "id INTEGER PRIMARY KEY, latitude REAL, longitude REAL, "
                                            "timestamp INTEGER"))),
        File("shared_prefs/com.ford.fordpasseu_preferences.xml", prefs_xml({
            "user_email": s.user["email"], "user_first_name": first, "user_last_name": last, "vin": s.vin,
            "onboarding_complete": True})),
        File("shared_prefs/com.humanify.expertconnect.SHARED_PREFS.xml", prefs_xml({
            "expertconnect_user_name": s.user["name"], "expertconnect_email": s.user["email"]})),
        File("shared_prefs/encryptedValues.xml", prefs_xml({
            "access_token": base64.b64encode(rng.randbytes(48)).decode("ascii")})),
        File("shared_prefs/pinValues.xml", prefs_xml({
            "pin_salt": rng.randbytes(16).hex(), "pin_hash": hashlib.sha256(rng.randbytes(8)).hexdigest()})),
    ]
    return Rendering(files, [File("shared_prefs/com.ford.fordpasseu_preferences.xml",
                                  prefs_xml({"onboarding_complete": True}))])


# Mercedes me -------------------------------------------------------------

def _mb_logbook(s: Scenario) -> Db:
    trips, points, parked = [], [], []
    pk = 0
    for i, a in enumerate(s.drives):
        trips.append((i + 1, apple_s(a.t), apple_s(a.end), a.address, a.end_address,
                      round(a.distance_km * 1000.0, 1), s.vin))
        for p in a.route:
            pk += 1
            points.append((pk, i + 1, apple_s(p.t), p.lat, p.lon, p.speed_kmh))
        parked.append((i + 1, apple_s(a.end), a.route[-1].lat, a.route[-1].lon, a.end_address))
    return (Db()
            .table("ZDLCOREDATRIP", "Z_PK INTEGER PRIMARY KEY, ZSTARTDATE TIMESTAMP, ZENDDATE TIMESTAMP, "
                                    "ZSTARTADDRESS VARCHAR, ZDESTINATIONADDRESS VARCHAR, ZDISTANCE FLOAT, ZVIN VARCHAR",
                   trips)
            .table("ZDLCOREDATRACKPOINTS", "Z_PK INTEGER PRIMARY KEY, ZTRIP INTEGER, ZTIMESTAMP TIMESTAMP, "
                                           "ZLATITUDE FLOAT, ZLONGITUDE FLOAT, ZSPEED FLOAT", points)
            .table("ZDLCOREDAPARKEDVEHICLE", "Z_PK INTEGER PRIMARY KEY, ZTIMESTAMP TIMESTAMP, ZLATITUDE FLOAT, "
                                             "ZLONGITUDE FLOAT, ZADDRESS VARCHAR", parked))


def _mb_mbfa(s: Scenario, with_user: bool = True) -> Db:
    first, last = _first_last(s)
    db = Db().table("ZREFUEL", "Z_PK INTEGER PRIMARY KEY, ZDATE TIMESTAMP, ZLITERS FLOAT, ZPRICE FLOAT, "
                               "ZLATITUDE FLOAT, ZLONGITUDE FLOAT, ZODOMETER FLOAT",
                    [(i + 1, apple_s(a.t), a.liters, a.price, a.lat, a.lon, a.odometer_km)
                     for i, a in enumerate(s.refuels)])
    if with_user:
        db.table("ZUSER", "Z_PK INTEGER PRIMARY KEY, ZFIRSTNAME VARCHAR, ZLASTNAME VARCHAR, ZEMAIL VARCHAR, "
                          "ZBIRTHDATE VARCHAR, ZADDRESS VARCHAR",
                 [(1, first, last, s.user["email"], s.user["date_of_birth"], s.user["address"])])
    db.table("ZVEHICLE", "Z_PK INTEGER PRIMARY KEY, ZVIN VARCHAR, ZMODEL VARCHAR, ZADAPTERID VARCHAR",
             [(1, s.vin, "C 220 d", s.vehicle["adapter_id"])])
    return db


def _mb_ios(s: Scenario, encrypt: bool) -> Rendering:
    folder = hashlib.md5(s.user["email"].encode()).hexdigest()
    last = s.drives[-1]
    lat, lon = s.position_at(s.last_sync)
    files = [
        File(f"Documents/{folder}/000000000000", json_bytes(
            {"lastTrip": {"distance": round(last.distance_km * 1000.0, 1), "end": last.end}})),
        File("Documents/live.json", json_bytes({"timestamp": s.last_sync, "values": {
            "latitude": round(lat, 6), "longitude": round(lon, 6), "odometer_km": s.odometer_at(s.last_sync),
            "range_km": 512, "tank_pct": 61}})),
        File("Documents/DriverLogbook.sqlite", sqlite_bytes(_mb_logbook(s))),
        File("Library/Application Support/Live/MBFA", sqlite_bytes(_mb_mbfa(s))),
    ]
    return Rendering(files, [])


def _mb_android(s: Scenario, encrypt: bool) -> Rendering:
    files = [
        File("databases/driverlogbookDatabase.db",
             _scrambled(s, "driverlogbook", sqlite_bytes(_mb_logbook(s)), encrypt)),
        File("databases/mbfa.db", _scrambled(s, "mbfa", sqlite_bytes(_mb_mbfa(s, with_user=False)), encrypt)),
        File("app_webview/Web Data", _webdata(s, [("name", s.user["name"]), ("email", s.user["email"]),
                                                  ("street-address", s.user["address"])])),
        File("shared_prefs/com.daimler.mbfa.android_preferences.xml", prefs_xml({
            "vin": s.vin, "adapter_id": s.vehicle["adapter_id"], "km_to_service": 8400})),
    ]
    for i, a in enumerate(s.drives):
        text = "\n".join(_tiles(a.route)) + "\n"
        name = hashlib.md5(f"{s.seed}/tiles/{i}".encode()).hexdigest()
        files.append(File(f"cache/volley/{name}", text.encode("utf-8")))
    for i, a in enumerate(s.of("save_parking")):
        files.append(File(f"resources/parking_{i}.jpg", a.photo))
    return Rendering(files, [])


# myOpel ------------------------------------------------------------------

def _opel_ios(s: Scenario, encrypt: bool) -> Rendering:
    first, last = _first_last(s)
    lat, lon = s.position_at(s.last_sync)
    log = (f"2020-11-02 07:00:01.204 [INFO] session restored for {s.user['email']}\n"
           f"2020-11-02 07:00:02.911 [DEBUG] vehicle list: [{s.vin}]\n"
           "2020-11-02 07:00:03.017 [DEBUG] refresh finished\n")
    files = [
        File("Documents/LogDirectory/com.psa.myopel/com.psa.myopel 2020-11-02--07-00-00-000.log",
             log.encode("utf-8")),
        File("Documents/UserProfileModel.sqlite", sqlite_bytes(
            Db().table("ZUSERPROFILE", "Z_PK INTEGER PRIMARY KEY, ZFIRSTNAME VARCHAR, ZLASTNAME VARCHAR, "
                                       "ZEMAIL VARCHAR, ZPHONE VARCHAR",
                       [(1, first, last, s.user["email"], s.user["phone"])])
                .table("ZVEHICLE", "Z_PK INTEGER PRIMARY KEY, ZVIN VARCHAR, ZMODEL VARCHAR",
                       [(1, s.vin, "Astra K")])
                .table("ZDEALER", "Z_PK INTEGER PRIMARY KEY, ZNAME VARCHAR, ZCITY VARCHAR",
                       [(1, "Autohaus Münster", "Münster")]))),
        File("Documents/BTAModel.sqlite", sqlite_bytes(
            Db().table("ZROUTE", "Z_PK INTEGER PRIMARY KEY, ZSTARTDATE TIMESTAMP, ZENDDATE TIMESTAMP, "
                                 "ZDISTANCE FLOAT")
                .table("ZROUTEPOINT", "Z_PK INTEGER PRIMARY KEY, ZROUTE INTEGER, ZTIMESTAMP TIMESTAMP, "
                                      "ZLATITUDE FLOAT, ZLONGITUDE FLOAT"))),
        File("Documents/BOUserMyMarqueModel.sqlite", sqlite_bytes(Db().table(
            "ZBOUSER", "Z_PK INTEGER PRIMARY KEY, ZEMAIL VARCHAR, ZVIN VARCHAR, ZWARRANTYEND VARCHAR",
            [(1, s.user["email"], s.vin, "2022-03-31")]))),
        File("Library/Preferences/com.psa.myopel.plist", plist_bytes({
            "userEmail": s.user["email"], "userName": s.user["name"], "vin": s.vin,
            "lastPhoneLocation": {"latitude": round(lat, 6), "longitude": round(lon, 6),
                                  "timestamp": dt(s.last_sync)}}, binary=True)),
    ]
    return Rendering(files, [])


def _opel_android(s: Scenario, encrypt: bool) -> Rendering:
    first, last = _first_last(s)
    log = (f"11-02 07:00:02.118  I/VehicleRepository: selected vehicle {s.vin}\n"
           "11-02 07:00:02.301  D/Network: GET /me/vehicles 200\n")
    files = [
        File("cache/logs/app-2020-11-02.log", log.encode("utf-8")),
        File("database/BOUserMymarque.db", sqlite_bytes(Db().table(
            "bo_user", "id INTEGER PRIMARY KEY, email TEXT, vin TEXT, warranty_end TEXT",
            [(1, s.user["email"], s.vin, "2022-03-31")]))),
        File("database/UserProfile.db", sqlite_bytes(
            Db().table("user_profile", "id INTEGER PRIMARY KEY, first_name TEXT, last_name TEXT, email TEXT, "
                                       "phone TEXT", [(1, first, last, s.user["email"], s.user["phone"])])
                .table("vehicle", "id INTEGER PRIMARY KEY, vin TEXT, model TEXT", [(1, s.vin, "Astra K")])
                .table("dealer", "id INTEGER PRIMARY KEY, name TEXT, city TEXT",
                       [(1, "Autohaus Münster", "Münster")]))),
        File("database/CarProtocolStrategy.db", sqlite_bytes(Db().table(
            "car_positions", "id INTEGER PRIMARY KEY, latitude REAL, longitude REAL, timestamp INTEGER"))),
        File("database/LocalisationSmartphone.db", sqlite_bytes(Db().table(
            "smartphone_locations", "id INTEGER PRIMARY KEY, latitude REAL, longitude REAL, timestamp INTEGER"))),
        File("database/SmartAppsV1.db", sqlite_bytes(Db().table(
            "coordinates", "id INTEGER PRIMARY KEY, latitude REAL, longitude REAL"))),
        File("database/SmartAppsV2.db", sqlite_bytes(Db().table(
            "coordinates", "id INTEGER PRIMARY KEY, latitude REAL, longitude REAL, altitude REAL"))),
        File("shared_prefs/com.psa.mym.myopel_preferences.xml", prefs_xml({
            "user_email": s.user["email"], "vin": s.vin, "settings_units": "metric", "push_enabled": True})),
    ]
    return Rendering(files, [])


# OnStar ------------------------------------------------------------------

def _onstar_android(s: Scenario, encrypt: bool) -> Rendering:
    first, last = _first_last(s)
    gemini = {"vehicles": [{"vin": s.vin, "make": "Opel", "model": "Astra K", "year": s.vehicle["year"]}],
              "profile": {"firstName": first, "lastName": last, "email": s.user["email"]}}
    mylink = (
        Db().table("vehicles", "vin TEXT PRIMARY KEY, make TEXT, model TEXT, year INTEGER",
                   [(s.vin, "Opel", "Astra K", s.vehicle["year"])])
        .table("vehicle_diagnostics", "vin TEXT, timestamp INTEGER, tire_fl_kpa REAL, tire_fr_kpa REAL, "
                                      "tire_rl_kpa REAL, tire_rr_kpa REAL, odometer_km REAL, oil_life_pct INTEGER",
               [(s.vin, s.last_sync, 240.0, 238.0, 250.0, 251.0, s.odometer_at(s.last_sync), 72)])
        .table("parking_positions", "id INTEGER PRIMARY KEY, timestamp INTEGER, latitude REAL, longitude REAL")
        .table("routes", "id INTEGER PRIMARY KEY, start_time INTEGER, end_time INTEGER, polyline TEXT")
    )
    files = [
        File("cache/GeminiCache/16d8b336686532339c0e35c784c68215.1", gzip_bytes(json_bytes(gemini))),
        File("databases/mylink", sqlite_bytes(mylink)),
    ]
    return Rendering(files, [])


def _onstar_ios(s: Scenario, encrypt: bool) -> Rendering:
    f = File("Library/Preferences/com.gme.opel.owner.plist", plist_bytes({"hasSeenTutorial": True}))
    return Rendering([f], [f])


# DriveMii ----------------------------------------------------------------

def _recuperation(s: Scenario) -> Db:
    rng = stable_rng(s, "drivemii", "recuperation")
    rows = []
    for a in s.drives:
        for t in minute_marks(a):
            rows.append((len(rows) + 1, 4, 1, apple_s(t), round(rng.uniform(5, 60), 1),
                         round(rng.uniform(120, 260), 1)))
    return Db().table("ZRECUPERATIONHISTORY", "Z_PK INTEGER PRIMARY KEY, Z_ENT INTEGER, Z_OPT INTEGER, "
                                              "ZTIMESTAMP TIMESTAMP, ZRECUPERATEDENERGY FLOAT, ZCONSUMEDENERGY FLOAT",
                      rows)


def _nav_dbs(s: Scenario) -> dict[str, Db]:
    favs = [(i + 1, a.destination, a.lat, a.lon) for i, a in enumerate(_nav_actions(s))]
    points = [(i + 1, 1, p.lat, p.lon, unix_s(p.t)) for i, p in enumerate(s.drives[0].route)]
    return {
        "fav/locations.sqlite": Db().table("locations", "id INTEGER PRIMARY KEY, name TEXT, lat REAL, lon REAL",
                                           favs),
        "fav/markers.sqlite": Db().table("markers", "id INTEGER PRIMARY KEY, label TEXT, lat REAL, lon REAL",
                                         [(1, "Home", s.start_lat, s.start_lon)]),
        "itn/itineraries.sqlite": Db().table("itineraries", "id INTEGER PRIMARY KEY, name TEXT, created INTEGER",
                                             [(1, "Route", unix_s(s.first_seen))]),
        "tracks/tracks.sqlite": Db().table("trackpoints", "id INTEGER PRIMARY KEY, track INTEGER, lat REAL, "
                                                          "lon REAL, ts INTEGER", points),
    }


def _drivemii(s: Scenario, encrypt: bool, ios: bool) -> Rendering:
    home = "Library/Application Support/com.seat.connectedcar.drivemii/home" if ios else "files/home"
    tlv_name = "DE_AT_CH_MapSettings_.tlv" if ios else "DE_AT_CH-1026 66_MapSettings_.tlv"
    files = []
    if ios:
        files.append(File("Library/Preferences/com.seat.connectedcar.drivemii.plist",
                          plist_bytes({"pairedVehicleVIN": s.vin, "lastVehicleConnection": dt(s.last_sync)})))
        files.append(File("Documents/ElectricalService.sql", sqlite_bytes(_recuperation(s))))
    else:
        files.append(File("shared_prefs/App4EntryPrefs.xml", prefs_xml({
            "connected_vehicle_vin": s.vin, "icon_order": ["nav", "phone", "media", "car"]})))
        files.append(File("databases/ElectricalService.sql", sqlite_bytes(_recuperation(s))))
    for rel, db in _nav_dbs(s).items():
        files.append(File(f"{home}/{rel}", _scrambled(s, f"drivemii/{rel}", sqlite_bytes(db), encrypt)))
    dests = [a.destination for a in _nav_actions(s)]
    if dests:
        files.append(File(f"{home}/{tlv_name}", tlv_bytes(dests, s.seed)))
    return Rendering(files, [])


# Seat Connect ------------------------------------------------------------

def _seat_ios(s: Scenario, encrypt: bool) -> Rendering:
    doc = {"lastLoginDate": dt(s.first_seen), "vin": s.vin, "deviceModel": "iPhone12,8", "osVersion": "14.2",
           "userPhone": s.user["phone"], "userBirthDate": s.user["date_of_birth"], "userEmail": s.user["email"]}
    return Rendering([File("Library/Preferences/com.seat.connectedcar.mod3connectapp.plist", plist_bytes(doc))], [])


def _seat_android(s: Scenario, encrypt: bool) -> Rendering:
    first, last = _first_last(s)
    files = [
        File("app_webview/Default/Web Data", _webdata(s, [("email", s.user["email"])])),
        File("databases/ModAppDatabase.db", sqlite_bytes(
            Db().table("PersistentUser", "id TEXT PRIMARY KEY, email TEXT, first_name TEXT, last_name TEXT",
                       [(s.user["user_id"], s.user["email"], first, last)])
                .table("PersistentVehicleMetadata", "vin TEXT PRIMARY KEY, nickname TEXT, name TEXT",
                       [(s.vin, s.vehicle["nickname"], "SEAT Mii electric Plus")]))),
    ]
    return Rendering(files, [])


# Tesla -------------------------------------------------------------------

def _tesla_bodies(s: Scenario, android: bool) -> list[tuple[str, dict]]:
    """(url, body) pairs of the API responses the app caches."""
    api = "https://owner-api.teslamotors.com/api/1"
    lat, lon = s.position_at(s.last_sync)
    climate = s.of("climate")
    bodies = [
        (f"{api}/vehicles", {"count": 1, "response": [{
            "id": 1000 + s.seed % 1000, "vehicle_id": 2000 + s.seed % 1000, "vin": s.vin,
            "display_name": s.vehicle["nickname"], "state": "online"}]}),
        (f"{api}/users/me", {"response": {"email": s.user["email"], "full_name": s.user["name"]}}),
        (f"{api}/vehicles/1/vehicle_data", {"response": {
            "vin": s.vin,
            "drive_state": {"latitude": round(lat, 6), "longitude": round(lon, 6), "gps_as_of": unix_s(s.last_sync),
                            "timestamp": s.last_sync, "shift_state": None, "speed": None},
            "climate_state": {"inside_temp": climate[-1].temp_c if climate else 19.5},
            "charge_state": {"battery_level": 78},
            "vehicle_state": {"odometer": round(s.odometer_at(s.last_sync) / 1.609344, 3), "locked": True}}}),
    ]
    for i, a in enumerate(s.drives):
        end = a.route[-1]
        bodies.append((f"{api}/vehicles/1/data_request/drive_state?p={i}", {"response": {"drive_state": {
            "shift_state": "P", "latitude": end.lat, "longitude": end.lon, "timestamp": a.end}}}))
        if android:
            mid = midpoint(a)
            bodies.append((f"{api}/vehicles/1/vehicle_data?d={i}", {"response": {"vin": s.vin, "drive_state": {
                "shift_state": "D", "speed": round(mid.speed_kmh / 1.609344, 1), "latitude": mid.lat,
                "longitude": mid.lon, "timestamp": mid.t, "gps_as_of": unix_s(mid.t)}}}))
    for i, a in enumerate(s.refuels):
        bodies.append((f"{api}/vehicles/1/data_request/charge_state?c={i}", {"response": {"charge_state": {
            "charging_state": "Complete", "timestamp": a.t, "charge_energy_added": round(a.liters * 0.9, 2),
            "battery_level": 90, "latitude": a.lat, "longitude": a.lon}}}))
    return bodies


def _tesla_ios(s: Scenario, encrypt: bool) -> Rendering:
    caches = "Library/Caches/com.teslamotors.TeslaApp"
    responses, receiver, files = [], [], []
    for i, (url, body) in enumerate(_tesla_bodies(s, android=False)):
        entry = i + 1
        responses.append((entry, 0, entry * 7919, 0, url,
                          iso(s.last_sync).replace("T", " ").rstrip("Z"), None))
        if i < 2:
            receiver.append((entry, 0, json_bytes(body)))
        else:
            name = str(container_uuid(s.seed, f"tesla-fs-{i}"))
            receiver.append((entry, 1, name.encode()))
            files.append(File(f"{caches}/fsCachedData/{name}", json_bytes(body)))
    db = (Db()
          .table("cfurl_cache_response", "entry_ID INTEGER PRIMARY KEY AUTOINCREMENT, version INTEGER, "
                                         "hash_value INTEGER, storage_policy INTEGER, request_key TEXT UNIQUE, "
                                         "time_stamp TIMESTAMP NOT NULL DEFAULT CURRENT_TIMESTAMP, partition TEXT",
                 responses)
          .table("cfurl_cache_receiver_data", "entry_ID INTEGER PRIMARY KEY, isDataOnFS INTEGER, "
                                              "receiver_data BLOB", receiver))
    files.insert(0, File(f"{caches}/Cache.db", sqlite_bytes(db)))
    return Rendering(files, [])


def _tesla_android(s: Scenario, encrypt: bool) -> Rendering:
    files = [File("app_webview/Web Data", _webdata(s, [("email", s.user["email"])]))]
    for url, body in _tesla_bodies(s, android=True):
        key = hashlib.md5(url.encode()).hexdigest()
        meta = f"{url}\nGET\n0\nHTTP/1.1 200 OK\n3\ncontent-type: application/json\n".encode()
        payload = json_bytes(body)
        if "vehicle_data" in url:
            payload = gzip_bytes(payload)
        files.append(File(f"cache/http-cache/{key}.0", meta))
        files.append(File(f"cache/http-cache/{key}.1", payload))
    return Rendering(files, [])


# We Connect Go -----------------------------------------------------------

def _avacar(s: Scenario) -> Db:
    rng = stable_rng(s, "weconnect_go", "avacar")
    fuel, trips, events, parking = [], [], [], []
    for i, a in enumerate(s.drives):
        fuel.append((i + 1, a.end, round(rng.uniform(20, 90), 1)))
        first, last = a.route[0], a.route[-1]
        trips.append((i + 1, a.t, a.end, a.address, a.end_address, first.lat, first.lon, last.lat, last.lon,
                      round(a.distance_km * 1000.0, 1)))
        events.append((2 * i + 1, a.t + 60_000, "acceleration", round(rng.uniform(2.5, 4.0), 2),
                       round(rng.uniform(30, 60), 1)))
        events.append((2 * i + 2, a.end - 60_000, "braking", round(-rng.uniform(3.0, 5.0), 2),
                       round(rng.uniform(20, 50), 1)))
        parking.append((i + 1, a.end, last.lat, last.lon))
    lat, lon = s.position_at(s.last_sync)
    return (Db()
            .table("vehicle", "id INTEGER PRIMARY KEY, vin TEXT, model_code TEXT, model_name TEXT, engine TEXT, "
                              "transmission TEXT",
                   [(1, s.vin, "5N2", "Tiguan", s.vehicle["engine"], s.vehicle["transmission"])])
            .table("fuel_level", "id INTEGER PRIMARY KEY, timestamp INTEGER, level_pct REAL", fuel)
            .table("refuel", "id INTEGER PRIMARY KEY, timestamp INTEGER, latitude REAL, longitude REAL, "
                             "fuel_ml INTEGER, price REAL",
                   [(i + 1, a.t, a.lat, a.lon, int(round(a.liters * 1000)), a.price)
                    for i, a in enumerate(s.refuels)])
            .table("trip", "id INTEGER PRIMARY KEY, start_time INTEGER, end_time INTEGER, start_address TEXT, "
                           "end_address TEXT, start_lat REAL, start_lon REAL, end_lat REAL, end_lon REAL, "
                           "distance_m REAL", trips)
            .table("driving_event", "id INTEGER PRIMARY KEY, timestamp INTEGER, type TEXT, value_mps2 REAL, "
                                    "velocity_kmh REAL", events)
            .table("parking", "id INTEGER PRIMARY KEY, timestamp INTEGER, latitude REAL, longitude REAL", parking)
            .table("vehicle_position", "id INTEGER PRIMARY KEY, timestamp INTEGER, latitude REAL, longitude REAL",
                   [(1, s.last_sync, round(lat, 6), round(lon, 6))]))


def _wcg(s: Scenario, encrypt: bool, ios: bool) -> Rendering:
    db = _avacar(s)
    if not ios:
        return Rendering([File("database/avacar.db", sqlite_bytes(db))],
                         [File("database/avacar.db", sqlite_bytes(db.empty()))])
    files = [File("Documents/avacar.db", sqlite_bytes(db))]
    for i, a in enumerate(s.of("save_parking")):
        files.append(File(f"Documents/.avacar_SUPPORT/_EXTERNAL_DATA/{container_uuid(s.seed, f'photo-{i}')}",
                          a.photo, residual=True))
    files.append(File("Documents/VW_DataPlug_2_1_ClientURLTranslation_5_1.sqlite3", sqlite_bytes(Db().table(
        "ZDATAPLUG", "Z_PK INTEGER PRIMARY KEY, ZADAPTERID VARCHAR, ZNAME VARCHAR",
        [(1, s.vehicle["adapter_id"], "DataPlug")])), residual=True))
    return Rendering(files, [])


RENDERERS: dict[tuple[str, str], Callable[[Scenario, bool], Rendering]] = {
    ("myaudi", "ios"): _myaudi_ios,
    ("myaudi", "android"): _myaudi_android,
    ("my_bmw", "android"): _bmw_android,
    ("my_bmw", "ios"): _bmw_ios,
    ("fordpass", "ios"): _ford_ios,
    ("fordpass", "android"): _ford_android,
    ("mercedes", "ios"): _mb_ios,
    ("mercedes", "android"): _mb_android,
    ("myopel", "ios"): _opel_ios,
    ("myopel", "android"): _opel_android,
    ("onstar", "android"): _onstar_android,
    ("onstar", "ios"): _onstar_ios,
    ("drivemii", "ios"): lambda s, e: _drivemii(s, e, ios=True),
    ("drivemii", "android"): lambda s, e: _drivemii(s, e, ios=False),
    ("seat_connect", "ios"): _seat_ios,
    ("seat_connect", "android"): _seat_android,
    ("tesla", "ios"): _tesla_ios,
    ("tesla", "android"): _tesla_android,
    ("weconnect_go", "ios"): lambda s, e: _wcg(s, e, ios=True),
    ("weconnect_go", "android"): lambda s, e: _wcg(s, e, ios=False),
}


def container_root(seed: int, app_id: str, platform: str) -> str:
    desc = get_descriptor(app_id, platform)
    if platform == "android":
        return f"/data/data/{desc.identifier}"
    return f"{IOS_ROOT}/{container_uuid(seed, app_id)}"


def _ios_metadata(identifier: str) -> bytes:
    return plist_bytes({"MCMMetadataIdentifier": identifier, "MCMMetadataContentClass": 2,
                        "MCMMetadataUUID": hashlib.md5(identifier.encode()).hexdigest().upper()})


def render_files(scenario: Scenario, app_id: str, platform: str, state: str,
                 matrix: AvailabilityMatrix | None = None, *, encrypt: bool = True) -> dict[str, bytes]:
    """Device-absolute path -> bytes for one app in one account state.

    ``encrypt=False`` writes the databases an app normally encrypts as
    plaintext, for checking that only genuinely scrambled files get flagged.
    """
    if (app_id, platform) not in RENDERERS:
        raise UnknownApp(f"{app_id}/{platform}")
    if state not in STATES:
        raise ValueError(f"unknown account state {state!r}")
    if state == "uninstalled":
        return {}
    matrix = matrix or load_matrix()
    rendering = RENDERERS[(app_id, platform)](scenario, encrypt)
    if matrix.retains(app_id, platform, state):
        files = rendering.files
    else:
        files = [f for f in rendering.files if f.residual] + list(rendering.stub)
    root = container_root(scenario.seed, app_id, platform)
    out = {f"{root}/{f.path}": f.data for f in files}
    desc = get_descriptor(app_id, platform)
    if platform == "ios" and desc.identifier:
        out[f"{root}/{IOS_METADATA_PLIST}"] = _ios_metadata(desc.identifier)
    return dict(sorted(out.items()))


def write_tree(files: dict[str, bytes], out: str | Path) -> list[Path]:
    out = Path(out)
    written = []
    for device_path, data in files.items():
        target = out / device_path.lstrip("/")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        written.append(target)
    return written
