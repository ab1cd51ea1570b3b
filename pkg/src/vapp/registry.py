"""Static catalog of the supported vehicle assistant apps.

Each (app, platform) pair gets an :class:`AppDescriptor` listing the marker
paths that identify its container and the artifact specs the extractors
apply. The catalog can be exported to JSON and overridden from a JSON
document, so field updates do not need a rebuild.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

from .errors import UnknownApp, VappError

PLATFORMS = ("android", "ios")
FORMATS = (
    "sqlite",
    "plist",
    "json",
    "xml_prefs",
    "gzip_json",
    "tlv_mapsettings",
    "base64_image_field",
    "text_log",
    "image",
)
EVENT_KINDS = (
    "trip",
    "refuel",
    "parking",
    "lock_state",
    "location_fix",
    "status_snapshot",
    "identity",
    "vehicle_info",
    "nav_destination",
    "recuperation",
    "encrypted_artifact",
    "schema_present",
)
CATEGORIES = ("drive_log", "recent_location", "parking", "refueling", "user_info", "car_info")

ANDROID_ROOTS = ("/data/data/", "/data/user/0/")
IOS_ROOTS = ("/private/var/mobile/Containers/Data/Application/", "/var/mobile/Containers/Data/Application/")
IOS_METADATA_PLIST = ".com.apple.mobile_container_manager.metadata.plist"


@dataclass(frozen=True)
class ArtifactSpec:
    relative_path_pattern: str
    format: str
    yields: tuple[str, ...]
    reference: str
    decoder: str
    # categories credited to this file when it turns out to be encrypted
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"unknown format {self.format!r}")
        bad = set(self.yields) - set(EVENT_KINDS)
        if bad:
            raise ValueError(f"unknown event kinds {sorted(bad)}")
        if not self.reference:
            raise ValueError("artifact spec without reference")

    def matches(self, relative_path: str) -> bool:
        return compile_pattern(self.relative_path_pattern).fullmatch(relative_path) is not None


@dataclass(frozen=True)
class AppDescriptor:
    app_id: str
    display_name: str
    platform: str
    package_or_bundle_markers: tuple[str, ...]
    artifact_specs: tuple[ArtifactSpec, ...]
    tested_version: str
    vehicle: str = ""
    # Android package name or iOS bundle identifier, when one is known
    identifier: str | None = None

    @property
    def key(self) -> tuple[str, str]:
        return self.app_id, self.platform

    def is_definitive_marker(self, marker: str) -> bool:
        """Markers naming the package or bundle id identify the app outright."""
        return self.identifier is not None and self.identifier in marker


@lru_cache(maxsize=512)
def compile_pattern(pattern: str) -> re.Pattern:
    """Translate a container-relative glob to a regex.

    ``**`` spans directories, ``*`` and ``?`` stay within one path
    component, ``[...]`` is a character class and ``{a,b}`` alternates.
    """
    out = []
    i, n = 0, len(pattern)
    depth = 0
    while i < n:
        c = pattern[i]
        if c == "*":
            if pattern.startswith("**/", i):
                out.append("(?:.*/)?")
                i += 3
                continue
            if pattern.startswith("**", i):
                out.append(".*")
                i += 2
                continue
            out.append("[^/]*")
        elif c == "?":
            out.append("[^/]")
        elif c == "[":
            end = pattern.find("]", i + 1)
            if end < 0:
                out.append(re.escape(c))
            else:
                body = pattern[i + 1:end]
                if body.startswith("!"):
                    body = "^" + body[1:]
                out.append(f"[{body}]")
                i = end
        elif c == "{":
            out.append("(?:")
            depth += 1
        elif c == "}" and depth:
            out.append(")")
            depth -= 1
        elif c == "," and depth:
            out.append("|")
        else:
            out.append(re.escape(c))
        i += 1
    if depth:
        raise ValueError(f"unbalanced braces in {pattern!r}")
    return re.compile("".join(out))


def _spec(pattern, fmt, yields, reference, decoder, categories=()):
    return ArtifactSpec(pattern, fmt, tuple(yields), reference, decoder, tuple(categories))


def _marker_only(pattern, app):
    # The app keeps nothing of interest; this entry only pins the container.
    return _spec(pattern, "plist", [], f"{app} preferences plist: container marker, no relevant data", "marker_only")


def _webdata(reference):
    return _spec("app_webview/{,Default/}Web Data", "sqlite", ["identity"], reference, "webdata_autofill")


_AUDI_ANDROID = "en.myaudi.mobile.assistant"
_BMW = "de.bmw.connected.mobile20.row"
_FORD = "com.ford.fordpasseu"
_MB_ANDROID = "com.daimler.mbfa.android"
_OPEL_ANDROID = "com.psa.mym.myopel"
_OPEL_IOS = "com.psa.myopel"
_ONSTAR_ANDROID = "com.gme.opel.owner.android"
_ONSTAR_IOS = "com.gme.opel.owner"
_DRIVEMII = "com.seat.connectedcar.drivemii"
_SEAT_ANDROID = "com.seat.connectedcar.mod2connectapp"
_SEAT_IOS = "com.seat.connectedcar.mod3connectapp"
_TESLA_ANDROID = "com.teslamotors.tesla"
_TESLA_IOS = "com.teslamotors.TeslaApp"
_VW_ANDROID = "en.volkswagen.vwconnect"

# app_id -> (display name, vehicle, android version, ios version)
APPS = {
    "myaudi": ("myAudi", "Audi A4 B9", "3.18.0", "3.18.1"),
    "my_bmw": ("my BMW", "BMW 1er F20 140i", "1.0.1", "1.0.1"),
    "fordpass": ("FordPass", "Ford Kuga '13", "3.1.0", "3.0.0"),
    "mercedes": ("Mercedes me Adapter", "Mercedes C-Klasse W204", "3.11.50", "3.6.50"),
    "myopel": ("myOpel", "Opel Astra K", "1.23.4", "1.23.4"),
    "onstar": ("OnStar Europe", "Opel Astra K", "3.28.0", "3.28.0"),
    "drivemii": ("DriveMii App", "Seat Mii electric Plus", "3.0", "3.0"),
    "seat_connect": ("Seat Connect", "Seat Mii electric Plus", "1.1.29", "1.1.29"),
    "tesla": ("Tesla", "Tesla Model S 75D / Model 3", "3.10.8, 3.10.9", "3.10.8, 3.10.9"),
    "weconnect_go": ("We Connect Go", "VW Tiguan II", "2.13.8", "2.13.6"),
}

# (app_id, platform) -> (identifier, markers, specs)
_CATALOG: dict[tuple[str, str], tuple[str | None, list[str], list[ArtifactSpec]]] = {
    ("myaudi", "ios"): (None, ["Documents/maps.db"], [
        _spec("Documents/maps.db", "sqlite", ["refuel", "trip", "status_snapshot"],
              "myAudi iOS maps.db: CostBookItem refuelings, DriverLogItem logbook, SettingsItem last sync",
              "audi_maps_ios", ["refueling", "drive_log"]),
    ]),
    ("myaudi", "android"): (_AUDI_ANDROID, [f"/data/data/{_AUDI_ANDROID}/"], [
        _spec("databases/audiMapsDatabase.db", "sqlite", ["trip", "refuel"],
              "myAudi Android audiMapsDatabase.db: drivers_log_item trips with mileage, cost_book_item refuelings",
              "audi_maps_android", ["drive_log", "refueling"]),
        _spec("files/vehicleList", "json", ["vehicle_info"],
              "myAudi Android files/vehicleList: model name and assistance systems", "audi_vehicle_list"),
        _spec("**/PERSISTENCE_KEY_USER_ACCOUNT", "json", ["identity"],
              "myAudi Android PERSISTENCE_KEY_USER_ACCOUNT: birth date, email, name, user id", "audi_user_account"),
        _spec("**/DiskLruCache/GeoKitDecodedCoordinate/1/*", "json", ["nav_destination"],
              "myAudi Android GeoKitDecodedCoordinate cache: navigation start and destination coordinates",
              "audi_geokit"),
        _spec("**/WebRequestManagerCache/**", "gzip_json", ["location_fix", "lock_state", "status_snapshot"],
              "myAudi Android WebRequestManagerCache: historical coordinates, lock/unlock log, door status, mileage",
              "audi_webcache"),
    ]),
    ("my_bmw", "android"): (_BMW, [f"/data/data/{_BMW}/"], [
        _spec("**/.hydrated_bloc.json", "json", ["vehicle_info", "status_snapshot"],
              "my BMW Android .hydrated_bloc.json: VIN, build year, located vehicle status, doors, services",
              "bmw_hydrated_bloc"),
    ]),
    ("my_bmw", "ios"): (_BMW, [f"Library/Preferences/{_BMW}.plist"], [
        _marker_only(f"Library/Preferences/{_BMW}.plist", "my BMW iOS"),
    ]),
    ("fordpass", "ios"): (_FORD, [f"Library/Preferences/{_FORD}.plist"], [
        _spec("Documents/CoreData.sqlite", "sqlite", ["vehicle_info"],
              "FordPass iOS CoreData.sqlite ZVEHICLE: model, nickname, VIN", "ford_coredata"),
        _spec("Documents/CVCoreDataModel.sqlite", "sqlite", ["vehicle_info"],
              "FordPass iOS CVCoreDataModel.sqlite: installed vehicle modules", "ford_cv_modules"),
        _spec("Documents/DigitalCoPilot/dataPoints/*/snapshot", "json", ["status_snapshot"],
              "FordPass iOS DigitalCoPilot snapshot: fuel level with timestamp", "ford_snapshot"),
        _spec("Documents/DTX_*.sqlite", "sqlite", ["identity"],
              "FordPass iOS DTX database: account email", "ford_dtx"),
        _spec(f"Library/Preferences/{_FORD}.plist", "plist",
              ["refuel", "location_fix", "parking", "nav_destination", "identity"],
              "FordPass iOS preferences plist: refuelings with station coordinates, last position, "
              "Base64 parking photo, destinations, user id", "ford_prefs_plist"),
    ]),
    ("fordpass", "android"): (_FORD, [f"/data/data/{_FORD}/"], [
        _spec("databases/NGSDN_DATABASE", "sqlite", ["vehicle_info"],
              "FordPass Android NGSDN_DATABASE: vehicle name, VIN, year, nickname", "ford_ngsdn"),
        _spec("databases/VIN_DETAILS_LOOKUP", "sqlite", ["vehicle_info"],
              "FordPass Android VIN_DETAILS_LOOKUP: engine, transmission, warranty, emission class",
              "ford_vin_details"),
        _spec(f"shared_prefs/{_FORD}_preferences.xml", "xml_prefs", ["identity"],
              "FordPass Android preferences XML: email, name, VIN", "ford_prefs_xml"),
        _spec("shared_prefs/com.humanify.expertconnect.SHARED_PREFS.xml", "xml_prefs", ["identity"],
              "FordPass Android expertconnect preferences: user name and email", "ford_expertconnect"),
        _spec("shared_prefs/encryptedValues.xml", "xml_prefs", ["status_snapshot"],
              "FordPass Android encryptedValues.xml: access token present", "ford_token_presence"),
        _spec("shared_prefs/pinValues.xml", "xml_prefs", ["status_snapshot"],
              "FordPass Android pinValues.xml: PIN salt and hash present", "ford_pin_presence"),
        _spec("databases/TRIP_DATABASE", "sqlite", ["schema_present"],
              "FordPass Android empty trip and position tables", "schema_only"),
    ]),
    ("mercedes", "ios"): (None, ["Documents/DriverLogbook.sqlite", "Documents/live.json",
                                 "Library/Application Support/Live/MBFA"], [
        _spec("Documents/*/000000000000", "json", ["status_snapshot"],
              "Mercedes me iOS per-account JSON 000000000000: last trip distance", "mb_last_trip"),
        _spec("Documents/live.json", "json", ["status_snapshot"],
              "Mercedes me iOS live.json: dashboard key-value snapshot", "mb_live"),
        _spec("Documents/DriverLogbook.sqlite", "sqlite", ["trip", "location_fix", "parking"],
              "Mercedes me iOS DriverLogbook.sqlite: trips with addresses and ten-second trackpoints",
              "mb_logbook", ["drive_log", "recent_location", "parking"]),
        _spec("Library/Application Support/Live/MBFA", "sqlite", ["refuel", "identity", "vehicle_info"],
              "Mercedes me iOS MBFA database: refuelings and user information", "mb_mbfa",
              ["refueling", "user_info", "car_info"]),
    ]),
    ("mercedes", "android"): (_MB_ANDROID, [f"/data/data/{_MB_ANDROID}/"], [
        _spec("databases/driverlogbookDatabase.db", "sqlite", ["trip", "location_fix", "parking"],
              "Mercedes me Android driverlogbookDatabase.db (encrypted)", "mb_logbook",
              ["drive_log", "recent_location", "parking"]),
        _spec("databases/mbfa.db", "sqlite", ["refuel", "vehicle_info"],
              "Mercedes me Android mbfa.db (encrypted)", "mb_mbfa", ["refueling", "car_info"]),
        _webdata("Mercedes me Android app_webview Web Data autofill: account holder address"),
        _spec("cache/{volley,com.google.android.gms.maps.volley}/*", "text_log", ["status_snapshot"],
              "Mercedes me Android volley caches: map tile URLs viewed", "volley_tiles"),
        _spec("resources/*", "image", ["status_snapshot"],
              "Mercedes me Android resources folder: parking photo taken in the app", "parking_photo"),
        _spec(f"shared_prefs/{_MB_ANDROID}_preferences.xml", "xml_prefs", ["vehicle_info"],
              "Mercedes me Android preferences XML: VIN, adapter id, km to service", "mb_prefs"),
    ]),
    ("myopel", "ios"): (_OPEL_IOS, [f"Library/Preferences/{_OPEL_IOS}.plist", f"Documents/LogDirectory/{_OPEL_IOS}/**"], [
        _spec(f"Documents/LogDirectory/{_OPEL_IOS}/**", "text_log", ["identity", "vehicle_info"],
              "myOpel iOS LogDirectory logs: email and VIN", "opel_logs"),
        _spec("Documents/UserProfileModel.sqlite", "sqlite", ["identity", "vehicle_info"],
              "myOpel iOS UserProfileModel.sqlite: user, vehicle, dealer", "opel_user_profile"),
        _spec("Documents/BTAModel.sqlite", "sqlite", ["trip", "schema_present"],
              "myOpel iOS BTAModel.sqlite: traveled routes when populated", "opel_bta"),
        _spec("Documents/BOUserMyMarqueModel.sqlite", "sqlite", ["identity", "vehicle_info"],
              "myOpel iOS BOUserMyMarqueModel.sqlite: warranty, email, VIN", "opel_bouser"),
        _spec(f"Library/Preferences/{_OPEL_IOS}.plist", "plist", ["identity", "vehicle_info", "location_fix"],
              "myOpel iOS preferences plist: user info, VIN, phone coordinates with timestamp", "opel_prefs_plist"),
    ]),
    ("myopel", "android"): (_OPEL_ANDROID, [f"/data/data/{_OPEL_ANDROID}/"], [
        _spec("cache/logs/**", "text_log", ["vehicle_info"], "myOpel Android cache/logs: VIN", "opel_logs"),
        _spec("{database,databases}/BOUserMymarque.db", "sqlite", ["identity", "vehicle_info"],
              "myOpel Android BOUserMymarque.db: warranty, email, VIN", "opel_bouser"),
        _spec("{database,databases}/UserProfile.db", "sqlite", ["identity", "vehicle_info"],
              "myOpel Android UserProfile.db: user, vehicle, dealer", "opel_user_profile"),
        _spec("{database,databases}/{CarProtocolStrategy,LocalisationSmartphone,SmartAppsV1,SmartAppsV2}.db",
              "sqlite", ["schema_present"],
              "myOpel Android empty coordinate tables", "schema_only"),
        _spec(f"shared_prefs/{_OPEL_ANDROID}_preferences.xml", "xml_prefs", ["identity", "vehicle_info"],
              "myOpel Android preferences XML: VIN, email, settings", "opel_prefs_xml"),
    ]),
    ("onstar", "android"): (_ONSTAR_ANDROID, [f"/data/data/{_ONSTAR_ANDROID}/"], [
        _spec("cache/GeminiCache/*.1", "gzip_json", ["vehicle_info", "identity"],
              "OnStar Android GeminiCache gzip JSON: VIN and model", "onstar_gemini"),
        _spec("databases/mylink", "sqlite", ["vehicle_info", "status_snapshot", "schema_present"],
              "OnStar Android mylink: vehicles and vehicle_diagnostics (tire pressure, mileage)", "onstar_mylink"),
    ]),
    ("onstar", "ios"): (_ONSTAR_IOS, [f"Library/Preferences/{_ONSTAR_IOS}.plist"], [
        _marker_only(f"Library/Preferences/{_ONSTAR_IOS}.plist", "OnStar Europe iOS"),
    ]),
    ("drivemii", "ios"): (_DRIVEMII, [f"Library/Preferences/{_DRIVEMII}.plist"], [
        _spec(f"Library/Preferences/{_DRIVEMII}.plist", "plist", ["vehicle_info"],
              "DriveMii iOS preferences plist: VIN of the paired vehicle", "drivemii_prefs_plist"),
        _spec("Documents/ElectricalService.sql", "sqlite", ["recuperation"],
              "DriveMii iOS ElectricalService.sql ZRECUPERATIONHISTORY: per-minute recuperation",
              "drivemii_recuperation"),
        _spec("Library/Application Support/*/home/{fav,itn,tracks}/*.sqlite", "sqlite", ["encrypted_artifact"],
              "DriveMii iOS home fav/itn/tracks databases (encrypted)", "drivemii_nav_db"),
        _spec("Library/Application Support/*/home/*_MapSettings_.tlv", "tlv_mapsettings", ["nav_destination"],
              "DriveMii iOS MapSettings TLV: user-entered destinations", "drivemii_tlv"),
    ]),
    ("drivemii", "android"): (_DRIVEMII, [f"/data/data/{_DRIVEMII}/"], [
        _spec("shared_prefs/App4EntryPrefs.xml", "xml_prefs", ["vehicle_info"],
              "DriveMii Android App4EntryPrefs.xml: VIN of the connected vehicle", "drivemii_prefs_xml"),
        _spec("**/ElectricalService.sql", "sqlite", ["recuperation"],
              "DriveMii Android ElectricalService.sql ZRECUPERATIONHISTORY: per-minute recuperation",
              "drivemii_recuperation"),
        _spec("files/**/home/fav/*.sqlite", "sqlite", ["encrypted_artifact"],
              "DriveMii Android home fav databases (encrypted)", "drivemii_nav_db", ["recent_location"]),
        _spec("files/**/home/{itn,tracks}/*.sqlite", "sqlite", ["encrypted_artifact"],
              "DriveMii Android home itn/tracks databases (encrypted)", "drivemii_nav_db"),
        _spec("files/**/*_MapSettings_.tlv", "tlv_mapsettings", ["nav_destination"],
              "DriveMii Android MapSettings TLV: navigation inputs", "drivemii_tlv"),
    ]),
    ("seat_connect", "ios"): (_SEAT_IOS, [f"Library/Preferences/{_SEAT_IOS}.plist"], [
        _spec(f"Library/Preferences/{_SEAT_IOS}.plist", "plist", ["identity", "vehicle_info", "status_snapshot"],
              "Seat Connect iOS preferences plist: last login, VIN, phone metadata, user details",
              "seat_prefs_plist"),
    ]),
    ("seat_connect", "android"): (_SEAT_ANDROID, [f"/data/data/{_SEAT_ANDROID}/"], [
        _webdata("Seat Connect Android Default/Web Data autofill: email"),
        _spec("databases/ModAppDatabase.db", "sqlite", ["identity", "vehicle_info"],
              "Seat Connect Android ModAppDatabase.db: PersistentUser, PersistentVehicleMetadata",
              "seat_modapp"),
    ]),
    ("tesla", "ios"): (_TESLA_IOS, [f"Library/Caches/{_TESLA_IOS}/Cache.db", f"Library/Preferences/{_TESLA_IOS}.plist"], [
        _spec(f"Library/Caches/{{,{_TESLA_IOS}/}}Cache.db", "sqlite", ["vehicle_info", "identity"],
              "Tesla iOS Cache.db cfurl_cache_receiver_data: static vehicle data and VIN", "tesla_cache_db"),
        _spec(f"Library/Caches/{{,{_TESLA_IOS}/}}fsCachedData/*", "json",
              ["status_snapshot", "parking", "refuel", "location_fix"],
              "Tesla iOS fsCachedData JSON: last location, interior temperature, charge state", "tesla_api_json"),
    ]),
    ("tesla", "android"): (_TESLA_ANDROID, [f"/data/data/{_TESLA_ANDROID}/"], [
        _webdata("Tesla Android app_webview Web Data autofill: email"),
        _spec("**/http-cache/*.1", "json", ["status_snapshot", "parking", "refuel", "location_fix",
                                            "vehicle_info", "identity"],
              "Tesla Android http-cache JSON: VIN, user id, vehicle status with location, speed, gear",
              "tesla_api_json"),
    ]),
    ("weconnect_go", "ios"): (None, ["Documents/avacar.db", "Documents/.avacar_SUPPORT/_EXTERNAL_DATA/*",
                                     "Documents/VW_DataPlug_*.sqlite3"], [
        _spec("Documents/avacar.db", "sqlite",
              ["vehicle_info", "status_snapshot", "refuel", "trip", "parking", "location_fix"],
              "We Connect Go iOS avacar.db: vehicle, fuel level, refuelings, trips, driving events, parking",
              "vw_avacar", list(CATEGORIES)),
        _spec("Documents/.avacar_SUPPORT/_EXTERNAL_DATA/*", "image", ["status_snapshot"],
              "We Connect Go iOS _EXTERNAL_DATA: parking position image", "parking_photo"),
        _spec("Documents/VW_DataPlug_*.sqlite3", "sqlite", ["vehicle_info"],
              "We Connect Go iOS VW_DataPlug ClientURLTranslation database: DataPlug names and ids",
              "vw_dataplug"),
    ]),
    ("weconnect_go", "android"): (_VW_ANDROID, [f"/data/data/{_VW_ANDROID}/"], [
        _spec("{database,databases}/avacar.db", "sqlite",
              ["vehicle_info", "status_snapshot", "refuel", "trip", "parking", "location_fix"],
              "We Connect Go Android avacar.db: same structure as iOS", "vw_avacar", list(CATEGORIES)),
    ]),
}

# Presence of data per category in manufacturer SAR responses.
SAR_CATEGORIES = (
    "customer_data",
    "vehicle_data",
    "infotainment_usage",
    "correspondence",
    "order_history",
    "position_data",
    "additional_data",
)
SAR_PRESENCE_VALUES = ("data", "partial", "metadata", "none", "extensive")
SAR_PRESENCE = {
    "audi": ("data", "data", "data", "metadata", "partial", "none", "none"),
    "bmw": ("data", "data", "none", "metadata", "none", "none", "none"),
    "ford": ("data", "none", "none", "none", "none", "none", "none"),
    "mercedes": ("data", "none", "none", "none", "none", "none", "none"),
    "opel": ("data", "data", "none", "none", "none", "none", "none"),
    "onstar": ("data", "extensive", "data", "metadata", "data", "partial", "extensive"),
    "seat": ("data", "data", "data", "none", "none", "none", "none"),
    "tesla": ("data", "data", "none", "none", "data", "data", "extensive"),
    "volkswagen": ("data", "data", "none", "none", "data", "data", "extensive"),
}
MANUFACTURERS = tuple(SAR_PRESENCE)


def sar_presence(manufacturer: str) -> dict[str, str]:
    return dict(zip(SAR_CATEGORIES, SAR_PRESENCE[manufacturer]))


def _builtin() -> list[AppDescriptor]:
    out = []
    for app_id, (name, vehicle, v_android, v_ios) in APPS.items():
        for platform in PLATFORMS:
            identifier, markers, specs = _CATALOG[(app_id, platform)]
            out.append(AppDescriptor(
                app_id=app_id,
                display_name=name,
                platform=platform,
                package_or_bundle_markers=tuple(markers),
                artifact_specs=tuple(specs),
                tested_version=v_android if platform == "android" else v_ios,
                vehicle=vehicle,
                identifier=identifier,
            ))
    return out


def descriptor_to_json(desc: AppDescriptor) -> dict:
    return asdict(desc)


def descriptor_from_json(obj: dict) -> AppDescriptor:
    try:
        specs = tuple(
            ArtifactSpec(
                relative_path_pattern=s["relative_path_pattern"],
                format=s["format"],
                yields=tuple(s.get("yields", ())),
                reference=s["reference"],
                decoder=s["decoder"],
                categories=tuple(s.get("categories", ())),
            )
            for s in obj.get("artifact_specs", ())
        )
        desc = AppDescriptor(
            app_id=obj["app_id"],
            display_name=obj.get("display_name", obj["app_id"]),
            platform=obj["platform"],
            package_or_bundle_markers=tuple(obj["package_or_bundle_markers"]),
            artifact_specs=specs,
            tested_version=obj.get("tested_version", ""),
            vehicle=obj.get("vehicle", ""),
            identifier=obj.get("identifier"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise VappError(f"bad registry entry: {exc}") from exc
    if desc.platform not in PLATFORMS or not desc.package_or_bundle_markers:
        raise VappError(f"bad registry entry for {desc.app_id}")
    return desc


def export_registry(descriptors: list[AppDescriptor] | None = None) -> str:
    descriptors = registry() if descriptors is None else descriptors
    doc = {"version": 1, "descriptors": [descriptor_to_json(d) for d in descriptors]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_registry(path: str | os.PathLike) -> list[AppDescriptor]:
    """Built-in registry with entries replaced or added from a JSON document."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = doc["descriptors"] if isinstance(doc, dict) else doc
    merged = {d.key: d for d in _builtin()}
    for obj in entries:
        desc = descriptor_from_json(obj)
        merged[desc.key] = desc
    return sorted(merged.values(), key=lambda d: d.key)


_ACTIVE: list[AppDescriptor] | None = None


def registry() -> list[AppDescriptor]:
    """All descriptors, sorted by (app_id, platform)."""
    if _ACTIVE is not None:
        return list(_ACTIVE)
    env = os.environ.get("VAPP_REGISTRY")
    if env:
        return load_registry(env)
    return sorted(_builtin(), key=lambda d: d.key)


def use_registry(descriptors: list[AppDescriptor] | None) -> None:
    """Install an override for this process (None restores the built-in one)."""
    global _ACTIVE
    _ACTIVE = None if descriptors is None else list(descriptors)


def get_descriptor(app_id: str, platform: str) -> AppDescriptor:
    for desc in registry():
        if desc.app_id == app_id and desc.platform == platform:
            return desc
    raise UnknownApp(f"{app_id}/{platform}")


def list_artifact_specs(app_id: str, platform: str) -> list[ArtifactSpec]:
    """Catalog rows that can yield events (marker-only rows are left out)."""
    return [s for s in get_descriptor(app_id, platform).artifact_specs if s.yields]
