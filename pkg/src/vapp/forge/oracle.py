"""The recovery oracle: which events an examiner should get back.

Computed from the scenario and the availability matrix alone. Nothing in
here imports extractor code, so a round trip through the real pipeline is
checked against an independent prediction.
"""

from __future__ import annotations

from typing import Callable, Iterable, NamedTuple

from ..registry import CATEGORIES
from .matrix import DATA_SYMBOLS, STATES, AvailabilityMatrix, load_matrix
from .scenario import Scenario, midpoint, minute_marks

D, R, P, F, U, C = CATEGORIES


class Skeleton(NamedTuple):
    """The comparable core of a canonical event."""

    category: str | None
    kind: str
    start: int | None
    label: str | None


class Expect(NamedTuple):
    category: str | None
    kind: str
    start: int | None
    label: str | None = None
    # survives a logout that wipes the app's data
    residual: bool = False

    @property
    def skeleton(self) -> Skeleton:
        return Skeleton(self.category, self.kind, self.start, self.label)


def coord_label(lat: float, lon: float) -> str:
    return f"{lat:.6f},{lon:.6f}"


def _static(*cats: str, residual: bool = False) -> list[Expect]:
    kinds = {U: "identity", C: "vehicle_info"}
    return [Expect(c, kinds[c], None, residual=residual) for c in cats]


def _snap(name: str, t: int | None, category: str | None = None) -> Expect:
    return Expect(category, "status_snapshot", t, name)


def _trips(s: Scenario, cat=D) -> list[Expect]:
    return [Expect(cat, "trip", a.t) for a in s.drives]


def _refuels(s: Scenario) -> list[Expect]:
    return [Expect(F, "refuel", a.t) for a in s.refuels]


def _nav_text(s: Scenario) -> list[Expect]:
    return [Expect(None, "nav_destination", None, a.destination) for a in s.of("navigate", "send_trip")]


def _schema(*tables: str) -> list[Expect]:
    return [Expect(None, "schema_present", None, t) for t in tables]


def _encrypted(*cats: str | None) -> list[Expect]:
    return [Expect(c, "encrypted_artifact", None) for c in cats]


def _photos(s: Scenario, residual: bool = False) -> list[Expect]:
    return [_snap("parking_photo", None)._replace(residual=residual)] if s.of("save_parking") else []


def _myaudi_ios(s):
    return _trips(s) + _refuels(s) + [_snap("last_sync", s.last_sync)]


def _myaudi_android(s):
    out = _trips(s) + _refuels(s) + _static(C, U)
    out += [Expect(None, "nav_destination", None, coord_label(a.lat, a.lon)) for a in s.of("navigate", "send_trip")]
    for a in s.drives:
        out += [Expect(D, "location_fix", a.t), Expect(D, "location_fix", a.end)]
    out += [Expect(None, "lock_state", a.t) for a in s.of("lock", "unlock")]
    out.append(_snap("door_status", s.last_sync))
    return out


def _bmw_android(s):
    return _static(C) + [_snap("vehicle_status", s.last_sync, R)]


def _ford_ios(s):
    out = _static(C, U) + [_snap("fuel_level", s.last_sync)] + _refuels(s)
    out.append(Expect(R, "location_fix", s.last_sync))
    out += [Expect(P, "parking", a.t) for a in s.of("save_parking")]
    return out + _nav_text(s)


def _ford_android(s):
    return (_static(C, U) + [_snap("access_token_present", None), _snap("pin_hash_present", None)]
            + _schema("trip_destinations", "vehicle_locations"))


def _mb_ios(s):
    out = [_snap("last_trip", s.drives[-1].end, D), _snap("dashboard", s.last_sync, R)]
    for a in s.drives:
        out.append(Expect(D, "trip", a.t))
        out += [Expect(D, "location_fix", p.t) for p in a.route]
        out.append(Expect(P, "parking", a.end))
    return out + _refuels(s) + _static(U, C)


def _mb_android(s):
    out = _encrypted(D, R, P, F, C) + _static(U)
    out += [_snap("map_tiles_viewed", None), Expect(None, "vehicle_info", None)]
    return out + _photos(s)


def _opel_ios(s):
    return _static(U, C) + _schema("ZROUTE", "ZROUTEPOINT") + [Expect(None, "location_fix", s.last_sync)]


def _opel_android(s):
    return _static(U, C) + _schema("car_positions", "smartphone_locations", "coordinates")


def _onstar_android(s):
    return _static(C, U) + [_snap("diagnostics", s.last_sync)] + _schema("parking_positions", "routes")


def _drivemii(s, android: bool):
    out = _static(C) + [Expect(D, "recuperation", t) for a in s.drives for t in minute_marks(a)]
    out += _encrypted(R if android else None, None)
    return out + _nav_text(s)


def _seat_ios(s):
    return _static(U, C) + [_snap("last_login", s.first_seen)]


def _seat_android(s):
    return _static(U, C)


def _tesla(s, android: bool):
    out = _static(C, U) + [_snap("vehicle_status", s.last_sync, R)]
    out += [Expect(P, "parking", a.end) for a in s.drives]
    out += _refuels(s)
    if android:
        out += [Expect(D, "location_fix", midpoint(a).t) for a in s.drives]
    return out


def _wcg(s, ios: bool):
    out = _static(C) + _trips(s) + _refuels(s)
    for a in s.drives:
        out += [_snap("fuel_level", a.end), Expect(P, "parking", a.end),
                _snap("driving_event", a.t + 60_000), _snap("driving_event", a.end - 60_000)]
    out.append(Expect(R, "location_fix", s.last_sync))
    if ios:
        out += _photos(s, residual=True) + _static(C, residual=True)
    return out


PROFILES: dict[tuple[str, str], Callable[[Scenario], list[Expect]]] = {
    ("myaudi", "ios"): _myaudi_ios,
    ("myaudi", "android"): _myaudi_android,
    ("my_bmw", "android"): _bmw_android,
    ("my_bmw", "ios"): lambda s: [],
    ("fordpass", "ios"): _ford_ios,
    ("fordpass", "android"): _ford_android,
    ("mercedes", "ios"): _mb_ios,
    ("mercedes", "android"): _mb_android,
    ("myopel", "ios"): _opel_ios,
    ("myopel", "android"): _opel_android,
    ("onstar", "android"): _onstar_android,
    ("onstar", "ios"): lambda s: [],
    ("drivemii", "ios"): lambda s: _drivemii(s, android=False),
    ("drivemii", "android"): lambda s: _drivemii(s, android=True),
    ("seat_connect", "ios"): _seat_ios,
    ("seat_connect", "android"): _seat_android,
    ("tesla", "ios"): lambda s: _tesla(s, android=False),
    ("tesla", "android"): lambda s: _tesla(s, android=True),
    ("weconnect_go", "ios"): lambda s: _wcg(s, ios=True),
    ("weconnect_go", "android"): lambda s: _wcg(s, ios=False),
}


def admitted(entry: Expect, row: dict[str, str]) -> bool:
    """Whether the matrix row lets this entry be recovered."""
    if entry.category is None:
        return True
    symbol = row[entry.category]
    if symbol == "encrypted":
        return entry.kind == "encrypted_artifact"
    return symbol in DATA_SYMBOLS and entry.kind != "encrypted_artifact"


def expected_recovery(scenario: Scenario, app_id: str, platform: str, state: str,
                      matrix: AvailabilityMatrix | None = None) -> list[Skeleton]:
    """Sorted, de-duplicated skeletons of the events recoverable in ``state``."""
    if state not in STATES:
        raise ValueError(f"unknown account state {state!r}")
    matrix = matrix or load_matrix()
    row = matrix.row(app_id, platform)
    if state == "uninstalled" and not matrix.retains(app_id, platform, state):
        return []
    entries = PROFILES[(app_id, platform)](scenario)
    if not matrix.retains(app_id, platform, state):
        entries = [e for e in entries if e.residual]
    return sorted({e.skeleton for e in entries if admitted(e, row)}, key=_skeleton_key)


def _skeleton_key(s: Skeleton):
    return (s.category or "", s.kind, -1 if s.start is None else s.start, s.label or "")


def skeletons(events: Iterable) -> list[Skeleton]:
    """Project canonical events onto skeletons (one per credited category)."""
    out = set()
    for e in events:
        attrs = e.attributes
        if e.kind == "status_snapshot":
            label = attrs.get("snapshot")
        elif e.kind == "schema_present":
            label = attrs.get("table")
        elif e.kind == "nav_destination":
            if attrs.get("destination"):
                label = str(attrs["destination"])
            elif e.geo_end is not None:
                label = coord_label(e.geo_end.lat, e.geo_end.lon)
            else:
                label = None
        else:
            label = None
        cats = attrs.get("categories") or [None]
        for cat in cats:
            out.add(Skeleton(cat, e.kind, e.start, label))
    return sorted(out, key=_skeleton_key)


def category_symbols(sk: Iterable[Skeleton]) -> dict[str, str]:
    """Per category: "encrypted", "data" or "none"."""
    sk = list(sk)
    out = {}
    for cat in CATEGORIES:
        kinds = {s.kind for s in sk if s.category == cat}
        if "encrypted_artifact" in kinds:
            out[cat] = "encrypted"
        elif kinds:
            out[cat] = "data"
        else:
            out[cat] = "none"
    return out
