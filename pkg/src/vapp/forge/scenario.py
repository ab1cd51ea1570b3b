"""Ground-truth driving scenarios built from the nine test actions."""

from __future__ import annotations

import hashlib
import math
import random
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ..events import haversine_m, vin_check_digit

# One entry per item of the test procedure; "lock_unlock" yields two actions.
CATALOG = (
    "lock_unlock",
    "refuel",
    "drive",
    "navigate",
    "send_trip",
    "save_parking",
    "locate",
    "summon",
    "climate",
)
ACTION_KINDS = ("lock", "unlock", "refuel", "drive", "navigate", "send_trip", "save_parking",
                "locate", "summon", "climate")

# A small box around Münster; routes are piecewise-linear inside it.
BOX = ((51.90, 52.00), (7.55, 7.70))
TRACK_INTERVAL_S = 10
DEFAULT_START = datetime(2020, 11, 2, 7, 0, tzinfo=timezone.utc)

_STREETS = ("Hafenweg", "Ludgeristraße", "Warendorfer Straße", "Steinfurter Straße", "Hammer Straße",
            "Weseler Straße", "Grevener Straße", "Albersloher Weg", "Roxeler Straße", "Kanalstraße")
_FIRST = ("Anna", "Jonas", "Lea", "Felix", "Marie", "Paul", "Sophie", "Lukas")
_LAST = ("Becker", "Schulz", "Hoffmann", "Wagner", "Krüger", "Hartmann", "Lange", "Vogel")
_VIN_CHARS = "ABCDEFGHJKLMNPRSTUVWXYZ0123456789"


@dataclass(frozen=True)
class RoutePoint:
    t: int
    lat: float
    lon: float
    speed_kmh: float


@dataclass(frozen=True)
class Action:
    kind: str
    t: int
    end: int | None = None
    lat: float | None = None
    lon: float | None = None
    route: tuple[RoutePoint, ...] = ()
    liters: float | None = None
    price: float | None = None
    destination: str | None = None
    address: str | None = None
    end_address: str | None = None
    photo: bytes | None = None
    temp_c: float | None = None
    odometer_km: float | None = None
    distance_km: float | None = None

    @property
    def last(self) -> int:
        return self.end if self.end is not None else self.t


@dataclass(frozen=True)
class Scenario:
    seed: int
    vin: str
    user: dict
    vehicle: dict
    actions: tuple[Action, ...]
    start_lat: float
    start_lon: float
    start_address: str
    odometer_start_km: float
    extras: dict = field(default_factory=dict)

    def of(self, *kinds: str) -> list[Action]:
        return [a for a in self.actions if a.kind in kinds]

    @property
    def drives(self) -> list[Action]:
        return self.of("drive")

    @property
    def refuels(self) -> list[Action]:
        return self.of("refuel")

    @property
    def first_seen(self) -> int:
        return self.actions[0].t

    @property
    def last_sync(self) -> int:
        return max(a.last for a in self.actions)

    def position_at(self, t: int) -> tuple[float, float]:
        """Vehicle position at time ``t`` (ms), interpolated along drives."""
        lat, lon = self.start_lat, self.start_lon
        for drive in self.drives:
            if t < drive.t:
                break
            if t >= drive.end:
                lat, lon = drive.route[-1].lat, drive.route[-1].lon
                continue
            for a, b in zip(drive.route, drive.route[1:]):
                if a.t <= t <= b.t:
                    f = (t - a.t) / (b.t - a.t) if b.t > a.t else 0.0
                    return a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon)
        return lat, lon

    def address_at(self, t: int) -> str:
        addr = self.start_address
        for drive in self.drives:
            if drive.end <= t:
                addr = drive.end_address
        return addr

    def odometer_at(self, t: int) -> float:
        km = self.odometer_start_km
        for drive in self.drives:
            if drive.end <= t:
                km += drive.distance_km
        return round(km, 3)


def make_vin(rng: random.Random, wmi: str = "WVG") -> str:
    body = wmi + "".join(rng.choice(_VIN_CHARS) for _ in range(5)) + "0" + "".join(
        rng.choice(_VIN_CHARS) for _ in range(2)) + "".join(rng.choice("0123456789") for _ in range(6))
    return body[:8] + vin_check_digit(body) + body[9:]


def _photo(rng: random.Random) -> bytes:
    # A minimal JFIF-framed blob: SOI, APP0, opaque payload, EOI.
    payload = bytes(rng.getrandbits(8) for _ in range(512))
    app0 = b"\xff\xe0\x00\x10JFIF\x00\x01\x01\x00\x00\x01\x00\x01\x00\x00"
    return b"\xff\xd8" + app0 + b"\xff\xfe" + len(payload).to_bytes(2, "big") + payload + b"\xff\xd9"


def _address(rng: random.Random) -> str:
    return f"{rng.choice(_STREETS)} {rng.randint(1, 120)}, 48{rng.randint(143, 167)} Münster"


def _point(rng: random.Random) -> tuple[float, float]:
    (la0, la1), (lo0, lo1) = BOX
    return round(rng.uniform(la0, la1), 6), round(rng.uniform(lo0, lo1), 6)


def _route(rng, t0: int, duration_s: int, frm: tuple[float, float], to: tuple[float, float]):
    """Points every 10 s, evenly spaced along a polyline through random waypoints."""
    waypoints = [frm] + [_point(rng) for _ in range(rng.randint(1, 3))] + [to]
    legs = [haversine_m(a, b) for a, b in zip(waypoints, waypoints[1:])]
    total = sum(legs)
    n = duration_s // TRACK_INTERVAL_S
    points = []
    for i in range(n + 1):
        target = total * i / n
        acc = 0.0
        for (a, b), leg in zip(zip(waypoints, waypoints[1:]), legs):
            if acc + leg >= target or (a, b) == (waypoints[-2], waypoints[-1]):
                f = 0.0 if leg == 0 else min(1.0, (target - acc) / leg)
                lat = a[0] + f * (b[0] - a[0])
                lon = a[1] + f * (b[1] - a[1])
                break
            acc += leg
        points.append((round(lat, 6), round(lon, 6)))
    out = []
    for i, (lat, lon) in enumerate(points):
        if 0 < i < n:
            step = haversine_m(points[i - 1], points[i])
            speed = round(step / TRACK_INTERVAL_S * 3.6, 1)
        else:
            speed = 0.0
        out.append(RoutePoint(t0 + i * TRACK_INTERVAL_S * 1000, lat, lon, speed))
    return tuple(out)


def polyline_km(route) -> float:
    return sum(haversine_m((a.lat, a.lon), (b.lat, b.lon)) for a, b in zip(route, route[1:])) / 1000.0


def generate_scenario(seed: int, length: int, *, drive_minutes: int | None = None,
                      start: datetime | None = None) -> Scenario:
    """A deterministic scenario of ``length`` steps drawn from the action catalog.

    ``length >= 9`` covers every catalog item; shorter scenarios always
    contain a drive. Drives last at least ten minutes (exactly
    ``drive_minutes`` when given).
    """
    if length < 1:
        raise ValueError("scenario length must be >= 1")
    rng = random.Random(seed)
    if length >= len(CATALOG):
        steps = list(CATALOG) + [rng.choice(CATALOG) for _ in range(length - len(CATALOG))]
        rng.shuffle(steps)
    else:
        steps = ["drive"] + rng.sample([c for c in CATALOG if c != "drive"], length - 1)
        rng.shuffle(steps)
    base = start or DEFAULT_START
    t = int(base.timestamp()) * 1000 + rng.randrange(0, 3600) * 1000
    pos = _point(rng)
    addr = _address(rng)
    start_pos, start_addr = pos, addr
    odo0 = round(rng.uniform(10_000, 60_000), 1)
    odo = odo0
    actions: list[Action] = []
    for step in steps:
        t += rng.randrange(5 * 60, 40 * 60) * 1000
        if step == "lock_unlock":
            actions.append(Action("lock", t, lat=pos[0], lon=pos[1]))
            t += rng.randrange(60, 300) * 1000
            actions.append(Action("unlock", t, lat=pos[0], lon=pos[1]))
        elif step == "refuel":
            liters = round(rng.uniform(20, 55), 2)
            price = round(liters * rng.uniform(1.2, 1.6), 2)
            station = (round(pos[0] + 0.0002, 6), round(pos[1] + 0.0002, 6))
            actions.append(Action("refuel", t, lat=station[0], lon=station[1], liters=liters, price=price,
                                  address=f"Tankstelle {_address(rng)}", odometer_km=round(odo, 1)))
        elif step == "drive":
            minutes = drive_minutes if drive_minutes is not None else rng.randint(10, 25)
            duration = minutes * 60
            dest = _point(rng)
            dest_addr = _address(rng)
            route = _route(rng, t, duration, pos, dest)
            dist = round(polyline_km(route), 6)
            actions.append(Action("drive", t, end=route[-1].t, route=route, address=addr,
                                  end_address=dest_addr, odometer_km=round(odo, 1), distance_km=dist,
                                  lat=pos[0], lon=pos[1]))
            odo += dist
            pos, addr = dest, dest_addr
            t = route[-1].t
        elif step in ("navigate", "send_trip"):
            dest = _point(rng)
            actions.append(Action(step, t, lat=dest[0], lon=dest[1], destination=_address(rng)))
        elif step == "save_parking":
            actions.append(Action("save_parking", t, lat=pos[0], lon=pos[1], photo=_photo(rng), address=addr))
        elif step == "locate":
            actions.append(Action("locate", t, lat=pos[0], lon=pos[1]))
        elif step == "summon":
            actions.append(Action("summon", t, end=t + 30_000, lat=pos[0], lon=pos[1]))
            t += 30_000
        elif step == "climate":
            actions.append(Action("climate", t, temp_c=rng.choice([18.0, 19.5, 20.0, 21.0, 22.5, 24.0])))
    first, last = rng.choice(_FIRST), rng.choice(_LAST)
    user = {
        "name": f"{first} {last}",
        "email": f"{first.lower()}.{last.lower()}@example.org".replace("ü", "ue"),
        "phone": f"+49 251 {rng.randint(100000, 999999)}",
        "date_of_birth": f"{rng.randint(1960, 2000)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
        "address": _address(rng),
        "user_id": str(uuid.UUID(int=rng.getrandbits(128), version=4)),
    }
    vehicle = {
        "model": rng.choice(("A4 Avant", "Tiguan", "Astra K", "Model 3", "C 220 d")),
        "nickname": rng.choice(("Blue", "Family car", "Daily")),
        "year": rng.randint(2013, 2020),
        "engine": rng.choice(("2.0 TDI", "1.4 TSI", "electric")),
        "transmission": rng.choice(("DSG 7", "manual 6", "single speed")),
        "plate": f"MS-{rng.choice('ABCDEFGH')}{rng.choice('ABCDEFGH')} {rng.randint(100, 9999)}",
        "adapter_id": hashlib.sha256(f"adapter-{seed}".encode()).hexdigest()[:12].upper(),
    }
    return Scenario(seed, make_vin(rng), user, vehicle, tuple(actions), start_pos[0], start_pos[1],
                    start_addr, odo0)


def container_uuid(seed: int, app_id: str) -> str:
    digest = hashlib.sha256(f"{seed}/{app_id}".encode()).digest()
    return str(uuid.UUID(bytes=digest[:16], version=4)).upper()


def stable_rng(scenario: Scenario, *labels: str) -> random.Random:
    """A generator keyed by the scenario seed and a label path."""
    key = hashlib.sha256("/".join([str(scenario.seed), *labels]).encode()).digest()
    return random.Random(int.from_bytes(key[:8], "big"))


def minute_marks(drive: Action) -> list[int]:
    """Whole minutes after the drive start that fall inside the drive."""
    n = (drive.end - drive.t) // 60_000
    return [drive.t + i * 60_000 for i in range(1, n + 1) if drive.t + i * 60_000 <= drive.end]


def midpoint(drive: Action) -> RoutePoint:
    return drive.route[len(drive.route) // 2]


def round_coord(x: float) -> float:
    return math.floor(x * 1e6 + 0.5) / 1e6
