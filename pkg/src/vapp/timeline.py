"""Merged, ordered, queryable view over events from every source."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Iterable

from .events import CanonicalEvent, GeoPoint, haversine_m
from .evidence import rfc3339, utc_now

MERGE_TOLERANCE_MS = 60_000
MERGE_DISTANCE_M = 50.0
FUEL_TOLERANCE_L = 0.01


@dataclass(frozen=True)
class Interval:
    from_ms: int
    to_ms: int

    def __post_init__(self):
        if self.from_ms > self.to_ms:
            raise ValueError("interval start after end")

    @property
    def duration_ms(self) -> int:
        return self.to_ms - self.from_ms

    def to_json(self) -> dict:
        return {"from": self.from_ms, "to": self.to_ms}


@dataclass(frozen=True)
class Timeline:
    events: tuple[CanonicalEvent, ...]
    sources: tuple[str, ...]
    built_at: datetime

    def __len__(self) -> int:
        return len(self.events)

    @property
    def dated(self) -> list[CanonicalEvent]:
        return [e for e in self.events if e.start is not None]


def timeline_key(e: CanonicalEvent):
    if e.start is None:
        p = e.provenance[0]
        return (1, 0, "", p.artifact_path, p.locator, e.event_id)
    return (0, e.start, e.kind, "", "", e.event_id)


def _origins(e: CanonicalEvent) -> set[tuple[str, str, str]]:
    return {(p.source_id, p.app_id, p.platform) for p in e.provenance}


def _same_activity(a: CanonicalEvent, b: CanonicalEvent) -> bool:
    if a.kind != b.kind or a.start is None or b.start is None:
        return False
    if abs(a.start - b.start) > MERGE_TOLERANCE_MS:
        return False
    fa, fb = a.attributes.get("fuel_liters"), b.attributes.get("fuel_liters")
    if isinstance(fa, (int, float)) and isinstance(fb, (int, float)) and abs(fa - fb) > FUEL_TOLERANCE_L:
        return False
    if a.geo_start is not None and b.geo_start is not None:
        if haversine_m(a.geo_start, b.geo_start) > MERGE_DISTANCE_M:
            return False
    if a.attributes.get("snapshot") != b.attributes.get("snapshot"):
        return False
    aa, ab = a.attributes.get("address"), b.attributes.get("address")
    if isinstance(aa, str) and isinstance(ab, str) and aa.strip().lower() != ab.strip().lower():
        return False
    return True


def _dedupe(events: Iterable[CanonicalEvent]) -> dict[str, CanonicalEvent]:
    by_id: dict[str, CanonicalEvent] = {}
    for e in events:
        if e.event_id in by_id:
            e = by_id[e.event_id].with_provenance(e.provenance)
        by_id[e.event_id] = e
    return by_id


def build(events: Iterable[CanonicalEvent], *, built_at: datetime | None = None) -> Timeline:
    """Sort, de-duplicate by id, and merge one activity seen by several sources.

    Events from distinct (source, app, platform) origins merge when they share
    kind and a compatible VIN (unknown matches any), start within 60 s, and agree on fuel amount, position
    (50 m) and address where both carry them. Clustering runs in canonical
    order, so the result does not depend on input order.
    """
    by_id = _dedupe(events)
    ordered = sorted(by_id.values(), key=lambda e: (e.kind, timeline_key(e)))
    clusters: list[list[CanonicalEvent]] = []
    open_by_kind: dict[str, list[int]] = {}
    for e in ordered:
        placed = False
        if e.start is not None:
            for ci in open_by_kind.get(e.kind, []):
                cluster = clusters[ci]
                taken = set().union(*(_origins(m) for m in cluster))
                vins = {m.vin for m in cluster if m.vin}
                # an unknown VIN is compatible with any, two known VINs must agree
                if e.vin and vins - {e.vin}:
                    continue
                if not (_origins(e) & taken) and _same_activity(cluster[0], e):
                    cluster.append(e)
                    placed = True
                    break
            if not placed:
                open_by_kind.setdefault(e.kind, []).append(len(clusters))
        if not placed:
            clusters.append([e])
    merged = []
    for cluster in clusters:
        anchor = cluster[0]
        for other in cluster[1:]:
            anchor = anchor.with_provenance(other.provenance)
        vin = next((m.vin for m in cluster if m.vin), None)
        if anchor.vin is None and vin is not None:
            anchor = replace(anchor, vin=vin)
        merged.append(anchor)
    merged.sort(key=timeline_key)
    sources = sorted({p.source_id for e in merged for p in e.provenance})
    return Timeline(tuple(merged), tuple(sources), built_at or utc_now())


def _moves(e: CanonicalEvent) -> bool:
    if e.kind == "trip":
        return True
    if e.kind == "location_fix":
        speed = e.attributes.get("speed_kmh")
        return isinstance(speed, (int, float)) and speed > 0
    return False


def parking_ends(t: Timeline) -> dict[str, int | None]:
    """event_id of each parking event -> start of the next movement (same VIN)."""
    moves: dict[str | None, list[int]] = {}
    for m in t.dated:
        if _moves(m):
            moves.setdefault(m.vin, []).append(m.start)
    out: dict[str, int | None] = {}
    for e in t.dated:
        if e.kind == "parking":
            starts = sorted(moves.get(e.vin, []))
            i = bisect.bisect_right(starts, e.start)
            out[e.event_id] = starts[i] if i < len(starts) else None
    return out


def _span(e: CanonicalEvent, ends: dict[str, int | None]) -> tuple[int, float]:
    if e.kind == "parking" and e.end is None:
        nxt = ends.get(e.event_id)
        return e.start, math.inf if nxt is None else nxt
    return e.start, e.end if e.end is not None else e.start


def query(t: Timeline, interval: Interval, kinds: Iterable[str] | None = None, vin: str | None = None,
          *, include_undated: bool = False) -> list[CanonicalEvent]:
    """Events whose span overlaps ``interval``; open-ended parking extends to infinity."""
    kinds = set(kinds) if kinds is not None else None
    ends = parking_ends(t)
    out = []
    for e in t.events:
        if kinds is not None and e.kind not in kinds:
            continue
        if vin is not None and e.vin != vin:
            continue
        if e.start is None:
            if include_undated:
                out.append(e)
            continue
        lo, hi = _span(e, ends)
        if lo <= interval.to_ms and hi >= interval.from_ms:
            out.append(e)
    return out


@dataclass(frozen=True)
class ParkingEpisode:
    geo: GeoPoint | None
    start: int
    duration_ms: int | None

    def to_json(self) -> dict:
        return {"geo": self.geo.to_json() if self.geo else None, "start": self.start,
                "duration_ms": self.duration_ms}


@dataclass
class VinSummary:
    trip_count: int = 0
    total_distance_km: float = 0.0
    refuel_count: int = 0
    total_fuel_liters: float = 0.0
    parking_episodes: list[ParkingEpisode] = field(default_factory=list)
    lock_unlock_count: int = 0
    first_seen: int | None = None
    last_seen: int | None = None

    def to_json(self) -> dict:
        return {
            "trip_count": self.trip_count,
            "total_distance_km": round(self.total_distance_km, 6),
            "refuel_count": self.refuel_count,
            "total_fuel_liters": round(self.total_fuel_liters, 6),
            "parking_episodes": [p.to_json() for p in self.parking_episodes],
            "lock_unlock_count": self.lock_unlock_count,
            "first_seen": self.first_seen,
            "last_seen": self.last_seen,
        }


@dataclass
class ActivitySummary:
    per_vin: dict[str | None, VinSummary] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {(vin or "unknown"): s.to_json() for vin, s in sorted(self.per_vin.items(), key=lambda kv: kv[0] or "")}


def _add(vs: VinSummary, e: CanonicalEvent, ends: dict[str, int | None]) -> None:
    if e.start is not None:
        last = e.end if e.end is not None else e.start
        vs.first_seen = e.start if vs.first_seen is None else min(vs.first_seen, e.start)
        vs.last_seen = last if vs.last_seen is None else max(vs.last_seen, last)
    if e.kind == "trip":
        vs.trip_count += 1
        dist = e.attributes.get("distance_km")
        if isinstance(dist, (int, float)):
            vs.total_distance_km += dist
    elif e.kind == "refuel":
        vs.refuel_count += 1
        liters = e.attributes.get("fuel_liters")
        if isinstance(liters, (int, float)):
            vs.total_fuel_liters += liters
    elif e.kind == "lock_state":
        vs.lock_unlock_count += 1
    elif e.kind == "parking" and e.start is not None:
        if e.end is not None:
            duration = e.end - e.start
        else:
            nxt = ends.get(e.event_id)
            duration = None if nxt is None else nxt - e.start
        vs.parking_episodes.append(ParkingEpisode(e.geo_start, e.start, duration))


def summarize(t: Timeline) -> ActivitySummary:
    ends = parking_ends(t)
    summary = ActivitySummary()
    for e in t.events:
        if e.kind in ("encrypted_artifact", "schema_present"):
            continue
        _add(summary.per_vin.setdefault(e.vin, VinSummary()), e, ends)
    return summary


def gaps(t: Timeline, min_gap_ms: int) -> list[Interval]:
    """Maximal stretches with no dated event coverage, at least ``min_gap_ms`` long."""
    if min_gap_ms <= 0:
        raise ValueError("min_gap must be positive")
    spans = sorted((e.start, e.end if e.end is not None else e.start) for e in t.dated)
    out = []
    if not spans:
        return out
    covered = spans[0][1]
    for lo, hi in spans[1:]:
        if lo - covered >= min_gap_ms:
            out.append(Interval(covered, lo))
        covered = max(covered, hi)
    return out


def track(t: Timeline, trip: CanonicalEvent) -> list[CanonicalEvent]:
    """Location fixes bound to ``trip`` via ``trip_ref``, in time order."""
    ref = trip.attributes.get("trip_ref")
    if ref is None:
        return []
    paths = {p.artifact_path for p in trip.provenance}
    fixes = [e for e in t.events if e.kind == "location_fix" and e.attributes.get("trip_ref") == ref
             and any(p.artifact_path in paths for p in e.provenance)]
    return sorted(fixes, key=timeline_key)


def polyline_km(points: Iterable[GeoPoint]) -> float:
    pts = list(points)
    return sum(haversine_m(a, b) for a, b in zip(pts, pts[1:])) / 1000.0


def timeline_json(t: Timeline, fixed_built_at: datetime | None = None) -> dict:
    return {
        "built_at": rfc3339(fixed_built_at or t.built_at),
        "sources": list(t.sources),
        "events": [e.to_json() for e in t.events],
    }

