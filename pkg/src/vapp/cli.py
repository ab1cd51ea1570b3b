"""Command-line front end.

Exit codes: 0 success, 1 partial failure, 2 usage or fatal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

from . import __version__
from .errors import MalformedManifest, UnknownApp, UnknownManufacturer, VappError
from .events import CanonicalEvent
from .evidence import fixed_clock, open_source, parse_rfc3339, sha256_hex, utc_now
from .pipeline import SourceRun, run_source
from .registry import MANUFACTURERS, load_registry, use_registry
from .report import (correlation_doc, custody_bytes, dumps, events_csv, events_json, html_report,
                     summary_doc)
from .sar import correlate, import_sar
from .timeline import Timeline, build, timeline_json

EXIT_OK, EXIT_PARTIAL, EXIT_FATAL = 0, 1, 2
FORMATS = ("json", "csv", "html")
DEFAULT_WINDOW_S = 60.0

log = logging.getLogger("vapp")


@dataclass
class RunConfig:
    sources: list[str] = field(default_factory=list)
    registry: str | None = None
    out: Path = Path("vapp-out")
    formats: frozenset[str] = frozenset({"json", "csv"})
    sar: list[str] = field(default_factory=list)
    root_prefix: str | None = None
    jobs: int = 1
    fixed_clock: datetime | None = None
    verbosity: int = 0

    @property
    def clock(self):
        return fixed_clock(self.fixed_clock) if self.fixed_clock else utc_now


class UsageError(VappError):
    pass


def _formats(text: str) -> frozenset[str]:
    values = frozenset(v.strip() for v in text.split(",") if v.strip())
    bad = values - set(FORMATS)
    if bad or not values:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {','.join(FORMATS)}")
    return values


def _clock(text: str) -> datetime:
    try:
        return parse_rfc3339(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an RFC 3339 timestamp: {text!r}") from None


def _err(msg: str) -> None:
    print(f"vapp: {msg}", file=sys.stderr)


def _apply_registry(cfg: RunConfig) -> None:
    path = cfg.registry or os.environ.get("VAPP_REGISTRY")
    use_registry(load_registry(path) if path else None)


def _run_all(cfg: RunConfig) -> list[SourceRun]:
    """Open and process every source; runs come back ordered by source id."""
    sources = [open_source(p, root_prefix=cfg.root_prefix, clock=cfg.clock, jobs=cfg.jobs)
               for p in sorted(set(cfg.sources))]
    try:
        with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
            runs = list(pool.map(run_source, sources))
    finally:
        for s in sources:
            s.close()
    return sorted(runs, key=lambda r: r.source.id)


def _write(out: Path, name: str, data: bytes) -> str:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_bytes(data)
    return sha256_hex(data)


def _container_rows(runs: list[SourceRun]) -> list[dict]:
    return [{"source_id": r.source.id, "app_id": m.app_id, "platform": m.platform,
             "container_root": m.container_root, "confidence": m.confidence}
            for r in runs for m in sorted(r.matches, key=lambda m: m.container_root)]


# --- subcommands -----------------------------------------------------------


def cmd_scan(cfg: RunConfig) -> int:
    runs = _run_all(cfg)
    rows = _container_rows(runs)
    print(f"{len(rows)} containers")
    for r in rows:
        print(f"{r['app_id']}\t{r['platform']}\t{r['container_root']}\t{r['confidence']}")
    for run in runs:
        for path, reason in run.source.errors:
            _err(f"{run.source.id}: {path}: {reason}")
    return EXIT_OK


def _timeline(cfg: RunConfig) -> tuple[list[SourceRun], Timeline]:
    runs = _run_all(cfg)
    events: list[CanonicalEvent] = [e for r in runs for e in r.events]
    return runs, build(events, built_at=cfg.clock())


def cmd_timeline(cfg: RunConfig) -> int:
    runs, t = _timeline(cfg)
    built = cfg.clock()
    skips = [{"source_id": r.source.id, "path": s.artifact_path, "locator": s.locator, "reason": s.reason}
             for r in runs for s in r.skips]
    failed = [{"source_id": r.source.id, "container": c, "reason": why} for r in runs for c, why in r.failed]
    summary = summary_doc(t, built_at=built, containers=_container_rows(runs), skips=skips, failed=failed)
    written: dict[str, str] = {}
    if "json" in cfg.formats:
        written["events.json"] = _write(cfg.out, "events.json", events_json(t, built))
    if "csv" in cfg.formats:
        written["events.csv"] = _write(cfg.out, "events.csv", events_csv(t))
    written["summary.json"] = _write(cfg.out, "summary.json", dumps(summary))
    for run in runs:
        for name, digest in written.items():
            run.source.record_exported(f"report:{name}", digest)
    custody = [rec for r in runs for rec in r.source.custody.records()]
    _write(cfg.out, "custody.ndjson", custody_bytes(custody))
    if "html" in cfg.formats:
        _write(cfg.out, "report.html", html_report(
            events=timeline_json(t, built), summary=summary, custody=[c.to_json() for c in custody]))
    print(f"{len(t.events)} events from {len(runs)} sources -> {cfg.out}")
    for f in failed:
        _err(f"{f['source_id']}: {f['container']}: {f['reason']}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _load_events(path: Path) -> list[CanonicalEvent]:
    doc = json.loads(path.read_text("utf-8"))
    items = doc["events"] if isinstance(doc, dict) else doc
    return [CanonicalEvent.from_json(e) for e in items]


def cmd_correlate(cfg: RunConfig, *, window_s: float = DEFAULT_WINDOW_S, events: str | None = None,
                  manufacturer: str | None = None) -> int:
    if not cfg.sar:
        raise UsageError("at least one --sar container is required")
    built = cfg.clock()
    runs: list[SourceRun] = []
    if cfg.sources:
        runs, t = _timeline(cfg)
    elif events:
        t = build(_load_events(Path(events)), built_at=built)
    else:
        t = build([], built_at=built)
    pairs = []
    for path in sorted(cfg.sar):
        ds = import_sar(path, manufacturer)
        pairs.append((ds, correlate(t, ds, int(window_s * 1000))))
    doc = correlation_doc(pairs, built_at=built)
    _write(cfg.out, "correlation.json", dumps(doc))
    summary = summary_doc(t, built_at=built, containers=_container_rows(runs)) if runs or events else None
    if "html" in cfg.formats:
        custody = [rec.to_json() for r in runs for rec in r.source.custody.records()]
        _write(cfg.out, "report.html", html_report(summary=summary, correlation=doc, custody=custody))
    matched = sum(len(r.matched) for _, r in pairs)
    print(f"{matched} matched pairs across {len(pairs)} SAR containers -> {cfg.out}")
    return EXIT_OK


def cmd_sar(cfg: RunConfig, **kwargs) -> int:
    """Decode SAR containers; with sources given this is the same as correlate."""
    return cmd_correlate(cfg, **kwargs)


def cmd_fixtures(args) -> int:
    from .forge import STATES, GroundTruth, render_extraction
    from .forge.sar import render_sar, write_sar
    from .forge.scenario import generate_scenario

    scenario = generate_scenario(args.seed, args.length, drive_minutes=args.drive_minutes)
    gt = GroundTruth(scenario)
    cells = sorted(gt.matrix.cells)
    if args.apps:
        wanted = {a.strip() for a in args.apps.split(",") if a.strip()}
        cells = [c for c in cells if c[0] in wanted or f"{c[0]}/{c[1]}" in wanted]
        if not cells:
            raise UnknownApp(args.apps)
    states = [s.strip() for s in args.states.split(",")] if args.states else list(STATES)
    for s in states:
        if s not in STATES:
            raise UsageError(f"unknown state {s!r}")
    out = Path(args.out)
    expected = {}
    for app_id, platform in cells:
        for state in states:
            name = f"{app_id}_{platform}_{state}"
            target = out / name
            target.mkdir(parents=True, exist_ok=True)
            render_extraction(gt, app_id, platform, state, target)
            expected[name] = [list(s) for s in gt.expected_events(app_id, platform, state)]
    if args.with_sar:
        for m in MANUFACTURERS:
            write_sar(render_sar(gt, m), out / "sar" / m)
    (out / "expected.json").write_bytes(dumps({"seed": args.seed, "vin": scenario.vin, "cells": expected}))
    print(f"{len(cells) * len(states)} fixture cells -> {out}")
    return EXIT_OK


# --- argument parsing ------------------------------------------------------


def _common(p: argparse.ArgumentParser, formats: str) -> None:
    p.add_argument("--source", action="append", default=[], metavar="PATH",
                   help="extraction directory or archive (repeatable)")
    p.add_argument("--registry", metavar="PATH", help="registry override (else $VAPP_REGISTRY)")
    p.add_argument("--out", default="vapp-out", metavar="DIR")
    p.add_argument("--format", type=_formats, default=_formats(formats), dest="formats")
    p.add_argument("--root-prefix", metavar="PATH", help="archive folder that wraps the device root")
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    p.add_argument("--fixed-clock", type=_clock, metavar="RFC3339",
                   help="pin every timestamp the tool itself generates")
    p.add_argument("-v", "--verbose", action="count", default=0)


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vapp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"vapp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("scan", help="list app containers found in sources"), "json")
    _common(sub.add_parser("timeline", help="extract, normalize and merge events"), "json,csv")
    for name in ("sar", "correlate"):
        p = sub.add_parser(name, help="import SAR containers and correlate with phone events")
        _common(p, "json,html")
        p.add_argument("--sar", action="append", default=[], metavar="DIR", help="SAR container (repeatable)")
        p.add_argument("--manufacturer", choices=MANUFACTURERS)
        p.add_argument("--events", metavar="FILE", help="events.json from a previous timeline run")
        p.add_argument("--window", type=float, default=DEFAULT_WINDOW_S, metavar="SECONDS")
    p = sub.add_parser("fixtures", help="render synthetic extractions")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--length", type=int, default=9)
    p.add_argument("--drive-minutes", type=int, default=None)
    p.add_argument("--apps", help="comma list of app ids or app/platform pairs")
    p.add_argument("--states", help="comma list of logged_in,logged_out,uninstalled")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--with-sar", action="store_true")
    return ap


def _config(args) -> RunConfig:
    return RunConfig(
        sources=list(args.source), registry=args.registry, out=Path(args.out), formats=args.formats,
        sar=list(getattr(args, "sar", []) or []), root_prefix=args.root_prefix, jobs=max(1, args.jobs),
        fixed_clock=args.fixed_clock, verbosity=args.verbose,
    )


def main(argv: list[str] | None = None) -> int:
    ap = parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_FATAL
    try:
        if args.command == "fixtures":
            return cmd_fixtures(args)
        cfg = _config(args)
        logging.basicConfig(level=logging.WARNING - 10 * min(cfg.verbosity, 2), stream=sys.stderr)
        _apply_registry(cfg)
        if args.command in ("scan", "timeline") and not cfg.sources:
            raise UsageError("at least one --source is required")
        if args.command == "scan":
            return cmd_scan(cfg)
        if args.command == "timeline":
            return cmd_timeline(cfg)
        return cmd_correlate(cfg, window_s=args.window, events=args.events, manufacturer=args.manufacturer)
    except (MalformedManifest, UnknownManufacturer, UnknownApp, UsageError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_FATAL
    except VappError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_FATAL
    except (OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_FATAL
    finally:
        use_registry(None)


if __name__ == "__main__":
    sys.exit(main())
