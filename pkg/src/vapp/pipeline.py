"""One pass over an evidence source: inventory, locate, extract, normalize."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AmbiguousContainer
from .events import CanonicalEvent, SkipNote, attach_container_vin, normalize_with_skips
from .evidence import EvidenceSource, FileEntry, enumerate_files
from .extractors import ExtractionResult, extract_artifacts
from .locator import ContainerMatch, detect_android, detect_ios
from .registry import AppDescriptor


# skip reasons that say nothing is wrong with the container
BENIGN_SKIPS = ("empty file", "no relevant records", "symbolic link")


@dataclass
class SourceRun:
    source: EvidenceSource
    entries: list[FileEntry] = field(default_factory=list)
    matches: list[ContainerMatch] = field(default_factory=list)
    results: dict[str, ExtractionResult] = field(default_factory=dict)
    events: list[CanonicalEvent] = field(default_factory=list)
    skips: list[SkipNote] = field(default_factory=list)
    # containers that produced neither events nor a clean skip
    failed: list[tuple[str, str]] = field(default_factory=list)


def run_source(source: EvidenceSource, descriptors: list[AppDescriptor] | None = None) -> SourceRun:
    run = SourceRun(source)
    run.entries = enumerate_files(source)
    run.matches = detect_android(run.entries, descriptors)
    try:
        run.matches += detect_ios(run.entries, source.read, descriptors)
    except AmbiguousContainer as exc:
        run.failed.append(("ios", str(exc)))
    for match in run.matches:
        result = extract_artifacts(match, source)
        run.results[match.container_root] = result
        events, skips = normalize_with_skips(result.records)
        run.events.extend(attach_container_vin(events))
        run.skips.extend(skips)
        run.skips.extend(SkipNote(s.path, "file", s.reason) for s in result.skipped)
        faults = [r for _, r in result.skipped if not r.startswith(BENIGN_SKIPS)]
        if not result.records and faults:
            run.failed.append((match.container_root, "no records; all artifacts failed"))
    return run
