"""Extraction framework: apply a descriptor's artifact specs to a container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

from ..errors import FormatError, NotFound, SourceClosed, Unreadable
from ..evidence import EvidenceSource
from ..formats import SQLITE_MAGIC, Table, TableSet, detect_encrypted_db, read_sqlite
from ..locator import ContainerMatch
from ..registry import ArtifactSpec

ACTOR = "vapp.extract"


@dataclass(frozen=True)
class RawRecord:
    app_id: str
    platform: str
    artifact_path: str
    locator: str
    kind_hint: str
    fields: dict[str, Any]
    encrypted: bool = False
    categories: tuple[str, ...] = ()
    epoch: str | None = None
    sha256: str = ""
    source_id: str = ""
    decoder: str = ""


class Skipped(NamedTuple):
    path: str
    reason: str


@dataclass
class ExtractionResult:
    records: list[RawRecord] = field(default_factory=list)
    skipped: list[Skipped] = field(default_factory=list)
    encrypted_artifacts: list[str] = field(default_factory=list)

    def extend(self, other: "ExtractionResult") -> None:
        self.records.extend(other.records)
        self.skipped.extend(other.skipped)
        self.encrypted_artifacts.extend(other.encrypted_artifacts)

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class Draft:
    """A decoder's output before the framework stamps provenance on it."""

    kind: str
    locator: str
    fields: dict[str, Any]
    category: str | None = None
    epoch: str | None = None


class Artifact(NamedTuple):
    path: str
    data: bytes
    spec: ArtifactSpec
    sidecars: dict[str, bytes]

    def tables(self) -> TableSet:
        return read_sqlite(self.data, wal=self.sidecars.get("-wal"), journal=self.sidecars.get("-journal"))


Decoder = Callable[[Artifact], list[Draft]]
DECODERS: dict[str, Decoder] = {}


def decoder(name: str):
    def register(fn: Decoder) -> Decoder:
        DECODERS[name] = fn
        return fn
    return register


def draft(kind: str, locator: str, category: str | None = None, epoch: str | None = None, **fields) -> Draft:
    return Draft(kind, locator, {k: v for k, v in fields.items() if v is not None}, category, epoch)


def col(row: dict, *names: str, pos: int | None = None, columns: list[str] | None = None):
    """Read a column by name (case-insensitive), falling back to position."""
    for name in names:
        if name in row:
            return row[name]
    lowered = {k.lower(): k for k in row}
    for name in names:
        key = lowered.get(name.lower())
        if key is not None:
            return row[key]
    if pos is not None:
        keys = columns if columns is not None else list(row)
        if 0 <= pos < len(keys):
            return row[keys[pos]]
    return None


def rows(tables: TableSet, name: str) -> list[dict]:
    table: Table | None = tables.get(name)
    return table.dicts() if table is not None else []


@decoder("marker_only")
def _marker_only(art: Artifact) -> list[Draft]:
    return []


def _stamp(match: ContainerMatch, source: EvidenceSource, art: Artifact, d: Draft) -> RawRecord:
    return RawRecord(
        app_id=match.app_id,
        platform=match.platform,
        artifact_path=art.path,
        locator=d.locator,
        kind_hint=d.kind,
        fields=dict(d.fields),
        categories=(d.category,) if d.category else (),
        epoch=d.epoch,
        sha256=source.inventory[art.path].sha256,
        source_id=source.id,
        decoder=art.spec.decoder,
    )


def _encrypted(match: ContainerMatch, source: EvidenceSource, path: str, spec: ArtifactSpec) -> RawRecord:
    return RawRecord(
        app_id=match.app_id,
        platform=match.platform,
        artifact_path=path,
        locator="file",
        kind_hint="encrypted_artifact",
        fields={},
        encrypted=True,
        categories=tuple(spec.categories),
        sha256=source.inventory[path].sha256,
        source_id=source.id,
        decoder=spec.decoder,
    )


def extract_artifacts(match: ContainerMatch, source: EvidenceSource) -> ExtractionResult:
    """Apply every artifact spec of ``match``'s descriptor to its container."""
    if source.closed:
        raise SourceClosed(source.id)
    result = ExtractionResult()
    inventory = source.inventory
    prefix = match.container_root.rstrip("/") + "/"
    specs = match.descriptor.artifact_specs
    for path in sorted(p for p in inventory if p.startswith(prefix)):
        rel = path[len(prefix):]
        spec = next((s for s in specs if s.matches(rel)), None)
        if spec is None:
            continue
        entry = inventory[path]
        if entry.is_symlink:
            result.skipped.append(Skipped(path, "symbolic link not followed"))
            continue
        try:
            data = source.read(path)
        except (Unreadable, NotFound) as exc:
            result.skipped.append(Skipped(path, f"unreadable: {exc}"))
            continue
        source.record_parsed(path, ACTOR)
        if not data:
            result.skipped.append(Skipped(path, "empty file"))
            continue
        if spec.format == "sqlite":
            if detect_encrypted_db(data):
                result.encrypted_artifacts.append(path)
                result.records.append(_encrypted(match, source, path, spec))
                continue
            if not data.startswith(SQLITE_MAGIC):
                result.skipped.append(Skipped(path, "not a SQLite database (low entropy, no header)"))
                continue
        elif "encrypted_artifact" in spec.yields and detect_encrypted_db(data):
            result.encrypted_artifacts.append(path)
            result.records.append(_encrypted(match, source, path, spec))
            continue
        sidecars = {}
        for suffix in ("-wal", "-journal"):
            side = path + suffix
            if side in inventory:
                try:
                    sidecars[suffix] = source.read(side)
                    source.record_parsed(side, ACTOR)
                except (Unreadable, NotFound):
                    pass
        fn = DECODERS.get(spec.decoder)
        if fn is None:
            result.skipped.append(Skipped(path, f"no decoder {spec.decoder!r}"))
            continue
        art = Artifact(path, data, spec, sidecars)
        try:
            drafts = fn(art)
        except FormatError as exc:
            result.skipped.append(Skipped(path, f"{type(exc).__name__}: {exc}"))
            continue
        except (ValueError, TypeError, KeyError, IndexError, AttributeError, RecursionError, OverflowError) as exc:
            result.skipped.append(Skipped(path, f"decoder fault: {type(exc).__name__}: {exc}"))
            continue
        if not drafts:
            result.skipped.append(Skipped(path, "no relevant records"))
            continue
        result.records.extend(_stamp(match, source, art, d) for d in drafts)
    return result
