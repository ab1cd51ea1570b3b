"""Evidence ingest: open extractions, inventory and hash files, keep custody.

An extraction is a directory tree, a ZIP archive or a (optionally gzipped)
POSIX tar archive holding a copy of a device filesystem. Every regular file
is hashed with SHA-256 at enumeration time; later reads are checked against
that digest, and each parse or export is appended to the source's custody
log.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import os
import stat
import tarfile
import threading
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from .errors import NotFound, SourceClosed, Unreadable, UnsupportedArchive

SOURCE_KINDS = ("directory", "zip_archive", "tar_archive")
CUSTODY_ACTIONS = ("inventoried", "parsed", "exported")
EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"

# top-level directories of a device filesystem; anything else wrapping an
# archive is treated as a packaging folder and stripped
DEVICE_ROOTS = {"data", "private", "var", "system", "sdcard", "storage", "mnt", "cache", "vendor"}

_CHUNK = 1 << 16

Clock = Callable[[], datetime]


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def fixed_clock(at: datetime | str) -> Clock:
    """Clock that always returns ``at`` (RFC 3339 text or aware datetime)."""
    if isinstance(at, str):
        at = parse_rfc3339(at)
    return lambda: at


def parse_rfc3339(text: str) -> datetime:
    value = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if value.tzinfo is None:
        value = value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


def rfc3339(value: datetime) -> str:
    value = value.astimezone(timezone.utc)
    return value.strftime("%Y-%m-%dT%H:%M:%S.") + f"{value.microsecond // 1000:03d}Z"


def normalize_path(path: str) -> str:
    """Device-absolute, forward-slash path with ``.``/``..`` resolved lexically.

    ``..`` never climbs above the root. Case is preserved. Idempotent.
    """
    parts: list[str] = []
    for part in path.replace("\\", "/").split("/"):
        if part in ("", "."):
            continue
        if part == "..":
            if parts:
                parts.pop()
            continue
        parts.append(part)
    return "/" + "/".join(parts)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class FileEntry:
    path: str
    size: int
    sha256: str | None
    mtime: datetime | None = None
    link_target: str | None = None

    @property
    def is_symlink(self) -> bool:
        return self.link_target is not None


@dataclass(frozen=True)
class CustodyRecord:
    source_id: str
    file_path: str
    sha256: str
    action: str
    actor: str
    at: datetime

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id,
            "file_path": self.file_path,
            "sha256": self.sha256,
            "action": self.action,
            "actor": self.actor,
            "at": rfc3339(self.at),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CustodyRecord":
        return cls(obj["source_id"], obj["file_path"], obj["sha256"], obj["action"],
                   obj["actor"], parse_rfc3339(obj["at"]))


@dataclass(frozen=True)
class VerificationReport:
    ok: tuple[str, ...]
    changed: tuple[str, ...]
    missing: tuple[str, ...]

    @property
    def all_ok(self) -> bool:
        return not self.changed and not self.missing

    def status(self, path: str) -> str:
        if path in self.changed:
            return "changed"
        if path in self.missing:
            return "missing"
        return "ok"


class CustodyLog:
    """Append-only, thread-safe custody record sequence."""

    def __init__(self, clock: Clock = utc_now):
        self._records: list[CustodyRecord] = []
        self._lock = threading.Lock()
        self._clock = clock

    def append(self, source_id: str, file_path: str, sha256: str, action: str, actor: str) -> CustodyRecord:
        if action not in CUSTODY_ACTIONS:
            raise ValueError(f"unknown custody action {action!r}")
        with self._lock:
            at = self._clock()
            if self._records and at < self._records[-1].at:
                at = self._records[-1].at
            record = CustodyRecord(source_id, file_path, sha256, action, actor, at)
            self._records.append(record)
            return record

    def records(self) -> list[CustodyRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        return len(self._records)


@dataclass
class EvidenceSource:
    """An opened extraction. Create with :func:`open_source`."""

    id: str
    kind: str
    root_label: str
    opened_at: datetime
    location: Path
    root_prefix: str | None = None
    actor: str = "vapp"
    clock: Clock = field(default=utc_now, repr=False)
    errors: list[tuple[str, str]] = field(default_factory=list, repr=False)
    jobs: int = 1

    def __post_init__(self):
        self.custody = CustodyLog(self.clock)
        self._archive = None
        self._members: dict[str, object] = {}
        self._inventory: dict[str, FileEntry] = {}
        self._read_lock = threading.Lock()
        self.closed = False

    # archive handles are opened lazily and reused
    def _open_archive(self):
        if self._archive is None:
            if self.kind == "zip_archive":
                self._archive = zipfile.ZipFile(self.location)
            elif self.kind == "tar_archive":
                self._archive = tarfile.open(self.location, mode="r:*")
        return self._archive

    def close(self) -> None:
        if self._archive is not None:
            self._archive.close()
            self._archive = None
        self.closed = True

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def inventory(self) -> dict[str, FileEntry]:
        return dict(self._inventory)

    def _device_path(self, raw: str) -> str | None:
        path = normalize_path(raw)
        if self.root_prefix:
            prefix = normalize_path(self.root_prefix)
            if path == prefix:
                return None
            if path.startswith(prefix + "/"):
                path = path[len(prefix):]
        return path

    def _read_member(self, path: str) -> bytes:
        if self.closed:
            raise SourceClosed(self.id)
        if self.kind == "directory":
            real = self._members.get(path)
            if real is None:
                raise NotFound(path)
            with open(real, "rb") as fh:
                return fh.read()
        archive = self._open_archive()
        member = self._members.get(path)
        if member is None:
            raise NotFound(path)
        with self._read_lock:
            if self.kind == "zip_archive":
                return archive.read(member)
            fh = archive.extractfile(member)
            if fh is None:
                raise Unreadable(path)
            return fh.read()

    def read(self, path: str) -> bytes:
        """Bytes of an inventoried file, checked against its inventory digest."""
        entry = self._inventory.get(path)
        if entry is None or entry.sha256 is None:
            raise NotFound(path)
        try:
            data = self._read_member(path)
        except (OSError, KeyError, tarfile.TarError, zipfile.BadZipFile) as exc:
            raise Unreadable(f"{path}: {exc}") from exc
        if sha256_hex(data) != entry.sha256:
            raise Unreadable(f"{path}: content no longer matches inventoried digest")
        return data

    def record_parsed(self, path: str, actor: str | None = None) -> CustodyRecord:
        entry = self._inventory[path]
        return self.custody.append(self.id, path, entry.sha256, "parsed", actor or self.actor)

    def record_exported(self, path: str, sha256: str, actor: str | None = None) -> CustodyRecord:
        return self.custody.append(self.id, path, sha256, "exported", actor or self.actor)


def _sniff(location: Path) -> str:
    if location.is_dir():
        return "directory"
    try:
        with open(location, "rb") as fh:
            head = fh.read(512)
    except OSError as exc:
        raise Unreadable(str(exc)) from exc
    if head[:4] in (b"PK\x03\x04", b"PK\x05\x06"):
        return "zip_archive"
    if head[:2] == b"\x1f\x8b":
        try:
            with gzip.open(location, "rb") as fh:
                inner = fh.read(512)
        except (OSError, EOFError) as exc:
            raise UnsupportedArchive(f"{location}: gzip stream is not a tar archive") from exc
        head = inner
    if len(head) >= 262 and head[257:262] == b"ustar":
        return "tar_archive"
    raise UnsupportedArchive(f"{location}: not a directory, zip or tar archive")


def source_id_for(location: Path) -> str:
    return "src-" + sha256_hex(str(location.resolve()).encode("utf-8"))[:16]


def open_source(
    location: str | os.PathLike,
    declared_kind: str | None = None,
    *,
    root_prefix: str | None = None,
    root_label: str = "/",
    clock: Clock = utc_now,
    actor: str = "vapp",
    source_id: str | None = None,
    jobs: int = 1,
) -> EvidenceSource:
    """Open an extraction without parsing any file content.

    The kind is sniffed from content; ``declared_kind`` must agree with it.
    """
    location = Path(location)
    if not location.exists():
        raise NotFound(str(location))
    if not os.access(location, os.R_OK):
        raise Unreadable(str(location))
    kind = _sniff(location)
    if declared_kind is not None and declared_kind != kind:
        raise UnsupportedArchive(f"{location}: declared {declared_kind} but content is {kind}")
    return EvidenceSource(
        id=source_id or source_id_for(location),
        kind=kind,
        root_label=root_label,
        opened_at=clock(),
        location=location,
        root_prefix=root_prefix,
        actor=actor,
        clock=clock,
        jobs=jobs,
    )


def _hash_file(real: str) -> tuple[int, str]:
    digest = hashlib.sha256()
    size = 0
    with open(real, "rb") as fh:
        while True:
            chunk = fh.read(_CHUNK)
            if not chunk:
                break
            size += len(chunk)
            digest.update(chunk)
    return size, digest.hexdigest()


def _walk_directory(source: EvidenceSource) -> Iterable[tuple[str, str, os.stat_result]]:
    root = str(source.location)
    for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
        dirnames.sort()
        names = sorted(filenames) + sorted(d for d in dirnames if os.path.islink(os.path.join(dirpath, d)))
        for name in names:
            real = os.path.join(dirpath, name)
            rel = os.path.relpath(real, root)
            try:
                st = os.lstat(real)
            except OSError as exc:
                source.errors.append((normalize_path(rel), str(exc)))
                continue
            yield rel, real, st


def _wrapper_prefix(names: list[str]) -> str | None:
    tops = {normalize_path(n).split("/")[1] for n in names if normalize_path(n) != "/"}
    if len(tops) == 1:
        top = tops.pop()
        if top not in DEVICE_ROOTS:
            return top
    return None


def enumerate_files(source: EvidenceSource) -> list[FileEntry]:
    """Hash every regular file; return entries sorted by device path.

    Per-file failures land in ``source.errors`` instead of aborting.
    Symlinks are recorded with their target but never followed.
    """
    if source.closed:
        raise SourceClosed(source.id)
    entries: dict[str, FileEntry] = {}
    source.errors.clear()
    if source.kind == "directory":
        pending = []
        for rel, real, st in _walk_directory(source):
            path = source._device_path(rel)
            if path is None:
                continue
            mtime = datetime.fromtimestamp(st.st_mtime, timezone.utc)
            if stat.S_ISLNK(st.st_mode):
                entries[path] = FileEntry(path, 0, None, mtime, link_target=os.readlink(real))
            elif stat.S_ISREG(st.st_mode):
                pending.append((path, real, mtime))

        def work(item):
            path, real, mtime = item
            try:
                size, digest = _hash_file(real)
            except OSError as exc:
                return path, None, str(exc)
            source._members[path] = real
            return path, FileEntry(path, size, digest, mtime), None

        if source.jobs > 1:
            with ThreadPoolExecutor(max_workers=source.jobs) as pool:
                results = list(pool.map(work, pending))
        else:
            results = [work(item) for item in pending]
        for path, entry, error in results:
            if error is not None:
                source.errors.append((path, error))
            else:
                entries[path] = entry
    else:
        archive = source._open_archive()
        if source.kind == "zip_archive":
            infos = [i for i in archive.infolist() if not i.is_dir()]
            names = [i.filename for i in infos]
        else:
            infos = [m for m in archive.getmembers() if not m.isdir()]
            names = [m.name for m in infos]
        if source.root_prefix is None:
            source.root_prefix = _wrapper_prefix(names)
        for info, name in zip(infos, names):
            path = source._device_path(name)
            if path is None:
                continue
            if source.kind == "zip_archive":
                mode = info.external_attr >> 16
                mtime = datetime(*info.date_time, tzinfo=timezone.utc) if info.date_time[0] >= 1980 else None
                if stat.S_ISLNK(mode):
                    target = archive.read(info).decode("utf-8", "replace")
                    entries[path] = FileEntry(path, 0, None, mtime, link_target=target)
                    continue
            else:
                mtime = datetime.fromtimestamp(info.mtime, timezone.utc) if info.mtime else None
                if info.issym() or info.islnk():
                    entries[path] = FileEntry(path, 0, None, mtime, link_target=info.linkname)
                    continue
                if not info.isfile():
                    continue
            source._members[path] = info
            try:
                data = source._read_member(path)
            except (OSError, KeyError, tarfile.TarError, zipfile.BadZipFile, Unreadable, EOFError) as exc:
                source.errors.append((path, str(exc)))
                continue
            entries[path] = FileEntry(path, len(data), sha256_hex(data), mtime)
    ordered = [entries[p] for p in sorted(entries)]
    source._inventory = {e.path: e for e in ordered}
    for entry in ordered:
        if entry.sha256 is not None:
            source.custody.append(source.id, entry.path, entry.sha256, "inventoried", source.actor)
    return ordered


def verify(source: EvidenceSource, entries: list[FileEntry]) -> VerificationReport:
    """Re-hash every entry; discrepancies are report content, not errors."""
    ok, changed, missing = [], [], []
    for entry in entries:
        if entry.sha256 is None:
            continue
        try:
            data = source._read_member(entry.path)
        except (NotFound, FileNotFoundError, KeyError):
            missing.append(entry.path)
            continue
        except (OSError, tarfile.TarError, zipfile.BadZipFile, Unreadable):
            missing.append(entry.path)
            continue
        (ok if sha256_hex(data) == entry.sha256 else changed).append(entry.path)
    return VerificationReport(tuple(ok), tuple(changed), tuple(missing))


def custody_log(source: EvidenceSource) -> list[CustodyRecord]:
    return source.custody.records()


def custody_ndjson(records: Iterable[CustodyRecord]) -> str:
    return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in records)


def read_custody_ndjson(text: str) -> list[CustodyRecord]:
    return [CustodyRecord.from_json(json.loads(line)) for line in io.StringIO(text) if line.strip()]
