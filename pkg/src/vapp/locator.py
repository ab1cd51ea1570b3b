"""Locate app containers in an enumerated extraction."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable

from .errors import AmbiguousContainer, FormatError
from .evidence import FileEntry
from .formats import read_plist
from .registry import (
    ANDROID_ROOTS,
    IOS_METADATA_PLIST,
    IOS_ROOTS,
    AppDescriptor,
    compile_pattern,
    registry,
)

UUID_RE = re.compile(r"[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}", re.IGNORECASE)
CONFIDENCES = ("definitive", "inferred")


@dataclass(frozen=True)
class ContainerMatch:
    descriptor: AppDescriptor
    container_root: str
    confidence: str
    matched_markers: tuple[str, ...]

    @property
    def app_id(self) -> str:
        return self.descriptor.app_id

    @property
    def platform(self) -> str:
        return self.descriptor.platform

    def relative(self, path: str) -> str | None:
        prefix = self.container_root.rstrip("/") + "/"
        return path[len(prefix):] if path.startswith(prefix) else None


def _android_package(marker: str) -> str | None:
    for root in ANDROID_ROOTS:
        if marker.startswith(root):
            return marker[len(root):].split("/", 1)[0] or None
    return None


def detect_android(entries: Iterable[FileEntry], descriptors: list[AppDescriptor] | None = None) -> list[ContainerMatch]:
    """One definitive match per known package whose data directory exists."""
    descriptors = registry() if descriptors is None else descriptors
    by_package: dict[str, list[str]] = defaultdict(list)
    for entry in entries:
        for root in ANDROID_ROOTS:
            if entry.path.startswith(root):
                package = entry.path[len(root):].split("/", 1)[0]
                if package and "/" in entry.path[len(root):]:
                    by_package[root + package].append(entry.path)
    matches = []
    for desc in descriptors:
        if desc.platform != "android":
            continue
        packages = {p for p in map(_android_package, desc.package_or_bundle_markers) if p}
        for root in ANDROID_ROOTS:
            for package in sorted(packages):
                container = root + package
                if container in by_package:
                    matches.append(ContainerMatch(desc, container, "definitive", (container + "/",)))
    return sorted(matches, key=lambda m: (m.container_root, m.app_id))


def _ios_containers(entries: Iterable[FileEntry]) -> dict[str, list[str]]:
    containers: dict[str, list[str]] = defaultdict(list)
    for entry in entries:
        for root in IOS_ROOTS:
            if entry.path.startswith(root):
                head, _, rest = entry.path[len(root):].partition("/")
                if rest and UUID_RE.fullmatch(head):
                    containers[root + head].append(rest)
                break
    return containers


def _metadata_identifier(container: str, read: Callable[[str], bytes] | None) -> str | None:
    if read is None:
        return None
    try:
        meta = read_plist(read(f"{container}/{IOS_METADATA_PLIST}"))
    except (FormatError, OSError, LookupError):
        return None
    except Exception:  # unreadable evidence never blocks detection
        return None
    ident = meta.get("MCMMetadataIdentifier") if isinstance(meta, dict) else None
    return ident if isinstance(ident, str) else None


def detect_ios(
    entries: Iterable[FileEntry],
    read: Callable[[str], bytes] | None = None,
    descriptors: list[AppDescriptor] | None = None,
) -> list[ContainerMatch]:
    """Identify apps inside UUID-named iOS data containers.

    ``read`` is an optional callback returning the bytes at a device path;
    it is only used for the OS container-metadata plist.
    """
    descriptors = [d for d in (registry() if descriptors is None else descriptors) if d.platform == "ios"]
    matches = []
    for container, rel_paths in sorted(_ios_containers(entries).items()):
        rel_set = sorted(set(rel_paths))
        found: list[tuple[AppDescriptor, list[str]]] = []
        for desc in descriptors:
            hits = []
            for marker in desc.package_or_bundle_markers:
                rx = compile_pattern(marker)
                hits.extend(p for p in rel_set if rx.fullmatch(p))
            if hits:
                found.append((desc, sorted(set(hits))))
        meta_id = None
        if IOS_METADATA_PLIST in rel_set:
            meta_id = _metadata_identifier(container, read)
        if meta_id is not None:
            named = [d for d in descriptors if d.identifier == meta_id]
            if named:
                desc = named[0]
                hits = next((h for d, h in found if d is desc), [])
                markers = tuple(f"{container}/{p}" for p in [IOS_METADATA_PLIST, *hits])
                matches.append(ContainerMatch(desc, container, "definitive", markers))
                continue
        if not found:
            continue
        if len({d.app_id for d, _ in found}) > 1:
            names = ", ".join(sorted(d.app_id for d, _ in found))
            raise AmbiguousContainer(f"{container}: markers of {names}")
        desc, hits = found[0]
        definitive = any(desc.is_definitive_marker(p) for p in hits)
        matches.append(ContainerMatch(
            desc,
            container,
            "definitive" if definitive else "inferred",
            tuple(f"{container}/{p}" for p in hits),
        ))
    return matches


def detect(entries: list[FileEntry], read: Callable[[str], bytes] | None = None,
           descriptors: list[AppDescriptor] | None = None) -> list[ContainerMatch]:
    return detect_android(entries, descriptors) + detect_ios(entries, read, descriptors)
