"""Per-app artifact extractors."""

from ..registry import list_artifact_specs
from . import apps  # noqa: F401  (registers decoders)
from .base import DECODERS, Artifact, Draft, ExtractionResult, RawRecord, Skipped, extract_artifacts

__all__ = [
    "DECODERS",
    "Artifact",
    "Draft",
    "ExtractionResult",
    "RawRecord",
    "Skipped",
    "extract_artifacts",
    "list_artifact_specs",
]
