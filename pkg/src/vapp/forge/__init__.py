"""Synthetic ground truth: scenarios, rendered extractions and the recovery oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .matrix import STATES, AvailabilityMatrix, load_matrix
from .oracle import Skeleton, category_symbols, expected_recovery, skeletons
from .render import RENDERERS, container_root, render_files, write_tree
from .scenario import CATALOG, Scenario, generate_scenario


@dataclass
class GroundTruth:
    scenario: Scenario
    matrix: AvailabilityMatrix = field(default_factory=load_matrix)

    def expected_events(self, app_id: str, platform: str, state: str) -> list[Skeleton]:
        return expected_recovery(self.scenario, app_id, platform, state, self.matrix)


def ground_truth(seed: int, length: int = len(CATALOG), **kwargs) -> GroundTruth:
    return GroundTruth(generate_scenario(seed, length, **kwargs))


def render_extraction(gt: GroundTruth, app_id: str, platform: str, state: str, out: str | Path,
                      *, encrypt: bool = True) -> list[Path]:
    """Write one app's files for ``state`` under ``out`` (device paths kept)."""
    files = render_files(gt.scenario, app_id, platform, state, gt.matrix, encrypt=encrypt)
    return write_tree(files, out)


__all__ = [
    "CATALOG",
    "RENDERERS",
    "STATES",
    "AvailabilityMatrix",
    "GroundTruth",
    "Scenario",
    "Skeleton",
    "category_symbols",
    "container_root",
    "expected_recovery",
    "generate_scenario",
    "ground_truth",
    "load_matrix",
    "render_extraction",
    "render_files",
    "skeletons",
    "write_tree",
]
