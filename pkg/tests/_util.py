"""Helpers shared by the test modules."""

from __future__ import annotations

from pathlib import Path

from vapp.evidence import open_source
from vapp.forge import render_extraction
from vapp.pipeline import SourceRun, run_source


def render(gt, app_id: str, platform: str, state: str, root: Path, *, encrypt: bool = True) -> Path:
    out = root / f"{app_id}_{platform}_{state}{'' if encrypt else '_plain'}"
    out.mkdir(parents=True, exist_ok=True)
    render_extraction(gt, app_id, platform, state, out, encrypt=encrypt)
    return out


def run_tree(path: Path, **kwargs) -> SourceRun:
    with open_source(path, **kwargs) as src:
        return run_source(src)


def recovered(gt, app_id: str, platform: str, state: str, root: Path, **kwargs):
    """Skeletons of the events the pipeline recovers from a rendered fixture."""
    from vapp.forge import skeletons

    run = run_tree(render(gt, app_id, platform, state, root, **kwargs))
    return skeletons(run.events)
