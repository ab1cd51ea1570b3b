"""The artifact availability matrix, shipped as versioned JSON data."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..registry import CATEGORIES

SYMBOLS = ("extensive", "partial", "encrypted", "none", "na")
STATES = ("logged_in", "logged_out", "uninstalled")
DATA_SYMBOLS = ("extensive", "partial")
# "na" (not available or not tested) for a retention flag is read as: nothing was removed.
RETAINING = ("extensive", "partial", "na")


@dataclass(frozen=True)
class Cell:
    categories: dict[str, str]
    logout: str
    uninstall: str


@dataclass(frozen=True)
class AvailabilityMatrix:
    version: int
    cells: dict[tuple[str, str], Cell]

    def symbol(self, app_id: str, platform: str, category: str) -> str:
        return self.cells[(app_id, platform)].categories[category]

    def row(self, app_id: str, platform: str) -> dict[str, str]:
        return dict(self.cells[(app_id, platform)].categories)

    def retains(self, app_id: str, platform: str, state: str) -> bool:
        """Whether the app's data survives into ``state``."""
        if state == "logged_in":
            return True
        cell = self.cells[(app_id, platform)]
        flag = cell.logout if state == "logged_out" else cell.uninstall
        return flag in RETAINING

    def expected_symbols(self, app_id: str, platform: str) -> dict[str, str]:
        """Logged-in category symbols collapsed to data, encrypted or none."""
        out = {}
        for cat in CATEGORIES:
            sym = self.symbol(app_id, platform, cat)
            out[cat] = "data" if sym in DATA_SYMBOLS else "encrypted" if sym == "encrypted" else "none"
        return out


def _parse(doc: dict) -> AvailabilityMatrix:
    if doc.get("version") != 1:
        raise ValueError(f"unsupported matrix version {doc.get('version')!r}")
    cells = {}
    for row in doc["cells"]:
        cats = dict(row["categories"])
        if set(cats) != set(CATEGORIES):
            raise ValueError(f"{row['app_id']}/{row['platform']}: category set mismatch")
        for sym in [*cats.values(), row["logout"], row["uninstall"]]:
            if sym not in SYMBOLS:
                raise ValueError(f"unknown symbol {sym!r}")
        cells[(row["app_id"], row["platform"])] = Cell(cats, row["logout"], row["uninstall"])
    return AvailabilityMatrix(doc["version"], cells)


def load_matrix(path: str | Path | None = None) -> AvailabilityMatrix:
    if path is None:
        text = resources.files("vapp.forge").joinpath("availability_matrix.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return _parse(json.loads(text))
