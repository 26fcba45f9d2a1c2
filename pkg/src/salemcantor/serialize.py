"""JSON round trip for schedules and trees.

Node numerators are delta-encoded per level.  Loading recomputes the tree
digest and refuses a file whose digest or schedule hash does not match.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .schedule import BranchingSchedule
from .tree import CantorTree, LevelNodes, VerificationRecord

FORMAT = "salemcantor-tree/1"


def _delta(a: np.ndarray) -> list[int]:
    a = np.asarray(a, dtype=np.int64)
    if a.size == 0:
        return []
    return [int(a[0])] + np.diff(a).tolist()


def _undelta(d: list[int]) -> np.ndarray:
    return np.cumsum(np.asarray(d, dtype=np.int64)) if d else np.empty(0, dtype=np.int64)


def tree_to_dict(tree: CantorTree, config: dict | None = None) -> dict:
    return {
        "format": FORMAT,
        "version": __version__,
        "config": config or {},
        "seed": tree.seed,
        "schedule": tree.schedule.to_dict(),
        "scheduleHash": tree.schedule.digest(),
        "treeHash": tree.digest(),
        "levels": [
            {"level": lv.level, "nodes": _delta(lv.numerators), "progression": _delta(lv.progression)}
            for lv in tree.levels
        ],
        "verification": [
            {
                "level": v.level,
                "attempts": v.attempts,
                "supRandomPart": v.sup_random,
                "threshold": v.threshold,
                "correction": v.correction,
                "supModified": v.sup_modified,
            }
            for v in tree.verification
        ],
    }


def tree_from_dict(d: dict, workers: int = 1) -> CantorTree:
    if d.get("format") != FORMAT:
        raise ConfigError(f"unsupported tree format {d.get('format')!r}")
    s = BranchingSchedule.from_dict(d["schedule"])
    if s.digest() != d["scheduleHash"]:
        raise ConfigError("schedule hash mismatch")
    levels = tuple(LevelNodes(x["level"], _undelta(x["nodes"]), _undelta(x["progression"])) for x in d["levels"])
    recs = tuple(
        VerificationRecord(v["level"], v["attempts"], v["supRandomPart"], v["threshold"], v["correction"], v["supModified"])
        for v in d["verification"]
    )
    tree = CantorTree(s, int(d["seed"]), levels, recs, workers)
    if tree.digest() != d["treeHash"]:
        raise ConfigError("tree hash mismatch")
    return tree


def save_tree(tree: CantorTree, path, config: dict | None = None) -> None:
    Path(path).write_text(json.dumps(tree_to_dict(tree, config)))


def load_tree(path, workers: int = 1) -> CantorTree:
    return tree_from_dict(json.loads(Path(path).read_text()), workers)


def save_schedule(s: BranchingSchedule, path, config: dict | None = None) -> None:
    blob = {"version": __version__, "config": config or {}, "scheduleHash": s.digest(), "schedule": s.to_dict()}
    Path(path).write_text(json.dumps(blob, indent=1))


def load_schedule(path) -> BranchingSchedule:
    d = json.loads(Path(path).read_text())
    s = BranchingSchedule.from_dict(d["schedule"])
    if "scheduleHash" in d and s.digest() != d["scheduleHash"]:
        raise ConfigError("schedule hash mismatch")
    return s
