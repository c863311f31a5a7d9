"""Target hole mining and the classifier's hole window.

Every non-blank, non-comment line of every non-duplicate file yields
one hole: the line is split at the middle character of its
trailing-whitespace-stripped text, and the suffix becomes the
completion target. Repositories contribute at most ``cap`` holes via a
seeded uniform sample so runs are reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .repograph import RepoIndex

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class HoleSpec:
    repo_id: str
    file: str
    line: int
    hole_start_col: int
    target: str
    id: str

    @property
    def position(self) -> tuple[int, int]:
        return (self.line, self.hole_start_col)


def hole_id(repo_id: str, file: str, line: int) -> str:
    digest = hashlib.sha256(f"{repo_id}\n{file}\n{line}".encode("utf-8"))
    return digest.hexdigest()[:16]


def find_duplicate_files(index: RepoIndex) -> list[list[str]]:
    """Byte-identical file groups; members never become hole sources."""
    return [list(group) for group in index.duplicate_sets]


def minable_line_flags(text: str) -> list[bool]:
    """Per line: True when the line may host a hole.

    Blank lines, ``//`` lines, ``/*`` lines, and lines beginning inside
    a block comment are excluded. The block-comment scan is textual and
    does not understand ``/*`` inside string literals.
    """
    flags: list[bool] = []
    in_block = False
    for line in text.split("\n"):
        stripped = line.strip()
        starts_in_block = in_block
        i = 0
        while i < len(line) - 1:
            pair = line[i:i + 2]
            if in_block and pair == "*/":
                in_block = False
                i += 2
            elif not in_block and pair == "/*":
                in_block = True
                i += 2
            elif not in_block and pair == "//":
                break
            else:
                i += 1
        if not stripped:
            flags.append(False)
        elif starts_in_block:
            flags.append(False)
        elif stripped.startswith("//") or stripped.startswith("/*"):
            flags.append(False)
        else:
            flags.append(True)
    return flags


def mine_holes(index: RepoIndex, cap: int = 10000, seed: int = 0) -> list[HoleSpec]:
    """All holes of a repo, capped by a seeded uniform sample."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    holes: list[HoleSpec] = []
    duplicates = index.duplicate_paths
    for rel in sorted(index.files):
        if rel in duplicates:
            continue
        text = index.sources[rel].text
        flags = minable_line_flags(text)
        for line_no, line in enumerate(text.split("\n")):
            if not flags[line_no]:
                continue
            body = line.rstrip()
            col = len(body) // 2
            target = body[col:]
            if not target:
                continue
            holes.append(
                HoleSpec(
                    repo_id=index.repo_id,
                    file=rel,
                    line=line_no,
                    hole_start_col=col,
                    target=target,
                    id=hole_id(index.repo_id, rel, line_no),
                )
            )
    if len(holes) > cap:
        rng = np.random.RandomState(seed)
        chosen = rng.choice(len(holes), size=cap, replace=False)
        holes = [holes[i] for i in sorted(chosen.tolist())]
    return holes


def hole_window(hole: HoleSpec, index: RepoIndex) -> str:
    """Two lines before, the pre-hole prefix, two lines after."""
    lines = index.sources[hole.file].lines
    before = lines[max(0, hole.line - 2):hole.line]
    prefix = lines[hole.line][:hole.hole_start_col]
    after = lines[hole.line + 1:hole.line + 3]
    return "\n".join(before + [prefix] + after)


def validate_split_map(split_map: dict[str, str]) -> None:
    for repo_id, split in split_map.items():
        if split not in SPLIT_NAMES:
            raise ValueError(f"repo {repo_id!r} has unknown split {split!r}")


def write_dataset(
    holes: list[HoleSpec],
    index_by_repo: dict[str, RepoIndex],
    split_map: dict[str, str],
    path: str | Path,
) -> None:
    """Line-delimited JSON, one record per hole."""
    validate_split_map(split_map)
    with open(path, "w", encoding="utf-8") as fh:
        for hole in holes:
            record = {
                "id": hole.id,
                "repo_id": hole.repo_id,
                "file": hole.file,
                "line": hole.line,
                "hole_start_col": hole.hole_start_col,
                "target": hole.target,
                "hole_window": hole_window(hole, index_by_repo[hole.repo_id]),
                "split": split_map[hole.repo_id],
            }
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def hole_from_record(record: dict) -> HoleSpec:
    return HoleSpec(
        record["repo_id"],
        record["file"],
        record["line"],
        record["hole_start_col"],
        record["target"],
        record["id"],
    )


def read_dataset(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records
