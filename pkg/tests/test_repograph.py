from __future__ import annotations

from dataclasses import dataclass

import pytest

from repoprompt.repograph import (
    build_repo_index,
    load_repo_index,
    rank_source_files,
    save_repo_index,
)

CORE = "src/com/acme/core"
TASK_RUNNER = f"{CORE}/TaskRunner.java"
BASE_TASK = f"{CORE}/BaseTask.java"
TASK_QUEUE = f"{CORE}/TaskQueue.java"
EXT_TASK = "src/com/acme/ext/ExtTask.java"
CLOCK = "src/com/acme/util/Clock.java"
STRING_UTIL = "src/com/acme/util/StringUtil.java"


@dataclass
class FakeHole:
    file: str
    line: int


# TaskRunner.java, zero-based: StringUtil used on line 14; Clock on 6 and 22.
# A hole on line 14 sits inside class TaskRunner (span 5..29).
HOLE = FakeHole(TASK_RUNNER, 14)


class TestGraphRelations:
    def test_eleven_files_indexed(self, minirepo_index):
        assert len(minirepo_index.files) == 11
        assert minirepo_index.diagnostics == []

    def test_class_to_file(self, minirepo_index):
        c2f = minirepo_index.class_to_file
        assert c2f["TaskRunner"] == TASK_RUNNER
        assert c2f["BaseTask"] == BASE_TASK
        assert c2f["ExtTask"] == EXT_TASK
        # duplicate class name resolves to the first path in sort order
        assert c2f["LegacyUtil"] == "legacy/LegacyUtil.java"

    def test_siblings_share_a_directory(self, minirepo_index):
        assert minirepo_index.siblings[TASK_RUNNER] == [BASE_TASK, TASK_QUEUE]
        assert minirepo_index.siblings["legacy/LegacyUtil.java"] == []

    def test_similar_names_share_a_camelcase_part(self, minirepo_index):
        # TaskRunner splits into {task, runner}; matches every *Task* file
        assert minirepo_index.similar_names[TASK_RUNNER] == [
            BASE_TASK,
            TASK_QUEUE,
            EXT_TASK,
        ]

    def test_parent_and_child_links(self, minirepo_index):
        assert minirepo_index.parent_class_file[TASK_RUNNER]["TaskRunner"] == BASE_TASK
        assert minirepo_index.child_class_files[TASK_RUNNER] == [EXT_TASK]
        assert minirepo_index.child_class_files[BASE_TASK] == [TASK_RUNNER]

    def test_import_resolution(self, minirepo_index):
        resolved = minirepo_index.import_to_file[TASK_QUEUE]
        assert resolved["com.acme.util.Clock"] == CLOCK
        assert resolved["java.util.List"] is None

    def test_import_usages_exclude_the_import_line(self, minirepo_index):
        usages = dict(minirepo_index.import_usages[TASK_RUNNER])
        assert usages["com.acme.util.StringUtil"] == [14]
        assert usages["com.acme.util.Clock"] == [6, 22]

    def test_byte_identical_duplicates_detected(self, minirepo_index):
        assert minirepo_index.duplicate_sets == [
            ["legacy/LegacyUtil.java", "src/com/acme/util/LegacyUtil.java"]
        ]


class TestRankSourceFiles:
    """Hand-derived orderings for every source, anchored at HOLE.

    Derivations (distances are |usage_line - 14|):
      Import: StringUtil dist 0 beats Clock dist 8.
      Sibling: BaseTask shares StringUtil (dist 0); TaskQueue shares
        Clock (dist 8).
      SimilarName: adds ExtTask, which also shares only Clock (dist 8);
        path order breaks its tie with TaskQueue.
      ImportOf*: one resolved usage each; frequency then path order.
    """

    def test_current(self, minirepo_index):
        assert rank_source_files(minirepo_index, "Current", HOLE) == [TASK_RUNNER]

    def test_parent_class(self, minirepo_index):
        assert rank_source_files(minirepo_index, "ParentClass", HOLE) == [BASE_TASK]

    def test_import(self, minirepo_index):
        assert rank_source_files(minirepo_index, "Import", HOLE) == [
            STRING_UTIL,
            CLOCK,
        ]

    def test_import_order_tracks_hole_line(self, minirepo_index):
        # from line 6 Clock is distance 0 and StringUtil distance 8
        near_clock = FakeHole(TASK_RUNNER, 6)
        assert rank_source_files(minirepo_index, "Import", near_clock) == [
            CLOCK,
            STRING_UTIL,
        ]

    def test_sibling(self, minirepo_index):
        assert rank_source_files(minirepo_index, "Sibling", HOLE) == [
            BASE_TASK,
            TASK_QUEUE,
        ]

    def test_similar_name(self, minirepo_index):
        assert rank_source_files(minirepo_index, "SimilarName", HOLE) == [
            BASE_TASK,
            TASK_QUEUE,
            EXT_TASK,
        ]

    def test_child_class(self, minirepo_index):
        assert rank_source_files(minirepo_index, "ChildClass", HOLE) == [EXT_TASK]

    def test_import_of_sibling(self, minirepo_index):
        # BaseTask contributes StringUtil x1, TaskQueue contributes Clock x1;
        # tied frequency falls back to path order
        assert rank_source_files(minirepo_index, "ImportOfSibling", HOLE) == [
            CLOCK,
            STRING_UTIL,
        ]

    def test_import_of_similar_name(self, minirepo_index):
        # ExtTask adds one more Clock usage: Clock x2 beats StringUtil x1;
        # ExtTask's TaskRunner import resolves to the hole file and is dropped
        assert rank_source_files(minirepo_index, "ImportOfSimilarName", HOLE) == [
            CLOCK,
            STRING_UTIL,
        ]

    def test_import_of_parent_class(self, minirepo_index):
        assert rank_source_files(minirepo_index, "ImportOfParentClass", HOLE) == [
            STRING_UTIL
        ]

    def test_import_of_child_class(self, minirepo_index):
        assert rank_source_files(minirepo_index, "ImportOfChildClass", HOLE) == [CLOCK]

    def test_non_current_sources_never_return_the_hole_file(self, minirepo_index):
        for source in (
            "ParentClass", "Import", "Sibling", "SimilarName", "ChildClass",
            "ImportOfSibling", "ImportOfSimilarName", "ImportOfParentClass",
            "ImportOfChildClass",
        ):
            assert TASK_RUNNER not in rank_source_files(minirepo_index, source, HOLE)

    def test_unknown_source_rejected(self, minirepo_index):
        with pytest.raises(ValueError):
            rank_source_files(minirepo_index, "Nearby", HOLE)

    def test_unknown_hole_file_rejected(self, minirepo_index):
        with pytest.raises(KeyError):
            rank_source_files(minirepo_index, "Import", FakeHole("nope.java", 0))


class TestPersistence:
    def test_save_load_roundtrip(self, minirepo_root, minirepo_index, tmp_path):
        cache = tmp_path / "index.json"
        save_repo_index(minirepo_index, cache)
        loaded = load_repo_index(cache, minirepo_root)
        assert loaded is not None
        assert loaded.class_to_file == minirepo_index.class_to_file
        assert loaded.siblings == minirepo_index.siblings
        assert loaded.file_hashes == minirepo_index.file_hashes
        for source in ("Import", "Sibling", "ImportOfSimilarName"):
            assert rank_source_files(loaded, source, HOLE) == rank_source_files(
                minirepo_index, source, HOLE
            )

    def test_stale_cache_returns_none(self, minirepo_root, tmp_path):
        copy = tmp_path / "repo"
        copy.mkdir()
        src = copy / "A.java"
        src.write_text("package p;\nclass A {}\n", encoding="utf-8")
        index = build_repo_index(copy, "tiny")
        cache = tmp_path / "index.json"
        save_repo_index(index, cache)
        assert load_repo_index(cache, copy) is not None
        src.write_text("package p;\nclass A { int x; }\n", encoding="utf-8")
        assert load_repo_index(cache, copy) is None

    def test_missing_cache_returns_none(self, minirepo_root, tmp_path):
        assert load_repo_index(tmp_path / "absent.json", minirepo_root) is None


def test_build_assigns_repo_id_and_relative_paths(minirepo_root):
    index = build_repo_index(minirepo_root)
    assert index.repo_id == "minirepo"
    assert all(not p.startswith("/") for p in index.files)
