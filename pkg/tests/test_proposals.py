from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repoprompt.holes import HoleSpec
from repoprompt.proposals import (
    DEFAULT_PROPOSAL_ID,
    PROPOSAL_COUNT,
    enumerate_proposals,
    proposal_by_id,
    proposal_context,
    truncate,
    truncation_direction,
)

TASK_RUNNER = "src/com/acme/core/TaskRunner.java"
HOLE = HoleSpec("minirepo", TASK_RUNNER, 14, 8, "ignored", "h-tr-14")
CLOCK_HOLE = HoleSpec("minirepo", "src/com/acme/util/Clock.java", 6, 4, "x", "h-ck-6")


def expected_table() -> list[tuple[int, str | None, str | None, float | None]]:
    rows: list[tuple[int, str | None, str | None, float | None]] = [
        (0, "Current", "MN", None),
        (1, "Current", "I", None),
        (2, "Current", "TI", None),
        (3, "Current", "SL", None),
        (4, "Current", "FD", None),
        (5, "Current", "PL", 0.25),
        (6, "Current", "PL", 0.50),
        (7, "Current", "PL", 0.75),
    ]
    sources = (
        "ParentClass", "Import", "Sibling", "SimilarName", "ChildClass",
        "ImportOfSibling", "ImportOfSimilarName", "ImportOfParentClass",
        "ImportOfChildClass",
    )
    next_id = 8
    for source in sources:
        for ct in ("MNB", "MN", "I", "TI", "SL", "FD"):
            rows.append((next_id, source, ct, None))
            next_id += 1
    rows.append((62, None, None, None))
    return rows


class TestEnumeration:
    def test_exhaustive_id_to_source_type_table(self):
        got = [
            (d.id, d.source, d.context_type, d.pl_fraction)
            for d in enumerate_proposals()
        ]
        assert got == expected_table()

    def test_count_and_default(self):
        descs = enumerate_proposals()
        assert len(descs) == PROPOSAL_COUNT == 63
        assert descs[62].is_default
        assert sum(d.is_default for d in descs) == 1

    def test_proposal_by_id_round_trips(self):
        for d in enumerate_proposals():
            assert proposal_by_id(d.id) == d

    def test_budget_fraction(self):
        assert proposal_by_id(5).budget_fraction == 0.25
        assert proposal_by_id(6).budget_fraction == 0.50
        assert proposal_by_id(7).budget_fraction == 0.75
        assert proposal_by_id(0).budget_fraction == 0.5
        assert proposal_by_id(40).budget_fraction == 0.5


class TestTruncationDirection:
    def test_parent_class_keeps_the_front(self):
        for pid in range(8, 14):
            assert truncation_direction(proposal_by_id(pid)) == "back"

    def test_current_non_pl_keeps_the_front(self):
        for pid in range(0, 5):
            assert truncation_direction(proposal_by_id(pid)) == "back"

    def test_current_pl_keeps_the_tail(self):
        for pid in range(5, 8):
            assert truncation_direction(proposal_by_id(pid)) == "front"

    def test_everything_else_keeps_the_tail(self):
        for pid in range(14, 62):
            assert truncation_direction(proposal_by_id(pid)) == "front"

    def test_truncate_rejects_unknown_direction(self, fallback_tok):
        with pytest.raises(ValueError):
            truncate("x", 1, "middle", fallback_tok)


class TestContextGoldens:
    """Hand-derived context strings for the TaskRunner line-14 hole."""

    def test_current_method_names_post_hole_first(self, minirepo_index, fallback_tok):
        ctx = proposal_context(proposal_by_id(0), HOLE, minirepo_index, 512, fallback_tok)
        assert ctx.applicable
        assert ctx.text == (
            "[TaskRunner] public void runOnce(int index) "
            "public Clock clockHandle() "
            "private void report(String message, long detail)"
        )
        assert ctx.files_used == (TASK_RUNNER,)

    def test_current_string_literals_exclude_hole_line(self, minirepo_index, fallback_tok):
        # "done" sits on the hole line itself; only ":" (line 27) is post-hole
        ctx = proposal_context(proposal_by_id(3), HOLE, minirepo_index, 512, fallback_tok)
        assert ctx.text == '[TaskRunner] ":"'

    def test_current_fields_fall_back_to_pre_hole(self, minirepo_index, fallback_tok):
        # no field declarations after line 14, so the pre-hole ones are used
        ctx = proposal_context(proposal_by_id(4), HOLE, minirepo_index, 512, fallback_tok)
        assert ctx.text == "[TaskRunner] private Clock clock; private boolean verbose;"

    def test_parent_class_method_names(self, minirepo_index, fallback_tok):
        ctx = proposal_context(proposal_by_id(9), HOLE, minirepo_index, 512, fallback_tok)
        assert ctx.text == (
            "[BaseTask] public String describe() "
            "public int remainingRetries(int used)"
        )
        assert ctx.files_used == ("src/com/acme/core/BaseTask.java",)

    def test_import_string_literals_in_ranked_file_order(
        self, minirepo_index, fallback_tok
    ):
        # StringUtil outranks Clock (usage distance 0 vs 8); Clock has no
        # string literals so only StringUtil contributes
        ctx = proposal_context(proposal_by_id(18), HOLE, minirepo_index, 512, fallback_tok)
        assert ctx.text == '[StringUtil] "" "[" "]" ","'
        assert ctx.files_used == ("src/com/acme/util/StringUtil.java",)

    def test_post_lines_is_the_raw_tail(self, minirepo_index, fallback_tok):
        ctx = proposal_context(proposal_by_id(6), HOLE, minirepo_index, 4072, fallback_tok)
        tail = "\n".join(minirepo_index.sources[TASK_RUNNER].lines[15:])
        assert ctx.text == tail
        assert not ctx.truncated

    def test_post_lines_skip_parameter(self, minirepo_index, fallback_tok):
        ctx = proposal_context(
            proposal_by_id(6), HOLE, minirepo_index, 4072, fallback_tok, pl_skip_lines=2
        )
        assert ctx.text == "\n".join(minirepo_index.sources[TASK_RUNNER].lines[17:])


class TestApplicability:
    def test_clock_has_no_imports_parent_or_children(self, minirepo_index, fallback_tok):
        for pid in (8, 14, 32, 50, 56):
            ctx = proposal_context(
                proposal_by_id(pid), CLOCK_HOLE, minirepo_index, 512, fallback_tok
            )
            assert not ctx.applicable
            assert ctx.text == "" and ctx.token_count == 0

    def test_pl_inapplicable_on_last_content_line(self, minirepo_index, fallback_tok):
        last = HoleSpec("minirepo", TASK_RUNNER, 29, 0, "}", "h-last")
        ctx = proposal_context(proposal_by_id(6), last, minirepo_index, 512, fallback_tok)
        assert not ctx.applicable

    def test_default_proposal_has_no_context(self, minirepo_index, fallback_tok):
        with pytest.raises(ValueError):
            proposal_context(
                proposal_by_id(DEFAULT_PROPOSAL_ID), HOLE, minirepo_index, 512, fallback_tok
            )

    def test_budget_must_be_positive(self, minirepo_index, fallback_tok):
        with pytest.raises(ValueError):
            proposal_context(proposal_by_id(0), HOLE, minirepo_index, 0, fallback_tok)


class TestBudgets:
    def test_truncation_direction_respected(self, minirepo_index, fallback_tok):
        full = proposal_context(proposal_by_id(9), HOLE, minirepo_index, 512, fallback_tok)
        cut = proposal_context(proposal_by_id(9), HOLE, minirepo_index, 4, fallback_tok)
        assert cut.truncated
        assert full.text.startswith(cut.text)  # ParentClass keeps the front

        full_i = proposal_context(proposal_by_id(18), HOLE, minirepo_index, 512, fallback_tok)
        cut_i = proposal_context(proposal_by_id(18), HOLE, minirepo_index, 3, fallback_tok)
        assert full_i.text.endswith(cut_i.text)  # Import keeps the tail

    @given(
        pid=st.integers(0, 61),
        budget=st.integers(1, 64),
        hole_pos=st.integers(0, 10),
    )
    @settings(max_examples=150, deadline=None)
    def test_token_count_never_exceeds_budget(
        self, minirepo_index, fallback_tok, mined_holes, pid, budget, hole_pos
    ):
        hole = mined_holes[hole_pos * 7 % len(mined_holes)]
        ctx = proposal_context(
            proposal_by_id(pid), hole, minirepo_index, budget, fallback_tok
        )
        assert ctx.token_count <= budget
        assert fallback_tok.count(ctx.text) == ctx.token_count
        assert ctx.applicable == bool(ctx.text.strip())
