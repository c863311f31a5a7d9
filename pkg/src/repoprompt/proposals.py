"""The 63 prompt proposals and their context materialization.

A proposal pairs a prompt source (which repository files to read) with
a context type (what code to take from them). Ten sources times six or
seven types, plus the always-applicable default, give ids 0 through 62:

* 0-4: Current x {MN, I, TI, SL, FD}
* 5-7: Current x PL taking 25%, 50%, 75% of the total budget
* 8-13 ParentClass, 14-19 Import, 20-25 Sibling, 26-31 SimilarName,
  32-37 ChildClass, 38-43 ImportOfSibling, 44-49 ImportOfSimilarName,
  50-55 ImportOfParentClass, 56-61 ImportOfChildClass,
  each x {MNB, MN, I, TI, SL, FD}
* 62: default context only (code before the hole).
"""

from __future__ import annotations

from dataclasses import dataclass

from .holes import HoleSpec
from .javaparse import (
    FileSyntaxIndex,
    after_position,
    before_position,
    extract_strings,
)
from .repograph import RepoIndex, rank_source_files
from .tokenizers import Tokenizer

CONTEXT_TYPES = ("PL", "I", "TI", "FD", "SL", "MN", "MNB")
DEFAULT_PROPOSAL_ID = 62
PROPOSAL_COUNT = 63

_CURRENT_TYPES = ("MN", "I", "TI", "SL", "FD")
_PL_FRACTIONS = (0.25, 0.50, 0.75)
_OTHER_TYPES = ("MNB", "MN", "I", "TI", "SL", "FD")
_OTHER_SOURCES = (
    "ParentClass",
    "Import",
    "Sibling",
    "SimilarName",
    "ChildClass",
    "ImportOfSibling",
    "ImportOfSimilarName",
    "ImportOfParentClass",
    "ImportOfChildClass",
)


@dataclass(frozen=True)
class ProposalDescriptor:
    id: int
    source: str | None
    context_type: str | None
    pl_fraction: float | None = None
    is_default: bool = False

    @property
    def budget_fraction(self) -> float:
        """Share of the total budget this proposal may claim."""
        return self.pl_fraction if self.pl_fraction is not None else 0.5


@dataclass(frozen=True)
class ProposalContext:
    proposal_id: int
    text: str
    token_count: int
    applicable: bool
    files_used: tuple[str, ...]
    truncated: bool


def enumerate_proposals() -> list[ProposalDescriptor]:
    """All 63 descriptors in fixed id order."""
    out: list[ProposalDescriptor] = []
    for ct in _CURRENT_TYPES:
        out.append(ProposalDescriptor(len(out), "Current", ct))
    for fraction in _PL_FRACTIONS:
        out.append(ProposalDescriptor(len(out), "Current", "PL", fraction))
    for source in _OTHER_SOURCES:
        for ct in _OTHER_TYPES:
            out.append(ProposalDescriptor(len(out), source, ct))
    out.append(
        ProposalDescriptor(len(out), None, None, is_default=True)
    )
    assert len(out) == PROPOSAL_COUNT
    return out


_DESCRIPTORS = {d.id: d for d in enumerate_proposals()}


def proposal_by_id(proposal_id: int) -> ProposalDescriptor:
    return _DESCRIPTORS[proposal_id]


def truncation_direction(desc: ProposalDescriptor) -> str:
    """Front everywhere except ParentClass and Current non-PL."""
    if desc.source == "ParentClass":
        return "back"
    if desc.source == "Current" and desc.context_type != "PL":
        return "back"
    return "front"


def truncate(text: str, budget: int, direction: str, tokenizer: Tokenizer) -> str:
    if direction == "front":
        return tokenizer.truncate_front(text, budget)
    if direction == "back":
        return tokenizer.truncate_back(text, budget)
    raise ValueError(f"unknown truncation direction {direction!r}")


def _format_contribution(findex: FileSyntaxIndex, elements: list[str]) -> str:
    return f"[{findex.primary_class_name}] " + " ".join(elements)


def _post_lines_text(index: RepoIndex, hole: HoleSpec, skip_lines: int) -> str:
    lines = index.sources[hole.file].lines
    return "\n".join(lines[hole.line + 1 + skip_lines:])


def _current_elements(
    findex: FileSyntaxIndex, context_type: str, hole: HoleSpec
) -> list[str]:
    """Post-hole elements first; pre-hole only when there are none.

    Elements on the hole line itself are never taken: past the column
    they overlap the target, before it they already sit in the default
    context.
    """
    big = 1 << 30
    after = extract_strings(findex, context_type, after_position(hole.line, big))
    if after:
        return after
    return extract_strings(
        findex, context_type, before_position(hole.line - 1, big)
    )


def proposal_context(
    desc: ProposalDescriptor,
    hole: HoleSpec,
    index: RepoIndex,
    budget: int,
    tokenizer: Tokenizer,
    pl_skip_lines: int = 0,
) -> ProposalContext:
    """Materialize one proposal's context string within ``budget`` tokens."""
    if desc.is_default:
        raise ValueError("the default proposal has no separate context")
    if budget <= 0:
        raise ValueError("budget must be positive")

    if desc.context_type == "PL":
        raw = _post_lines_text(index, hole, pl_skip_lines)
        applicable = bool(raw.strip())
        if not applicable:
            return ProposalContext(desc.id, "", 0, False, (), False)
        text = truncate(raw, budget, truncation_direction(desc), tokenizer)
        return ProposalContext(
            desc.id,
            text,
            tokenizer.count(text),
            True,
            (hole.file,),
            tokenizer.count(raw) > budget,
        )

    ranked = rank_source_files(index, desc.source, hole)
    parts: list[str] = []
    used: list[str] = []
    for path in ranked:
        findex = index.files[path]
        if desc.source == "Current":
            elements = _current_elements(findex, desc.context_type, hole)
        else:
            elements = extract_strings(findex, desc.context_type)
        if not elements:
            continue
        parts.append(_format_contribution(findex, elements))
        used.append(path)
        if tokenizer.count(" ".join(parts)) >= budget:
            break
    raw = " ".join(parts)
    applicable = bool(raw.strip())
    if not applicable:
        return ProposalContext(desc.id, "", 0, False, (), False)
    text = truncate(raw, budget, truncation_direction(desc), tokenizer)
    return ProposalContext(
        desc.id,
        text,
        tokenizer.count(text),
        True,
        tuple(used),
        tokenizer.count(raw) > budget,
    )
