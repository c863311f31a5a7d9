"""Combine proposal context with the default pre-hole context.

The default context is everything in the file strictly before the hole
position, truncated from the front so the lines nearest the hole
survive. A proposal's context always precedes it, joined by a single
newline. Budgets: the proposal side nominally gets ``floor(total x f)``
tokens (f is the PL fraction for ids 5-7, otherwise one half); whatever
it does not use flows back to the default side. The composed prompt is
re-counted and trimmed until it fits the total, so the budget guarantee
does not rely on token counts being additive across concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .holes import HoleSpec
from .proposals import (
    DEFAULT_PROPOSAL_ID,
    ProposalContext,
    ProposalDescriptor,
    proposal_by_id,
    truncate,
    truncation_direction,
)
from .repograph import RepoIndex
from .tokenizers import Tokenizer

SEPARATOR = "\n"


@dataclass(frozen=True)
class Prompt:
    text: str
    proposal_id: int
    proposal_tokens: int
    default_tokens: int
    total_budget: int


class InapplicableProposalError(ValueError):
    """Raised when composing a non-default proposal with empty context."""


def allocate_budgets(
    desc: ProposalDescriptor, total: int, actual_proposal_tokens: int
) -> tuple[int, int]:
    """(proposal budget, default budget) under dynamic reallocation."""
    if total <= 0:
        raise ValueError("total budget must be positive")
    if desc.is_default:
        return 0, total
    nominal = int(total * desc.budget_fraction)
    proposal_budget = min(nominal, actual_proposal_tokens)
    return proposal_budget, total - proposal_budget


def default_context_text(hole: HoleSpec, index: RepoIndex) -> str:
    """All file text strictly before the hole position."""
    src = index.sources[hole.file]
    offset = src.line_table[hole.line] + hole.hole_start_col
    return src.text[:offset]


def compose_prompt(
    hole: HoleSpec,
    proposal_ctx: ProposalContext | None,
    index: RepoIndex,
    tokenizer: Tokenizer,
    total: int,
) -> Prompt:
    """Build the final prompt for one proposal; fits ``total`` tokens."""
    if total <= 0:
        raise ValueError("total budget must be positive")
    if proposal_ctx is None or proposal_ctx.proposal_id == DEFAULT_PROPOSAL_ID:
        proposal_id = DEFAULT_PROPOSAL_ID
        proposal_text = ""
    else:
        if not proposal_ctx.applicable:
            raise InapplicableProposalError(
                f"proposal {proposal_ctx.proposal_id} has no context for hole {hole.id}"
            )
        proposal_id = proposal_ctx.proposal_id
        proposal_text = proposal_ctx.text
    desc = proposal_by_id(proposal_id)

    _, default_budget = allocate_budgets(
        desc, total, tokenizer.count(proposal_text)
    )
    default_text = tokenizer.truncate_front(
        default_context_text(hole, index), default_budget
    )
    return _fit(
        proposal_text, default_text, proposal_id,
        truncation_direction(desc), tokenizer, total,
    )


def compose_with_context(
    hole: HoleSpec,
    context_text: str,
    index: RepoIndex,
    tokenizer: Tokenizer,
    total: int,
    context_fraction: float = 0.5,
) -> Prompt:
    """Compose a prompt around a precomputed (non-proposal) context.

    Used by the retrieval baselines: the context nominally takes
    ``floor(total x fraction)`` tokens (truncated from the back) and the
    pre-hole default context fills the remainder. ``proposal_id`` on the
    result is -1 since no proposal produced the context.
    """
    if total <= 0:
        raise ValueError("total budget must be positive")
    nominal = int(total * context_fraction)
    context_text = tokenizer.truncate_back(context_text, nominal)
    default_budget = total - tokenizer.count(context_text)
    default_text = tokenizer.truncate_front(
        default_context_text(hole, index), default_budget
    )
    return _fit(context_text, default_text, -1, "back", tokenizer, total)


def _fit(
    proposal_text: str,
    default_text: str,
    proposal_id: int,
    direction: str,
    tokenizer: Tokenizer,
    total: int,
) -> Prompt:
    # Re-count after joining: token counts need not be additive.
    sep_cost = tokenizer.count(SEPARATOR)
    while True:
        parts = [p for p in (proposal_text, default_text) if p]
        text = SEPARATOR.join(parts)
        p_count = tokenizer.count(proposal_text)
        d_count = tokenizer.count(default_text)
        budgeted = p_count + d_count + (sep_cost if len(parts) == 2 else 0)
        if budgeted <= total and tokenizer.count(text) <= total:
            return Prompt(text, proposal_id, p_count, d_count, total)
        if default_text:
            default_text = tokenizer.truncate_front(
                default_text, max(0, d_count - 1)
            )
        elif proposal_text:
            proposal_text = truncate(
                proposal_text, max(0, p_count - 1), direction, tokenizer
            )
        else:
            return Prompt("", proposal_id, 0, 0, total)


def compose_multi(
    hole: HoleSpec,
    contexts: list[tuple[int, str]],
    index: RepoIndex,
    tokenizer: Tokenizer,
    total: int,
) -> Prompt:
    """Compose several proposal contexts (already cut to their budgets)
    ahead of the default context; the block keeps proposal order and is
    trimmed from the front if the whole prompt overruns."""
    if total <= 0:
        raise ValueError("total budget must be positive")
    block = SEPARATOR.join(text for _, text in contexts if text)
    default_budget = total - tokenizer.count(block)
    default_text = tokenizer.truncate_front(
        default_context_text(hole, index), max(0, default_budget)
    )
    first_id = contexts[0][0] if contexts else DEFAULT_PROPOSAL_ID
    return _fit(block, default_text, first_id, "front", tokenizer, total)


def composition_budgets(
    probs: dict[int, float], l: int, total: int
) -> list[tuple[int, int]]:
    """Split the proposal half of ``total`` across the top-l proposals.

    Budgets are proportional to each proposal's probability within the
    chosen set, floored; leftover tokens stay with the default side.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    if l > len(probs):
        raise ValueError(f"l={l} exceeds {len(probs)} scored proposals")
    chosen = sorted(probs.items(), key=lambda kv: (-kv[1], kv[0]))[:l]
    total_pp = int(total * 0.5)
    mass = sum(p for _, p in chosen)
    if mass <= 0:
        raise ValueError("chosen proposals carry zero probability mass")
    return [(pid, int(total_pp * p / mass)) for pid, p in chosen]
