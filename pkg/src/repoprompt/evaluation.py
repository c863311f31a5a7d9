"""Ground-truth labeling, metrics, method evaluation, and attempt curves.

A label records, for one hole, which proposals are applicable (T) and
which proposals' composed prompts elicit an exact-match completion (Y).
Methods are evaluated by choosing one prompt per hole (or k prompts for
the attempts curve), querying the backend, and scoring exact match and
normalized edit distance. Success rates aggregate two ways: hole-wise
over all holes, and repo-wise as the unweighted mean of per-repo rates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import baseline_context, select_proposal_bm25
from .classifier import PPCModel, forward_h, forward_r
from .composer import compose_prompt, compose_with_context, default_context_text
from .gateway import CompletionRequest, TransportError
from .holes import HoleSpec, hole_window
from .proposals import (
    DEFAULT_PROPOSAL_ID,
    PROPOSAL_COUNT,
    ProposalContext,
    enumerate_proposals,
    proposal_by_id,
    proposal_context,
)
from .repograph import RepoIndex
from .tokenizers import Tokenizer

import numpy as np

METHODS = (
    "default",
    "oracle",
    "fixed",
    "selector-h",
    "selector-r",
    "proposal-bm25",
    "file-bm25",
    "random",
    "random-nn",
    "ident-random",
    "ident-nn",
)

_BASELINE_STRATEGY = {
    "file-bm25": "file_bm25",
    "random": "random",
    "random-nn": "random_nn",
    "ident-random": "ident_random",
    "ident-nn": "ident_nn",
}

RANKINGS = ("selector-h", "selector-r", "fixed")


@dataclass
class LabelRecord:
    hole_id: str
    Y: list[int]
    T: list[int]
    incomplete: bool = False
    failed: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class EvalRecord:
    hole_id: str
    method: str
    chosen_id: int | None
    prediction: str
    exact_match: bool
    norm_edit_distance: float


@dataclass
class MethodReport:
    method: str
    sr_holewise: float
    sr_repowise: float
    mean_ned: float
    per_repo: dict[str, dict[str, float]]
    records: list[EvalRecord]


# metrics --------------------------------------------------------------


def exact_match(prediction: str, target: str) -> bool:
    """Byte equality after stripping exactly one trailing newline."""
    if prediction.endswith("\n"):
        prediction = prediction[:-1]
    return prediction == target


def norm_edit_distance(prediction: str, target: str) -> float:
    """Levenshtein distance divided by the target length."""
    if not target:
        raise ValueError("norm_edit_distance needs a non-empty target")
    if prediction.endswith("\n"):
        prediction = prediction[:-1]
    if prediction == target:
        return 0.0
    prev = list(range(len(target) + 1))
    for i, a in enumerate(prediction, 1):
        cur = [i]
        for j, b in enumerate(target, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a != b)))
        prev = cur
    return prev[-1] / len(target)


# labeling -------------------------------------------------------------


def materialize_contexts(
    hole: HoleSpec,
    index: RepoIndex,
    tokenizer: Tokenizer,
    total: int,
    pl_skip_lines: int = 0,
) -> dict[int, ProposalContext]:
    """Applicable non-default proposal contexts at their nominal budgets."""
    out: dict[int, ProposalContext] = {}
    for desc in enumerate_proposals():
        if desc.is_default:
            continue
        budget = int(total * desc.budget_fraction)
        if budget <= 0:
            continue
        ctx = proposal_context(desc, hole, index, budget, tokenizer, pl_skip_lines)
        if ctx.applicable:
            out[desc.id] = ctx
    return out


def label_hole(
    hole: HoleSpec,
    index: RepoIndex,
    backend,
    tokenizer: Tokenizer,
    total: int,
) -> LabelRecord:
    """Ask the backend about every applicable proposal's prompt."""
    record = LabelRecord(hole.id, [0] * PROPOSAL_COUNT, [0] * PROPOSAL_COUNT)
    contexts = materialize_contexts(hole, index, tokenizer, total)
    record.T[DEFAULT_PROPOSAL_ID] = 1
    for pid in contexts:
        record.T[pid] = 1
    for pid in sorted(contexts) + [DEFAULT_PROPOSAL_ID]:
        prompt = compose_prompt(hole, contexts.get(pid), index, tokenizer, total)
        try:
            completion = backend.complete(
                CompletionRequest(prompt.text), hole.id, tokenizer
            )
        except TransportError:
            record.incomplete = True
            record.failed.append(pid)
            continue
        if exact_match(completion, hole.target):
            record.Y[pid] = 1
    return record


def write_labels(records: list[LabelRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {"hole_id": rec.hole_id, "Y": rec.Y, "T": rec.T,
                     "incomplete": rec.incomplete, "failed": rec.failed},
                    sort_keys=True,
                )
                + "\n"
            )


def read_labels(path: str | Path) -> dict[str, LabelRecord]:
    out: dict[str, LabelRecord] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            out[doc["hole_id"]] = LabelRecord(
                doc["hole_id"], list(doc["Y"]), list(doc["T"]),
                doc.get("incomplete", False), list(doc.get("failed", [])),
            )
    return out


def build_train_examples(
    holes: list[HoleSpec],
    labels: dict[str, LabelRecord],
    indexes: dict[str, RepoIndex],
    tokenizer: Tokenizer,
    total: int,
    variant: str,
) -> list:
    """Selector training rows from labeled holes.

    The r variant additionally needs each applicable proposal's context
    text; the default proposal contributes the pre-hole text.
    """
    from .classifier import TrainExample

    examples = []
    for hole in holes:
        label = labels[hole.id]
        index = indexes[hole.repo_id]
        window = hole_window(hole, index)
        context_texts: dict[int, str] = {}
        if variant == "r":
            contexts = materialize_contexts(hole, index, tokenizer, total)
            context_texts = {pid: ctx.text for pid, ctx in contexts.items()}
            context_texts[DEFAULT_PROPOSAL_ID] = tokenizer.truncate_front(
                default_context_text(hole, index), total
            )
        examples.append(
            TrainExample(
                hole.id, window,
                np.asarray(label.Y, dtype=np.float64),
                np.asarray(label.T, dtype=np.float64),
                context_texts,
            )
        )
    return examples


# method evaluation ----------------------------------------------------


def _selector_inputs(
    hole: HoleSpec,
    index: RepoIndex,
    contexts: dict[int, ProposalContext],
    tokenizer: Tokenizer,
    total: int,
    provider,
    need_context_vecs: bool,
):
    window = hole_window(hole, index)
    T = np.zeros(PROPOSAL_COUNT)
    T[DEFAULT_PROPOSAL_ID] = 1.0
    for pid in contexts:
        T[pid] = 1.0
    hole_vec = provider.embed(window)
    C = None
    if need_context_vecs:
        default_text = tokenizer.truncate_front(
            default_context_text(hole, index), total
        )
        texts = {pid: ctx.text for pid, ctx in contexts.items()}
        texts[DEFAULT_PROPOSAL_ID] = default_text
        ordered = sorted(texts)
        vectors = provider.embed_batch([texts[p] for p in ordered])
        C = np.zeros((PROPOSAL_COUNT, 768))
        for row, pid in enumerate(ordered):
            C[pid] = vectors[row]
    return hole_vec, C, T


def _selector_order(
    model: PPCModel,
    hole: HoleSpec,
    index: RepoIndex,
    contexts: dict[int, ProposalContext],
    tokenizer: Tokenizer,
    total: int,
    provider,
) -> list[int]:
    hole_vec, C, T = _selector_inputs(
        hole, index, contexts, tokenizer, total, provider,
        need_context_vecs=model.variant == "r",
    )
    if model.variant == "h":
        probs = forward_h(model, hole_vec)
    else:
        probs = forward_r(model, hole_vec, C, T)
    applicable = [p for p in range(PROPOSAL_COUNT) if T[p]]
    return sorted(applicable, key=lambda p: (-float(probs[p]), p))


def _choose_proposal(
    method: str,
    hole: HoleSpec,
    index: RepoIndex,
    contexts: dict[int, ProposalContext],
    tokenizer: Tokenizer,
    total: int,
    model: PPCModel | None,
    provider,
    fixed_id: int,
) -> int:
    if method == "default":
        return DEFAULT_PROPOSAL_ID
    if method == "fixed":
        return fixed_id if fixed_id in contexts else DEFAULT_PROPOSAL_ID
    if method in ("selector-h", "selector-r"):
        if model is None:
            raise ValueError(f"{method} needs a trained selector checkpoint")
        return _selector_order(
            model, hole, index, contexts, tokenizer, total, provider
        )[0]
    if method == "proposal-bm25":
        texts = {pid: ctx.text for pid, ctx in contexts.items()}
        texts[DEFAULT_PROPOSAL_ID] = tokenizer.truncate_front(
            default_context_text(hole, index), total
        )
        return select_proposal_bm25(hole_window(hole, index), texts)
    raise ValueError(f"unknown proposal-choosing method {method!r}")


def _complete_and_score(
    method: str, hole: HoleSpec, prompt_text: str, chosen: int | None,
    backend, tokenizer,
) -> EvalRecord:
    completion = backend.complete(CompletionRequest(prompt_text), hole.id, tokenizer)
    em = exact_match(completion, hole.target)
    ned = 0.0 if em else norm_edit_distance(completion, hole.target)
    return EvalRecord(hole.id, method, chosen, completion, em, ned)


def _evaluate_oracle(
    hole: HoleSpec,
    index: RepoIndex,
    label: LabelRecord,
    backend,
    tokenizer: Tokenizer,
    total: int,
) -> EvalRecord:
    contexts = materialize_contexts(hole, index, tokenizer, total)
    best: EvalRecord | None = None
    for pid in sorted(contexts) + [DEFAULT_PROPOSAL_ID]:
        prompt = compose_prompt(hole, contexts.get(pid), index, tokenizer, total)
        rec = _complete_and_score("oracle", hole, prompt.text, pid, backend, tokenizer)
        if rec.exact_match:
            return rec
        if best is None or rec.norm_edit_distance < best.norm_edit_distance:
            best = rec
    assert best is not None
    expected = any(label.Y)
    if expected:
        # Labels said some proposal succeeds but replay found none; the
        # backend is not behaving deterministically.
        raise RuntimeError(f"oracle replay diverged from labels for hole {hole.id}")
    return best


def evaluate_method(
    method: str,
    holes: list[HoleSpec],
    indexes: dict[str, RepoIndex],
    backend,
    tokenizer: Tokenizer,
    total: int,
    labels: dict[str, LabelRecord] | None = None,
    model: PPCModel | None = None,
    provider=None,
    fixed_id: int = 7,
    seed: int = 0,
) -> MethodReport:
    if not holes:
        raise ValueError("no holes to evaluate")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    records: list[EvalRecord] = []
    for hole in holes:
        index = indexes[hole.repo_id]
        if method == "oracle":
            if labels is None or hole.id not in labels:
                raise ValueError("oracle evaluation needs labels for every hole")
            records.append(
                _evaluate_oracle(hole, index, labels[hole.id], backend, tokenizer, total)
            )
        elif method in _BASELINE_STRATEGY:
            context = baseline_context(
                _BASELINE_STRATEGY[method], hole, index,
                int(total * 0.5), seed, tokenizer, provider,
            )
            prompt = compose_with_context(hole, context, index, tokenizer, total)
            records.append(
                _complete_and_score(method, hole, prompt.text, None, backend, tokenizer)
            )
        else:
            contexts = materialize_contexts(hole, index, tokenizer, total)
            chosen = _choose_proposal(
                method, hole, index, contexts, tokenizer, total,
                model, provider, fixed_id,
            )
            prompt = compose_prompt(hole, contexts.get(chosen), index, tokenizer, total)
            records.append(
                _complete_and_score(method, hole, prompt.text, chosen, backend, tokenizer)
            )
    return _aggregate(method, holes, records)


def _aggregate(method: str, holes: list[HoleSpec], records: list[EvalRecord]) -> MethodReport:
    by_repo: dict[str, list[EvalRecord]] = {}
    for hole, rec in zip(holes, records):
        by_repo.setdefault(hole.repo_id, []).append(rec)
    per_repo = {
        repo: {
            "n": float(len(recs)),
            "sr": sum(r.exact_match for r in recs) / len(recs),
        }
        for repo, recs in sorted(by_repo.items())
    }
    sr_holewise = sum(r.exact_match for r in records) / len(records)
    sr_repowise = sum(v["sr"] for v in per_repo.values()) / len(per_repo)
    mean_ned = sum(r.norm_edit_distance for r in records) / len(records)
    return MethodReport(method, sr_holewise, sr_repowise, mean_ned, per_repo, records)


# attempts curve -------------------------------------------------------


def fixed_proposal_ranking(validation_labels: list[LabelRecord]) -> list[int]:
    """Proposals by validation success rate, best first; ties favor low ids."""
    if not validation_labels:
        raise ValueError("fixed ranking needs validation labels")
    rates = []
    for pid in range(PROPOSAL_COUNT):
        wins = sum(rec.Y[pid] for rec in validation_labels)
        trials = sum(rec.T[pid] for rec in validation_labels)
        rates.append(wins / max(1, trials))
    return sorted(range(PROPOSAL_COUNT), key=lambda p: (-rates[p], p))


def attempts_curve(
    ranking: str,
    holes: list[HoleSpec],
    labels: dict[str, LabelRecord],
    k_values: list[int],
    indexes: dict[str, RepoIndex],
    tokenizer: Tokenizer,
    total: int,
    model: PPCModel | None = None,
    provider=None,
    validation_labels: list[LabelRecord] | None = None,
) -> list[tuple[int, float]]:
    """SR when the top-k ranked proposals each get one attempt."""
    if ranking not in RANKINGS:
        raise ValueError(f"unknown ranking {ranking!r}")
    if any(k < 1 or k > PROPOSAL_COUNT for k in k_values):
        raise ValueError("k values must lie in 1..63")
    per_hole_order: dict[str, list[int]] = {}
    if ranking == "fixed":
        if validation_labels is None:
            raise ValueError("fixed ranking needs validation labels")
        global_order = fixed_proposal_ranking(validation_labels)
        for hole in holes:
            per_hole_order[hole.id] = global_order
    else:
        if model is None:
            raise ValueError(f"{ranking} ranking needs a trained selector checkpoint")
        for hole in holes:
            index = indexes[hole.repo_id]
            contexts = materialize_contexts(hole, index, tokenizer, total)
            per_hole_order[hole.id] = _selector_order(
                model, hole, index, contexts, tokenizer, total, provider
            )
    curve = []
    for k in sorted(set(k_values)):
        wins = 0
        for hole in holes:
            label = labels[hole.id]
            order = per_hole_order[hole.id][:k]
            wins += any(label.Y[p] for p in order)
        curve.append((k, wins / len(holes)))
    return curve
