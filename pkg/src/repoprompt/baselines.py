"""Non-learned context selection: Okapi BM25 and retrieval baselines.

BM25 scores proposal contexts against the hole window to pick a
proposal without a trained selector. The remaining strategies build a
raw context string that fills the proposal half of the prompt: a random
file tail, the best of 64 random tails by embedding dot product, whole
files ranked by BM25, or usage windows of the identifier nearest the
hole (shuffled or ordered by dot product).
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np

from .holes import HoleSpec, hole_window
from .proposals import DEFAULT_PROPOSAL_ID
from .repograph import RepoIndex

BM25_K1 = 1.5
BM25_B = 0.75
RANDOM_NN_CANDIDATES = 64
USAGE_WINDOW_MARGIN = 2

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

BASELINE_STRATEGIES = (
    "random",
    "random_nn",
    "file_bm25",
    "ident_random",
    "ident_nn",
)


@dataclass(frozen=True)
class ScoredDocument:
    doc_id: int
    score: float
    token_count: int


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def bm25_scores(
    query_tokens: list[str],
    documents: list[list[str]],
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> list[float]:
    """Okapi BM25 with the +1 inside the IDF log, so scores stay >= 0."""
    if not documents:
        raise ValueError("bm25_scores needs at least one document")
    n_docs = len(documents)
    doc_freq: dict[str, int] = {}
    for doc in documents:
        for term in set(doc):
            doc_freq[term] = doc_freq.get(term, 0) + 1
    avgdl = sum(len(doc) for doc in documents) / n_docs
    scores = []
    for doc in documents:
        if not doc or avgdl == 0:
            scores.append(0.0)
            continue
        counts: dict[str, int] = {}
        for term in doc:
            counts[term] = counts.get(term, 0) + 1
        norm = k1 * (1.0 - b + b * len(doc) / avgdl)
        score = 0.0
        for term in query_tokens:
            freq = counts.get(term, 0)
            if freq == 0:
                continue
            n_t = doc_freq.get(term, 0)
            idf = math.log((n_docs - n_t + 0.5) / (n_t + 0.5) + 1.0)
            score += idf * freq * (k1 + 1.0) / (freq + norm)
        scores.append(score)
    return scores


def rank_documents(query_tokens: list[str], documents: list[list[str]]) -> list[ScoredDocument]:
    scores = bm25_scores(query_tokens, documents)
    ranked = [
        ScoredDocument(i, scores[i], len(documents[i])) for i in range(len(documents))
    ]
    ranked.sort(key=lambda d: (-d.score, d.doc_id))
    return ranked


def select_proposal_bm25(hole_window: str, context_texts: dict[int, str]) -> int:
    """Applicable proposal whose context scores highest; ties favor low ids.

    Pass the default context's text under id 62 so the always-applicable
    proposal competes too.
    """
    usable = {
        pid: text
        for pid, text in context_texts.items()
        if pid == DEFAULT_PROPOSAL_ID or text.strip()
    }
    if not usable:
        raise ValueError("no applicable proposal contexts")
    ids = sorted(usable)
    query = tokenize(hole_window)
    scores = bm25_scores(query, [tokenize(usable[i]) for i in ids])
    best = max(range(len(ids)), key=lambda i: (scores[i], -ids[i]))
    return ids[best]


# context-building strategies ------------------------------------------


def _hole_rng(seed: int, hole: HoleSpec) -> np.random.RandomState:
    digest = hashlib.sha256(f"{seed}:{hole.id}".encode("utf-8")).digest()
    return np.random.RandomState(int.from_bytes(digest[:4], "little"))


def _window_lines(hole: HoleSpec) -> set[int]:
    return set(range(hole.line - USAGE_WINDOW_MARGIN, hole.line + USAGE_WINDOW_MARGIN + 1))


def _random_tail(rng: np.random.RandomState, index: RepoIndex, hole: HoleSpec) -> str:
    files = sorted(index.sources)
    path = files[rng.randint(len(files))]
    lines = index.sources[path].lines
    if not lines:
        return ""
    start = int(rng.randint(len(lines)))
    picked = lines[start:]
    if path == hole.file:
        excluded = _window_lines(hole)
        picked = [
            text for i, text in enumerate(picked, start) if i not in excluded
        ]
    return "\n".join(picked)


def _dot_order(provider, hole_window: str, candidates: list[str]) -> list[int]:
    vectors = provider.embed_batch([hole_window] + candidates)
    sims = vectors[1:] @ vectors[0]
    return sorted(range(len(candidates)), key=lambda i: (-float(sims[i]), i))


def _concat_to_budget(parts: list[str], budget: int, tokenizer) -> str:
    kept: list[str] = []
    for part in parts:
        kept.append(part)
        if tokenizer.count("\n".join(kept)) >= budget:
            break
    return tokenizer.truncate_back("\n".join(kept), budget)


def _identifier_candidates(index: RepoIndex, hole: HoleSpec) -> list[str]:
    """Identifier names near the hole, nearest first; before-hole wins ties."""
    findex = index.files[hole.file]
    src = index.sources[hole.file]
    hole_offset = src.line_table[hole.line] + hole.hole_start_col
    seen: set[str] = set()
    scored = []
    for occ in findex.identifiers + findex.type_identifiers:
        offset = src.line_table[occ.span.start_line] + occ.span.start_col
        after = 1 if offset > hole_offset else 0
        scored.append((abs(offset - hole_offset), after, offset, occ.text))
    names = []
    for _, _, _, name in sorted(scored):
        if name not in seen:
            seen.add(name)
            names.append(name)
    return names


def _usage_windows(index: RepoIndex, hole: HoleSpec, name: str) -> list[str]:
    # Windows touching the hole's own line would leak the target.
    windows: list[str] = []
    for path in sorted(index.sources):
        findex = index.files[path]
        lines = index.sources[path].lines
        used: set[int] = set()
        for occ in findex.identifiers + findex.type_identifiers:
            line = occ.span.start_line
            if occ.text != name or line in used:
                continue
            used.add(line)
            lo = max(0, line - USAGE_WINDOW_MARGIN)
            hi = min(len(lines), line + USAGE_WINDOW_MARGIN + 1)
            if path == hole.file and lo <= hole.line < hi:
                continue
            windows.append("\n".join(lines[lo:hi]))
    return windows


def baseline_context(
    strategy: str,
    hole: HoleSpec,
    index: RepoIndex,
    budget: int,
    seed: int,
    tokenizer,
    provider=None,
) -> str:
    """Context string for one hole; empty when nothing is constructible."""
    if strategy not in BASELINE_STRATEGIES:
        raise ValueError(f"unknown baseline strategy {strategy!r}")
    if budget <= 0:
        return ""
    rng = _hole_rng(seed, hole)
    if strategy == "random":
        return tokenizer.truncate_back(_random_tail(rng, index, hole), budget)
    if strategy == "random_nn":
        candidates = [
            _random_tail(rng, index, hole) for _ in range(RANDOM_NN_CANDIDATES)
        ]
        order = _dot_order(provider, hole_window(hole, index), candidates)
        return _concat_to_budget([candidates[i] for i in order], budget, tokenizer)
    if strategy == "file_bm25":
        paths = sorted(p for p in index.sources if p != hole.file)
        if not paths:
            return ""
        texts = [index.sources[p].text for p in paths]
        query = tokenize(hole_window(hole, index))
        ranked = rank_documents(query, [tokenize(t) for t in texts])
        return _concat_to_budget([texts[d.doc_id] for d in ranked], budget, tokenizer)
    # identifier-usage strategies
    for name in _identifier_candidates(index, hole):
        windows = _usage_windows(index, hole, name)
        if not windows:
            continue
        if strategy == "ident_random":
            order = list(rng.permutation(len(windows)))
        else:
            order = _dot_order(provider, hole_window(hole, index), windows)
        return _concat_to_budget([windows[i] for i in order], budget, tokenizer)
    return ""
