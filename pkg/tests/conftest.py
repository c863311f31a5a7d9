from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from repoprompt.embedding import HashedEmbeddingProvider
from repoprompt.holes import mine_holes
from repoprompt.repograph import build_repo_index
from repoprompt.tokenizers import get_tokenizer

MINIREPO = Path(__file__).parent / "data" / "minirepo"


@pytest.fixture(scope="session")
def minirepo_root() -> Path:
    return MINIREPO


@pytest.fixture(scope="session")
def minirepo_index():
    return build_repo_index(MINIREPO, "minirepo")


@pytest.fixture(scope="session")
def fallback_tok():
    return get_tokenizer("fallback")


@pytest.fixture(scope="session")
def bpe_tok():
    return get_tokenizer("bpe")


@pytest.fixture(scope="session")
def provider():
    return HashedEmbeddingProvider()


@pytest.fixture(scope="session")
def mined_holes(minirepo_index):
    return mine_holes(minirepo_index, cap=200, seed=3)
