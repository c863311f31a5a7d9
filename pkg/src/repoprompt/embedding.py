"""Frozen text-embedding providers for the proposal classifier.

The classifier never trains its embedding source. Two providers honor
the same contract (deterministic, 768 dimensions, empty text maps to
the zero vector):

* ``HashedEmbeddingProvider``: offline fallback. Each token is hashed
  into one of 768 buckets with a hash-derived sign, mean-pooled and
  unit-normalized.
* ``RemoteEmbeddingProvider``: client for an embedding sidecar speaking
  ``POST /embed {"texts": [...], "max_tokens": n} -> {"vectors": [...]}``.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np
import requests

EMBEDDING_DIM = 768

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class EmbeddingTransportError(RuntimeError):
    """Provider unreachable or returned a malformed response."""


class HashedEmbeddingProvider:
    identity = "hashed"
    dimension = EMBEDDING_DIM

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(EMBEDDING_DIM, dtype=np.float64)
        tokens = _TOKEN_RE.findall(text)
        if not tokens:
            return vec
        for token in tokens:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "little") % EMBEDDING_DIM
            sign = 1.0 if digest[8] & 1 == 0 else -1.0
            vec[bucket] += sign
        vec /= len(tokens)
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        return np.stack([self.embed(t) for t in texts])


class RemoteEmbeddingProvider:
    identity = "remote"
    dimension = EMBEDDING_DIM

    def __init__(self, base_url: str, max_tokens: int = 512, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.max_tokens = max_tokens
        self.timeout = timeout
        self._session = requests.Session()

    def embed_batch(self, texts: list[str]) -> np.ndarray:
        try:
            response = self._session.post(
                f"{self.base_url}/embed",
                json={"texts": texts, "max_tokens": self.max_tokens},
                timeout=self.timeout,
            )
            response.raise_for_status()
            vectors = response.json()["vectors"]
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise EmbeddingTransportError(str(exc)) from exc
        array = np.asarray(vectors, dtype=np.float64)
        if array.shape != (len(texts), EMBEDDING_DIM):
            raise EmbeddingTransportError(
                f"expected shape {(len(texts), EMBEDDING_DIM)}, got {array.shape}"
            )
        return array

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]


EmbeddingProvider = HashedEmbeddingProvider | RemoteEmbeddingProvider


def get_provider(name: str, base_url: str | None = None) -> EmbeddingProvider:
    if name == "hashed":
        return HashedEmbeddingProvider()
    if name == "remote":
        if not base_url:
            raise ValueError("remote provider requires a base URL")
        return RemoteEmbeddingProvider(base_url)
    raise ValueError(f"unknown embedding provider {name!r}")
