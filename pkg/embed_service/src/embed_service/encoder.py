"""Frozen deterministic text encoder.

The encoder is a small transformer whose weights are drawn once from a
fixed seed and never change afterwards. A text is tokenized, truncated
to the caller's token limit, prefixed with a summary slot, and run
through the encoder stack; the summary slot's final hidden state,
unit-normalized, is the text's embedding. Everything runs in float64
with no dropout, so identical inputs always produce identical vectors.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

EMBED_DIM = 768

_VOCAB_BUCKETS = 8192
_N_LAYERS = 2
_N_HEADS = 4
_HEAD_DIM = EMBED_DIM // _N_HEADS
_FFN_DIM = 1024
_WEIGHT_SEED = 768_002

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def _token_bucket(token: str) -> int:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % _VOCAB_BUCKETS


def _positional_table(length: int) -> np.ndarray:
    # standard sinusoidal encoding, scaled down so token identity dominates
    pos = np.arange(length, dtype=np.float64)[:, None]
    dim = np.arange(EMBED_DIM, dtype=np.float64)[None, :]
    angle = pos / np.power(10_000.0, (2 * (dim // 2)) / EMBED_DIM)
    table = np.where(dim % 2 == 0, np.sin(angle), np.cos(angle))
    return 0.1 * table


def _layer_norm(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + 1e-6)


class FrozenEncoder:
    """Transformer encoder with weights fixed at construction time."""

    def __init__(self, name: str = "frozen-mini-768", seed: int = _WEIGHT_SEED):
        self.name = name
        rng = np.random.RandomState(seed)
        scale = 1.0 / np.sqrt(EMBED_DIM)
        self.token_table = rng.normal(0.0, scale, size=(_VOCAB_BUCKETS, EMBED_DIM))
        self.summary_slot = rng.normal(0.0, scale, size=EMBED_DIM)
        self.layers = []
        for _ in range(_N_LAYERS):
            self.layers.append({
                "Wq": rng.normal(0.0, scale, size=(EMBED_DIM, EMBED_DIM)),
                "Wk": rng.normal(0.0, scale, size=(EMBED_DIM, EMBED_DIM)),
                "Wv": rng.normal(0.0, scale, size=(EMBED_DIM, EMBED_DIM)),
                "Wo": rng.normal(0.0, scale, size=(EMBED_DIM, EMBED_DIM)),
                "Win": rng.normal(0.0, scale, size=(EMBED_DIM, _FFN_DIM)),
                "Wout": rng.normal(0.0, 1.0 / np.sqrt(_FFN_DIM), size=(_FFN_DIM, EMBED_DIM)),
            })
        for matrix in self._matrices():
            matrix.setflags(write=False)

    def _matrices(self):
        yield self.token_table
        yield self.summary_slot
        for layer in self.layers:
            yield from layer.values()

    def weights_fingerprint(self) -> str:
        digest = hashlib.sha256()
        for matrix in self._matrices():
            digest.update(np.ascontiguousarray(matrix).tobytes())
        return digest.hexdigest()

    def _attention(self, layer: dict, x: np.ndarray) -> np.ndarray:
        n = x.shape[0]
        q = (x @ layer["Wq"]).reshape(n, _N_HEADS, _HEAD_DIM)
        k = (x @ layer["Wk"]).reshape(n, _N_HEADS, _HEAD_DIM)
        v = (x @ layer["Wv"]).reshape(n, _N_HEADS, _HEAD_DIM)
        out = np.empty_like(q)
        for h in range(_N_HEADS):
            logits = q[:, h] @ k[:, h].T / np.sqrt(_HEAD_DIM)
            logits -= logits.max(axis=1, keepdims=True)
            weights = np.exp(logits)
            weights /= weights.sum(axis=1, keepdims=True)
            out[:, h] = weights @ v[:, h]
        return out.reshape(n, EMBED_DIM) @ layer["Wo"]

    def encode(self, text: str, max_tokens: int = 512) -> np.ndarray:
        """768-vector for one text; zero vector when it has no tokens."""
        if max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        tokens = _TOKEN_RE.findall(text)[:max_tokens]
        if not tokens:
            return np.zeros(EMBED_DIM, dtype=np.float64)
        ids = [_token_bucket(t) for t in tokens]
        x = np.vstack([self.summary_slot, self.token_table[ids]])
        x = x + _positional_table(x.shape[0])
        for layer in self.layers:
            x = _layer_norm(x + self._attention(layer, x))
            hidden = np.maximum(x @ layer["Win"], 0.0)
            x = _layer_norm(x + hidden @ layer["Wout"])
        summary = x[0]
        return summary / np.linalg.norm(summary)

    def encode_batch(self, texts: list[str], max_tokens: int = 512) -> list[np.ndarray]:
        return [self.encode(t, max_tokens) for t in texts]
