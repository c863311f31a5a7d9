from __future__ import annotations

import numpy as np
import pytest

from embed_service import EMBED_DIM, FrozenEncoder


def test_dimension_and_unit_norm(encoder):
    vec = encoder.encode("public static void main")
    assert vec.shape == (EMBED_DIM,)
    assert abs(np.linalg.norm(vec) - 1.0) < 1e-12


def test_empty_text_is_the_zero_vector(encoder):
    assert np.array_equal(encoder.encode(""), np.zeros(EMBED_DIM))
    assert np.array_equal(encoder.encode("  \n\t "), np.zeros(EMBED_DIM))


def test_deterministic_across_instances(encoder):
    other = FrozenEncoder()
    for text in ("x", "a longer piece of text", "ünïcode ☃"):
        assert np.array_equal(encoder.encode(text), other.encode(text))


def test_batch_matches_single_and_preserves_order(encoder):
    texts = ["alpha", "bravo", "alpha", ""]
    batch = encoder.encode_batch(texts)
    assert len(batch) == 4
    for text, row in zip(texts, batch):
        assert np.array_equal(row, encoder.encode(text))
    assert np.array_equal(batch[0], batch[2])
    assert not np.array_equal(batch[0], batch[1])


def test_max_tokens_truncates(encoder):
    # identical first three tokens, divergence only afterwards
    a = "one two three four"
    b = "one two three FIVE"
    assert np.array_equal(encoder.encode(a, max_tokens=3), encoder.encode(b, max_tokens=3))
    assert not np.array_equal(encoder.encode(a, max_tokens=4), encoder.encode(b, max_tokens=4))


def test_max_tokens_must_be_positive(encoder):
    with pytest.raises(ValueError):
        encoder.encode("x", max_tokens=0)


def test_weights_never_change(encoder):
    before = encoder.weights_fingerprint()
    encoder.encode_batch(["a", "b c d", "e" * 100], max_tokens=16)
    assert encoder.weights_fingerprint() == before


def test_weights_are_write_protected(encoder):
    with pytest.raises(ValueError):
        encoder.token_table[0, 0] = 1.0


def test_different_seeds_give_a_different_model():
    fenc = FrozenEncoder(seed=1)
    assert not np.array_equal(fenc.encode("x"), FrozenEncoder().encode("x"))
