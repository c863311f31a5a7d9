"""Cross-package contract: the sidecar behind the primary's remote provider.

A real server runs on an ephemeral port and the consumer talks to it
over HTTP exactly as in production. The provider contract function below
is the same one the consumer's own suite applies to its offline hashed
provider; both providers must pass it unchanged. The consumer's suite
never needs this server (it stays green with the sidecar absent), which
is the other half of the deployment contract.
"""

from __future__ import annotations

import threading
import time

import numpy as np
import pytest
import uvicorn

from embed_service import create_app
from repoprompt.embedding import (
    EMBEDDING_DIM,
    HashedEmbeddingProvider,
    RemoteEmbeddingProvider,
)


def provider_contract_checks(provider):
    """Shared contract: 768 dims, deterministic, order-preserving,
    empty text maps to the zero vector, non-empty to unit norm."""
    texts = ["int a = 1;", "", "public void run()", "int a = 1;"]
    batch = provider.embed_batch(texts)
    assert batch.shape == (4, EMBEDDING_DIM)
    again = provider.embed_batch(texts)
    np.testing.assert_array_equal(batch, again)
    np.testing.assert_array_equal(batch[0], batch[3])  # order-preserving
    np.testing.assert_array_equal(batch[1], np.zeros(EMBEDDING_DIM))
    for row in (0, 2):
        assert abs(np.linalg.norm(batch[row]) - 1.0) < 1e-9
    single = provider.embed(texts[0])
    np.testing.assert_array_equal(single, batch[0])


@pytest.fixture(scope="module")
def live_server(encoder):
    config = uvicorn.Config(
        create_app(encoder), host="127.0.0.1", port=0, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10.0
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("sidecar did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


def test_criterion_12_sidecar_contract(live_server):
    try:
        remote = RemoteEmbeddingProvider(live_server, max_tokens=64)

        # /embed: 768-length, order-preserving, deterministic across
        # repeated identical requests
        texts = ["one", "two", "three"]
        first = remote.embed_batch(texts)
        second = remote.embed_batch(texts)
        assert first.shape == (3, 768)
        np.testing.assert_array_equal(first, second)
        for i, text in enumerate(texts):
            np.testing.assert_array_equal(remote.embed(text), first[i])

        # the same provider suite passes for both implementations
        provider_contract_checks(remote)
        provider_contract_checks(HashedEmbeddingProvider())
    except Exception:
        print("criterion 12: FAIL  sidecar serves the remote provider contract")
        raise
    print("criterion 12: PASS  sidecar serves the remote provider contract")


def test_concurrent_requests_are_consistent(live_server):
    remote = RemoteEmbeddingProvider(live_server)
    expected = remote.embed("shared text")
    results = [None] * 8
    errors = []

    def work(slot):
        try:
            results[slot] = remote.embed("shared text")
        except Exception as exc:  # surfaced below
            errors.append(exc)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    for row in results:
        np.testing.assert_array_equal(row, expected)
