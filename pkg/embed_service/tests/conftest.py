from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from embed_service import FrozenEncoder, create_app


@pytest.fixture(scope="session")
def encoder():
    return FrozenEncoder()


@pytest.fixture(scope="session")
def client(encoder):
    return TestClient(create_app(encoder))
