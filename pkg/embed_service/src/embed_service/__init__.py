"""Embedding sidecar: a frozen text encoder behind a small HTTP API."""

from .encoder import EMBED_DIM, FrozenEncoder
from .service import EmbedRequest, create_app

__all__ = ["EMBED_DIM", "FrozenEncoder", "EmbedRequest", "create_app"]
