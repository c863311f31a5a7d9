"""HTTP front end for the frozen encoder.

    POST /embed    {"texts": [...], "max_tokens": n} -> {"vectors": [...]}
    GET  /healthz  {"status": "ok", "model": ..., "dimension": 768}

Vectors come back in input order. The encoder never changes between
requests, so byte-identical request bodies produce byte-identical
response bodies. A missing model yields 503; a batch over the limit
yields 413.
"""

from __future__ import annotations

import argparse
import os

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .encoder import EMBED_DIM, FrozenEncoder

DEFAULT_MAX_BATCH = 256


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)
    max_tokens: int = Field(default=512, ge=1)


def create_app(
    encoder: FrozenEncoder | None = None,
    max_batch: int = DEFAULT_MAX_BATCH,
    loaded: bool = True,
) -> FastAPI:
    """Build the application; ``loaded=False`` simulates a missing model."""
    app = FastAPI(title="embed-service")
    app.state.encoder = encoder if encoder is not None else (
        FrozenEncoder() if loaded else None
    )
    app.state.max_batch = max_batch

    @app.get("/healthz")
    def healthz():
        if app.state.encoder is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return {
            "status": "ok",
            "model": app.state.encoder.name,
            "dimension": EMBED_DIM,
        }

    @app.post("/embed")
    def embed(request: EmbedRequest):
        if app.state.encoder is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        if len(request.texts) > app.state.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.texts)} exceeds limit "
                       f"{app.state.max_batch}",
            )
        vectors = app.state.encoder.encode_batch(request.texts, request.max_tokens)
        return {"vectors": [v.tolist() for v in vectors]}

    return app


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="embed-service",
        description="Serve frozen text embeddings over HTTP",
    )
    parser.add_argument(
        "--host", default=os.environ.get("EMBED_SERVICE_HOST", "127.0.0.1")
    )
    parser.add_argument(
        "--port", type=int,
        default=int(os.environ.get("EMBED_SERVICE_PORT", "8763")),
    )
    parser.add_argument(
        "--model-name",
        default=os.environ.get("EMBED_SERVICE_MODEL", "frozen-mini-768"),
    )
    parser.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH)
    args = parser.parse_args(argv)

    import uvicorn

    app = create_app(FrozenEncoder(name=args.model_name), max_batch=args.max_batch)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()
