"""FastAPI application speaking the shared wire protocol.

Endpoints:

* ``GET /health`` -> ``{"model": str, "dim": int}``
* ``POST /api``   -> dispatch on ``{"op": ..., "items": [...]}``:
  ``embed_text`` and ``embed_frames`` return ``{"dim", "vectors"}`` with
  unit-norm rows; ``match`` returns ``{"dim", "scores"}``.  Errors come
  back as ``{"error", "message"}`` with a 4xx status.

The service is stateless: identical requests produce identical
responses across restarts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .encoder import load_encoder


@dataclass(frozen=True)
class ServerConfig:
    model: str = "lexical-hash-v1"
    host: str = "127.0.0.1"
    port: int = 8765
    batch_limit: int = 256
    dim: int = 256
    device: str = "cpu"  # honored by torch-backed encoders, ignored otherwise

    def __post_init__(self):
        if self.batch_limit < 1:
            raise ValueError("batch_limit must be >= 1")


def _error(code: str, message: str, status: int = 400) -> JSONResponse:
    return JSONResponse({"error": code, "message": message}, status_code=status)


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    encoder = load_encoder(config.model, dim=config.dim)
    app = FastAPI(title="refrain model server")

    @app.get("/health")
    def health():
        return {"model": config.model, "dim": encoder.dim}

    @app.post("/api")
    async def api(request: dict):
        op = request.get("op")
        items = request.get("items")
        if not isinstance(items, list) or not items:
            return _error("bad_request", "'items' must be a non-empty list")
        if len(items) > config.batch_limit:
            return _error("batch_too_large",
                          f"{len(items)} items exceeds limit {config.batch_limit}")

        if op == "embed_text":
            if not all(isinstance(i, str) for i in items):
                return _error("bad_request", "embed_text items must be strings")
            vectors = [encoder.embed_text(i).tolist() for i in items]
            return {"dim": encoder.dim, "vectors": vectors}

        if op == "embed_frames":
            if not all(isinstance(i, str) for i in items):
                return _error("bad_request", "embed_frames items must be strings")
            vectors = [encoder.embed_frame(i).tolist() for i in items]
            return {"dim": encoder.dim, "vectors": vectors}

        if op == "match":
            scores = []
            for item in items:
                if (not isinstance(item, dict) or "text" not in item
                        or "frames" not in item):
                    return _error("bad_request",
                                  "match items need 'text' and 'frames'")
                frames = np.asarray(item["frames"], dtype=np.float64)
                if frames.ndim != 2 or frames.shape[0] == 0:
                    return _error("bad_request",
                                  "'frames' must be a non-empty matrix")
                scores.append(encoder.match(str(item["text"]), frames))
            return {"dim": encoder.dim, "scores": scores}

        return _error("bad_op", f"unknown op {op!r}")

    return app
