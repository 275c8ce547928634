"""FastAPI application implementing the provider protocol:

    POST /v1/logprobs    {"texts": [...], "model": "..."}
    POST /v1/embeddings  {"texts": [...]}
    POST /v1/lexsub      {"word","sentence","pos","mode","top_n"}
    GET  /healthz

Backends load at startup; a load failure propagates so the process exits
nonzero. Inference per backend is serialized with a lock (protocol is
stateless, requests are independent).
"""

from __future__ import annotations

import threading
from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import STUB_MODEL_ID, BridgeConfig
from .stub import StubEmbedder, StubLanguageModel, StubLexsub


class LogProbsRequest(BaseModel):
    texts: list[str]
    model: str | None = None


class EmbeddingsRequest(BaseModel):
    texts: list[str]


class LexsubRequest(BaseModel):
    word: str
    sentence: str
    pos: int
    mode: Literal["concat", "dropout"] = "concat"
    top_n: int = Field(default=10, ge=1, le=100)


def _load_backends(config: BridgeConfig):
    if config.lm_model_id == STUB_MODEL_ID:
        lm = StubLanguageModel()
    else:
        from .models import CausalLMBackend

        lm = CausalLMBackend(config.lm_model_id, config.device)
    if config.embed_model_id == STUB_MODEL_ID:
        embedder = StubEmbedder()
    else:
        from .models import EmbeddingBackend

        embedder = EmbeddingBackend(config.embed_model_id, config.device)
    if config.lexsub_model_id == STUB_MODEL_ID:
        lexsub = StubLexsub()
    else:
        from .models import MaskedLexsubBackend

        lexsub = MaskedLexsubBackend(config.lexsub_model_id, config.device)
    return lm, embedder, lexsub


def _oom_guard(exc: Exception) -> HTTPException:
    if type(exc).__name__ == "OutOfMemoryError":
        return HTTPException(
            status_code=503, detail="model out of memory",
            headers={"Retry-After": "5"},
        )
    raise exc


def create_app(config: BridgeConfig | None = None) -> FastAPI:
    config = config or BridgeConfig()
    lm, embedder, lexsub = _load_backends(config)
    lm_lock = threading.Lock()
    embed_lock = threading.Lock()
    lexsub_lock = threading.Lock()

    app = FastAPI(title="leximark-bridge")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/logprobs")
    def logprobs(req: LogProbsRequest):
        if not req.texts:
            raise HTTPException(400, "texts must be non-empty")
        results = []
        for text in req.texts:
            if not text:
                raise HTTPException(400, "empty input")
            try:
                with lm_lock:
                    tokens, truncated = lm.token_records(text, config.max_length)
            except Exception as exc:  # pragma: no cover - OOM path
                raise _oom_guard(exc)
            results.append({"tokens": tokens, "truncated": truncated})
        return {"results": results}

    @app.post("/v1/embeddings")
    def embeddings(req: EmbeddingsRequest):
        if not req.texts:
            raise HTTPException(400, "texts must be non-empty")
        if any(not t for t in req.texts):
            raise HTTPException(400, "empty input")
        try:
            with embed_lock:
                vectors = embedder.embed(req.texts)
        except Exception as exc:  # pragma: no cover - OOM path
            raise _oom_guard(exc)
        return {"vectors": vectors, "dim": len(vectors[0]) if vectors else 0}

    @app.post("/v1/lexsub")
    def lexsub_endpoint(req: LexsubRequest):
        n_words = len(req.sentence.split())
        if not (0 <= req.pos < n_words):
            raise HTTPException(
                400, f"pos {req.pos} outside sentence of {n_words} words"
            )
        try:
            with lexsub_lock:
                candidates = lexsub.candidates(
                    req.word, req.sentence, req.pos, req.mode, req.top_n
                )
        except IndexError as exc:
            raise HTTPException(400, str(exc)) from None
        except Exception as exc:  # pragma: no cover - OOM path
            raise _oom_guard(exc)
        return {"candidates": candidates}

    return app
