"""HTTP prediction service for live threads and draft comments.

Endpoints: POST /v1/predict and GET /v1/health.  The service loads one
checkpoint at startup; inference is stateless between requests and never
mutates the model.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import embed, regressor
from .errors import EmptyRequest, ModelNotLoaded
from .threadsel import SEQ_CAP
from .tone import RuleBasedToneScorer


class MessageIn(BaseModel):
    text: str
    author: str
    created_utc: int = 0


class DraftIn(BaseModel):
    text: str


class PredictRequest(BaseModel):
    messages: list[MessageIn]
    post_author: str
    draft: DraftIn | None = None
    draft_as_author: bool = False


class PredictResponse(BaseModel):
    predicted_emt: float = Field(ge=-1.0, le=1.0)
    per_message_emt: list[float]
    model_id: str
    latency_ms: float
    truncated: bool = False


class ModelService:
    """Checkpoint, tone scorer, and embedding provider behind the endpoints."""

    def __init__(
        self,
        checkpoint: str | Path | None = None,
        provider_name: str = "hash",
        cache_path: str | Path | None = None,
        seed: int = 0,
    ):
        self.started_at = time.time()
        self.scorer = RuleBasedToneScorer()
        self.degraded_reason: str | None = None
        self.params = None
        self.config = None
        self.model_id = ""
        try:
            self.provider = embed.get_provider(provider_name, seed=seed)
        except Exception as exc:
            self.provider = None
            self.degraded_reason = f"embedding provider unavailable: {exc}"
        self.cache = embed.EmbeddingCache(cache_path) if cache_path else None
        if checkpoint is not None:
            try:
                self.params, self.config, header = regressor.load_checkpoint(checkpoint)
                self.model_id = header["model_id"]
            except (OSError, ValueError) as exc:
                self.degraded_reason = f"checkpoint rejected: {exc}"

    @property
    def ready(self) -> bool:
        return self.params is not None and self.provider is not None

    def predict(self, req: PredictRequest) -> PredictResponse:
        start = time.perf_counter()
        if not self.ready:
            raise ModelNotLoaded(self.degraded_reason or "no checkpoint loaded")
        if not req.messages:
            raise EmptyRequest("at least one message is required")

        texts = [m.text for m in req.messages]
        flags = [m.author == req.post_author for m in req.messages]
        if req.draft is not None:
            texts.append(req.draft.text)
            flags.append(req.draft_as_author)
        truncated = len(texts) > SEQ_CAP
        if truncated:
            texts, flags = texts[:SEQ_CAP], flags[:SEQ_CAP]

        tones = [self.scorer.score_text(t).compound for t in texts]
        raw = embed.message_features(texts, tones, flags, self.provider, self.cache)
        yhat, _ = regressor.forward(
            self.params, self.config, raw[None, :, :], np.array([len(texts)])
        )
        predicted = float(np.clip(yhat[0], -1.0, 1.0))
        latency_ms = (time.perf_counter() - start) * 1000.0
        return PredictResponse(
            predicted_emt=predicted,
            per_message_emt=tones,
            model_id=self.model_id,
            latency_ms=latency_ms,
            truncated=truncated,
        )

    def health(self) -> dict:
        status = "ok" if self.ready else "degraded"
        out = {
            "status": status,
            "model_id": self.model_id,
            "lexicon_checksum": self.scorer.lexicon_checksum,
            "provider_id": self.provider.provider_id if self.provider else None,
            "uptime_s": round(time.time() - self.started_at, 3),
        }
        if status == "degraded":
            out["reason"] = self.degraded_reason or "no checkpoint loaded"
        return out


def create_app(
    checkpoint: str | Path | None = None,
    provider_name: str = "hash",
    cache_path: str | Path | None = None,
    seed: int = 0,
) -> FastAPI:
    service = ModelService(checkpoint, provider_name, cache_path, seed)
    app = FastAPI(title="toneshift", version="1")
    app.state.service = service

    @app.post("/v1/predict", response_model=PredictResponse)
    def predict(req: PredictRequest) -> PredictResponse:
        try:
            return service.predict(req)
        except ModelNotLoaded as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        except EmptyRequest as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/v1/health")
    def health() -> dict:
        return service.health()

    return app
