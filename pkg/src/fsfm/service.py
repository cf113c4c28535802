"""HTTP service wrapping a memory store.

One store instance backs the app; the store's readers-writer lock makes the
endpoints safe under concurrent requests. Configure a served store with the
FSFM_STORE (snapshot path) and FSFM_CONFIG (config JSON) environment
variables, or build an app around an existing store with create_app().

Run with: uvicorn fsfm.service:app
"""

from __future__ import annotations

import os
import time
from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .audit import AuditLog
from .errors import FsfmError, MalformedRecordError
from .model import Category, Layer, PolicyConfig, RecordDraft, ToolTag, load_config, seconds_to_ms
from .store import MemoryStore


class RecordIn(BaseModel):
    content: str
    category: Category = Category.GENERAL
    tool_tag: ToolTag = ToolTag.UNKNOWN
    id: Optional[str] = None
    embedding: Optional[list[float]] = None
    created_at: Optional[float] = None  # seconds since epoch
    last_accessed_at: Optional[float] = None
    usage_frequency: int = Field(default=1, ge=0)
    user_id: Optional[str] = None

    def to_draft(self) -> RecordDraft:
        return RecordDraft(
            content=self.content,
            category=self.category,
            tool_tag=self.tool_tag,
            id=self.id,
            embedding=tuple(self.embedding) if self.embedding is not None else None,
            created_at=seconds_to_ms(self.created_at) if self.created_at is not None else None,
            last_accessed_at=(
                seconds_to_ms(self.last_accessed_at) if self.last_accessed_at is not None else None
            ),
            usage_frequency=self.usage_frequency,
            user_id=self.user_id,
        )


class IngestRequest(BaseModel):
    records: list[RecordIn]
    now: Optional[float] = None  # seconds since epoch


class IngestResponse(BaseModel):
    accepted: int
    purged: int
    pruned: int
    rejected: int


class QueryRequest(BaseModel):
    text: str
    k: int = Field(default=10, ge=1)


class Hit(BaseModel):
    id: str
    similarity: float
    category: str


class QueryResponse(BaseModel):
    hits: list[Hit]
    latency_ns: int


class ForgetRequest(BaseModel):
    mode: Literal["user", "dangerous", "prune"]
    user_id: Optional[str] = None
    now: Optional[float] = None


class ForgetResponse(BaseModel):
    forgotten: int


class StatsResponse(BaseModel):
    sensory: int
    working: int
    long_term: int
    capacity_fraction: float
    bytes_estimate: int


class CheckpointResponse(BaseModel):
    path: str
    sequence: int


class HealthResponse(BaseModel):
    status: str
    version: str


def _now_ms(now_s: Optional[float]) -> int:
    return seconds_to_ms(now_s) if now_s is not None else round(time.time() * 1000)


def create_app(store: MemoryStore, store_path: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="fsfm", version=__version__)

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/ingest", response_model=IngestResponse)
    def ingest(request: IngestRequest) -> IngestResponse:
        now = _now_ms(request.now)
        drafts = [record.to_draft() for record in request.records]
        accepted = purged = pruned = rejected = 0
        step = store.config.batch_size
        try:
            for start in range(0, len(drafts), step):
                report = store.ingest_batch(drafts[start : start + step], now)
                accepted += report.accepted
                purged += report.purged
                pruned += report.pruned
                rejected += report.rejected
        except MalformedRecordError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except FsfmError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return IngestResponse(accepted=accepted, purged=purged, pruned=pruned, rejected=rejected)

    @app.post("/query", response_model=QueryResponse)
    def query(request: QueryRequest) -> QueryResponse:
        result = store.query(request.text, k=request.k)
        hits = []
        for record_id, similarity in result.hits:
            record = store.get(record_id)
            hits.append(
                Hit(
                    id=record_id,
                    similarity=similarity,
                    category=record.category.value if record is not None else "",
                )
            )
        return QueryResponse(hits=hits, latency_ns=result.latency_ns)

    @app.post("/forget", response_model=ForgetResponse)
    def forget(request: ForgetRequest) -> ForgetResponse:
        now = _now_ms(request.now)
        if request.mode == "user":
            if not request.user_id:
                raise HTTPException(status_code=422, detail="mode 'user' requires user_id")
            forgotten = len(store.user_requested_delete(request.user_id, now))
        elif request.mode == "dangerous":
            forgotten = len(store.safety_purge(now))
        else:
            forgotten = len(store.capacity_prune(now).forgotten)
        return ForgetResponse(forgotten=forgotten)

    @app.get("/stats", response_model=StatsResponse)
    def stats() -> StatsResponse:
        usage = store.usage_stats()
        return StatsResponse(
            sensory=usage.counts[Layer.SENSORY.value],
            working=usage.counts[Layer.WORKING.value],
            long_term=usage.counts[Layer.LONG_TERM.value],
            capacity_fraction=usage.capacity_fraction,
            bytes_estimate=usage.bytes_estimate,
        )

    @app.post("/checkpoint", response_model=CheckpointResponse)
    def checkpoint() -> CheckpointResponse:
        if store_path is None:
            raise HTTPException(status_code=400, detail="service has no snapshot path configured")
        snapshot = store.checkpoint(store_path)
        return CheckpointResponse(path=str(store_path), sequence=snapshot.sequence)

    return app


def create_app_from_env() -> FastAPI:
    """Build the served app from FSFM_STORE / FSFM_CONFIG."""
    store_path = os.environ.get("FSFM_STORE")
    config_path = os.environ.get("FSFM_CONFIG")
    if store_path and Path(store_path).exists():
        store = MemoryStore.restore(store_path, audit=AuditLog(Path(store_path + ".audit")))
    else:
        config = load_config(config_path) if config_path else PolicyConfig()
        audit = AuditLog(Path(store_path + ".audit")) if store_path else None
        store = MemoryStore(config, audit=audit)
    return create_app(store, Path(store_path) if store_path else None)


app = create_app_from_env()
