"""Hierarchical memory store with vector retrieval and crash-safe snapshots.

Layers: Sensory (transient intake), Working (bounded active set), LongTerm
(persistent, capacity-managed). Batch ingestion scores, classifies, and
consolidates records, then runs the safety purge and, past the capacity
target, a prune cycle. Retrieval is an exact linear-scan cosine top-k over
the long-term layer.

Concurrency: many readers or one writer; writers acquire in FIFO order.
Public methods lock internally, so one store instance can back a service.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import forgetting as engine
from .audit import AuditLog
from .embedding import embed
from .errors import (
    BackpressureError,
    BatchTooLargeError,
    CorruptSnapshotError,
    IllegalTransitionError,
    MalformedRecordError,
)
from .forgetting import ForgetDecision, ForgetPolicy, PruneOutcome
from .model import (
    MS_PER_SECOND,
    NORM_TOLERANCE,
    Layer,
    MemoryRecord,
    PolicyConfig,
    RecordDraft,
    ReinforcementSignal,
    ScoreBreakdown,
    config_from_dict,
    config_to_dict,
    record_from_dict,
    record_to_dict,
    require_valid,
)
from .rules import RuleBundle, default_rules
from .scoring import (
    aggregate_importance,
    classify_security,
    decay_rate_for,
    score_bve,
    score_cqa,
    score_trs,
)

SNAPSHOT_FORMAT = "fsfm-snapshot"
SNAPSHOT_VERSION = 1

#: Rough per-record bookkeeping overhead for the memory estimate.
_RECORD_OVERHEAD_BYTES = 64


class RWLock:
    """Readers-writer lock: many readers or one writer, FIFO writers.

    New readers wait while any writer is queued, so writers cannot starve.
    """

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers = 0
        self._writer_active = False
        self._next_ticket = 0
        self._next_served = 0

    @contextmanager
    def read(self):
        with self._cond:
            while self._writer_active or self._next_ticket != self._next_served:
                self._cond.wait()
            self._readers += 1
        try:
            yield
        finally:
            with self._cond:
                self._readers -= 1
                if self._readers == 0:
                    self._cond.notify_all()

    @contextmanager
    def write(self):
        with self._cond:
            ticket = self._next_ticket
            self._next_ticket += 1
            while self._writer_active or self._readers or ticket != self._next_served:
                self._cond.wait()
            self._writer_active = True
        try:
            yield
        finally:
            with self._cond:
                self._writer_active = False
                self._next_served += 1
                self._cond.notify_all()


@dataclass(frozen=True)
class QueryResult:
    """Top-k hits sorted by similarity descending (ties by id ascending)."""

    hits: tuple[tuple[str, float], ...]
    latency_ns: int


@dataclass(frozen=True)
class StoreStats:
    counts: dict[str, int]
    capacity_fraction: float
    bytes_estimate: int

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class StoreSnapshot:
    """Metadata of one persisted snapshot."""

    counts: dict[str, int]
    config_digest: str
    created_at: float  # seconds since epoch
    sequence: int
    record_count: int


@dataclass
class IngestReport:
    accepted: int = 0
    purged: int = 0
    pruned: int = 0
    rejected: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)

    def to_dict(self) -> dict[str, int]:
        return {"accepted": self.accepted, "purged": self.purged, "pruned": self.pruned}


def _config_digest(config: PolicyConfig) -> str:
    doc = json.dumps(config_to_dict(config), sort_keys=True).encode("utf-8")
    return hashlib.sha256(doc).hexdigest()


class MemoryStore:
    def __init__(
        self,
        config: PolicyConfig,
        *,
        audit: Optional[AuditLog] = None,
        rules: Optional[RuleBundle] = None,
    ):
        require_valid(config)
        self.config = config
        self.rules = rules or default_rules()
        self.audit = audit if audit is not None else AuditLog()
        self.forgetting_enabled = config.forgetting_enabled
        self._lock = RWLock()
        self._layers: dict[Layer, dict[str, MemoryRecord]] = {
            Layer.SENSORY: {},
            Layer.WORKING: {},
            Layer.LONG_TERM: {},
        }
        self._sequence = 0
        self._ingest_counter = 0
        self._index_mutex = threading.Lock()
        self._index_dirty = True
        self._index_ids: list[str] = []
        self._index_matrix: np.ndarray = np.empty((0, config.embedding_dim))
        # id -> float64 row, reused across index rebuilds to avoid re-converting
        # tuple embeddings; rebuilt alongside the matrix so it never grows stale.
        self._vector_rows: dict[str, np.ndarray] = {}

    # -- intake ------------------------------------------------------------

    def _generate_id(self, draft: RecordDraft, created_at: int) -> str:
        self._ingest_counter += 1
        digest = hashlib.blake2b(
            f"{created_at}\x1f{draft.content}".encode("utf-8"), digest_size=6
        ).hexdigest()
        return f"m{self._ingest_counter:08d}-{digest}"

    def _complete_draft(self, draft: RecordDraft, now: int, layer: Layer) -> MemoryRecord:
        if not isinstance(draft.content, str) or not draft.content.strip():
            raise MalformedRecordError("record content is empty")
        created_at = draft.created_at if draft.created_at is not None else now
        last_accessed_at = (
            draft.last_accessed_at if draft.last_accessed_at is not None else created_at
        )
        if last_accessed_at < created_at:
            raise MalformedRecordError(
                f"last_accessed_at {last_accessed_at} precedes created_at {created_at}"
            )
        if now < last_accessed_at:
            raise MalformedRecordError(f"record from the future: last access {last_accessed_at} > now {now}")
        if draft.usage_frequency < 0:
            raise MalformedRecordError(f"negative usage_frequency {draft.usage_frequency}")
        usage = max(1, draft.usage_frequency)  # ingestion counts as the first access

        if draft.embedding is not None:
            as_array = np.asarray(draft.embedding, dtype=np.float64)
            if as_array.shape != (self.config.embedding_dim,):
                raise MalformedRecordError(
                    f"embedding dim {as_array.shape} != configured {self.config.embedding_dim}"
                )
            if abs(float(np.linalg.norm(as_array)) - 1.0) > NORM_TOLERANCE:
                raise MalformedRecordError("embedding is not unit-normalized")
            vector = tuple(as_array.tolist())
        else:
            vector = embed(draft.content, self.config.embedding_dim, self.config.rng_seed)

        hint, src = classify_security(draft.content, self.rules)
        category = hint if hint is not None else draft.category

        record_id = draft.id if draft.id is not None else self._generate_id(draft, created_at)
        if self._find_unlocked(record_id) is not None:
            raise MalformedRecordError(f"duplicate record id {record_id!r}")

        # Single scoring pass, equivalent to score_record on the final record
        # (the security classification above is reused rather than re-run).
        cqa = score_cqa(draft.content, self.rules)
        bve = score_bve(draft.tool_tag)
        trs = score_trs(last_accessed_at, now, usage, decay_rate_for(category, self.config))
        importance = aggregate_importance(cqa, bve, trs, src, self.config.weights)

        return MemoryRecord(
            id=record_id,
            content=draft.content,
            embedding=vector,
            category=category,
            tool_tag=draft.tool_tag,
            created_at=created_at,
            last_accessed_at=last_accessed_at,
            usage_frequency=usage,
            layer=layer,
            score=ScoreBreakdown(cqa=cqa, bve=bve, trs=trs, src=src, importance=importance),
            user_id=draft.user_id,
        )

    def ingest_batch(self, drafts: Sequence[RecordDraft], now: int) -> IngestReport:
        """Score, classify, and consolidate one batch, then purge and prune.

        The batch is attended input, so accepted records consolidate straight
        into the long-term layer; the sensory/working rules govern the
        record-at-a-time add/promote path. Malformed drafts are skipped and
        reported, the rest of the batch proceeds.
        """
        with self._lock.write():
            if len(drafts) > self.config.batch_size:
                raise BatchTooLargeError(
                    f"batch of {len(drafts)} exceeds batch_size {self.config.batch_size}"
                )
            self._check_watermark_unlocked(now)

            report = IngestReport()
            long_term = self._layers[Layer.LONG_TERM]
            for index, draft in enumerate(drafts):
                try:
                    record = self._complete_draft(draft, now, Layer.LONG_TERM)
                except MalformedRecordError as exc:
                    report.rejected += 1
                    report.errors.append((index, str(exc)))
                    continue
                long_term[record.id] = record
                report.accepted += 1
            self._index_dirty = True

            if self.forgetting_enabled:
                report.purged = len(self._safety_purge_unlocked(now))
                if len(long_term) > engine.retain_limit_for(self.config):
                    outcome = self._capacity_prune_unlocked(now)
                    report.pruned = len(outcome.forgotten)
            return report

    def add(self, draft: RecordDraft, now: int) -> MemoryRecord:
        """Place a single record into the sensory layer (interactive intake)."""
        with self._lock.write():
            record = self._complete_draft(draft, now, Layer.SENSORY)
            self._layers[Layer.SENSORY][record.id] = record
            return record

    @classmethod
    def from_records(
        cls,
        config: PolicyConfig,
        records: Sequence[MemoryRecord],
        *,
        audit: Optional[AuditLog] = None,
        rules: Optional[RuleBundle] = None,
    ) -> "MemoryStore":
        """Build a store holding already-complete records in the long-term layer."""
        store = cls(config, audit=audit, rules=rules)
        long_term = store._layers[Layer.LONG_TERM]
        for record in records:
            long_term[record.id] = record.with_layer(Layer.LONG_TERM)
        store._index_dirty = True
        return store

    # -- layer transitions ---------------------------------------------------

    def promote(self, record_id: str, to_layer: Layer, now: int) -> Optional[MemoryRecord]:
        """Move a record up one layer, applying the TTL and consolidation rules.

        Returns the updated record, or None when the rules dropped it instead
        (an audit decision is written for every drop).
        """
        with self._lock.write():
            found = self._find_unlocked(record_id)
            if found is None:
                raise KeyError(f"unknown record id {record_id!r}")
            current, record = found
            if (current, to_layer) == (Layer.SENSORY, Layer.WORKING):
                return self._promote_to_working_unlocked(record, now)
            if (current, to_layer) == (Layer.WORKING, Layer.LONG_TERM):
                return self._consolidate_unlocked(record, now)
            raise IllegalTransitionError(f"cannot promote {current.value} -> {to_layer.value}")

    def _promote_to_working_unlocked(self, record: MemoryRecord, now: int) -> Optional[MemoryRecord]:
        ttl_ms = self.config.sensory_ttl_seconds * MS_PER_SECOND
        if now - record.created_at > ttl_ms:
            self._drop_unlocked(record, now, ForgetPolicy.PASSIVE_DECAY, "sensory-ttl-expired")
            return None
        del self._layers[Layer.SENSORY][record.id]
        updated = record.with_layer(Layer.WORKING)
        working = self._layers[Layer.WORKING]
        working[updated.id] = updated
        if len(working) > self.config.working_capacity:
            victim = min(working.values(), key=lambda r: (r.score.importance, r.created_at, r.id))
            self._consolidate_unlocked(victim, now)
        return self._find_record_unlocked(updated.id)

    def _consolidate_unlocked(self, record: MemoryRecord, now: int) -> Optional[MemoryRecord]:
        """Task-completion exit from the working layer: keep or clear."""
        if record.score.importance < self.config.consolidation_threshold:
            self._drop_unlocked(record, now, ForgetPolicy.PASSIVE_DECAY, "consolidation-threshold")
            return None
        del self._layers[Layer.WORKING][record.id]
        updated = record.with_layer(Layer.LONG_TERM)
        self._layers[Layer.LONG_TERM][updated.id] = updated
        self._index_dirty = True
        if self.forgetting_enabled and len(self._layers[Layer.LONG_TERM]) > engine.retain_limit_for(self.config):
            self._capacity_prune_unlocked(now)
        return self._find_record_unlocked(updated.id)

    def _drop_unlocked(
        self, record: MemoryRecord, now: int, policy: ForgetPolicy, reason: str
    ) -> ForgetDecision:
        del self._layers[record.layer][record.id]
        if record.layer is Layer.LONG_TERM:
            self._index_dirty = True
        decision = ForgetDecision(
            record_id=record.id,
            policy=policy,
            importance_at_decision=record.score.importance,
            decided_at=now,
            reason=reason,
        )
        self.audit.append(decision)
        return decision

    def sweep_sensory(self, now: int) -> list[ForgetDecision]:
        """Drop every sensory record past its TTL (passive decay)."""
        with self._lock.write():
            ttl_ms = self.config.sensory_ttl_seconds * MS_PER_SECOND
            expired = [
                r for r in self._layers[Layer.SENSORY].values() if now - r.created_at > ttl_ms
            ]
            return [
                self._drop_unlocked(r, now, ForgetPolicy.PASSIVE_DECAY, "sensory-ttl-expired")
                for r in expired
            ]

    # -- forgetting ----------------------------------------------------------

    def safety_purge(self, now: int) -> list[ForgetDecision]:
        with self._lock.write():
            return self._safety_purge_unlocked(now)

    def _safety_purge_unlocked(self, now: int) -> list[ForgetDecision]:
        view = [r for layer in self._layers.values() for r in layer.values()]
        decisions = engine.safety_purge(view, now)
        for decision in decisions:
            found = self._find_unlocked(decision.record_id)
            if found is not None:
                layer, record = found
                del self._layers[layer][record.id]
                if layer is Layer.LONG_TERM:
                    self._index_dirty = True
        self.audit.extend(decisions)
        return decisions

    def capacity_prune(self, now: int) -> PruneOutcome:
        with self._lock.write():
            return self._capacity_prune_unlocked(now)

    def _capacity_prune_unlocked(self, now: int) -> PruneOutcome:
        view = list(self._layers[Layer.LONG_TERM].values())
        outcome = engine.capacity_prune(view, self.config, now, self.rules)
        if outcome.forgotten:
            self._layers[Layer.LONG_TERM] = {r.id: r for r in outcome.retained}
            self._index_dirty = True
            self.audit.extend(outcome.forgotten)
        return outcome

    def user_requested_delete(self, user_id: str, now: int) -> list[ForgetDecision]:
        with self._lock.write():
            view = [r for layer in self._layers.values() for r in layer.values()]
            decisions = engine.user_requested_delete(view, user_id, now)
            for decision in decisions:
                found = self._find_unlocked(decision.record_id)
                if found is not None:
                    layer, record = found
                    del self._layers[layer][record.id]
                    if layer is Layer.LONG_TERM:
                        self._index_dirty = True
            self.audit.extend(decisions)
            return decisions

    def reinforce_record(
        self, record_id: str, signal: ReinforcementSignal, now: int
    ) -> MemoryRecord:
        with self._lock.write():
            found = self._find_unlocked(record_id)
            if found is None:
                raise KeyError(f"unknown record id {record_id!r}")
            layer, record = found
            updated = engine.reinforce(record, signal, self.config, now, self.rules)
            self._layers[layer][record_id] = updated
            return updated

    # -- retrieval -----------------------------------------------------------

    def query(
        self,
        text: Optional[str] = None,
        *,
        embedding: Optional[Sequence[float]] = None,
        k: int = 10,
    ) -> QueryResult:
        """Exact cosine top-k over the long-term layer.

        Accepts either query text (embedded with the store's configuration)
        or a precomputed unit vector. An empty store yields zero hits.
        """
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if (text is None) == (embedding is None):
            raise ValueError("provide exactly one of text or embedding")
        started = time.perf_counter_ns()
        with self._lock.read():
            ids, matrix = self._index_unlocked()
            if len(ids) == 0:
                return QueryResult(hits=(), latency_ns=time.perf_counter_ns() - started)
            if embedding is not None:
                query_vec = np.asarray(embedding, dtype=np.float64)
                if query_vec.shape != (self.config.embedding_dim,):
                    raise ValueError(
                        f"embedding shape {query_vec.shape} != ({self.config.embedding_dim},)"
                    )
            else:
                query_vec = np.asarray(
                    embed(text, self.config.embedding_dim, self.config.rng_seed)
                )
            similarities = matrix @ query_vec
            top = min(k, len(ids))
            # ids are sorted ascending, so a stable sort on descending
            # similarity breaks ties by id for free.
            if top >= len(ids):
                order = np.argsort(-similarities, kind="stable")
            else:
                kth_value = np.partition(similarities, len(ids) - top)[len(ids) - top]
                candidates = np.flatnonzero(similarities >= kth_value)
                order = candidates[np.argsort(-similarities[candidates], kind="stable")][:top]
            hits = tuple((ids[i], float(similarities[i])) for i in order)
        return QueryResult(hits=hits, latency_ns=time.perf_counter_ns() - started)

    def _index_unlocked(self) -> tuple[list[str], np.ndarray]:
        with self._index_mutex:
            if self._index_dirty:
                long_term = self._layers[Layer.LONG_TERM]
                ids = sorted(long_term)
                old_rows = self._vector_rows
                rows: dict[str, np.ndarray] = {}
                stacked: list[np.ndarray] = []
                for record_id in ids:
                    row = old_rows.get(record_id)
                    if row is None:
                        row = np.asarray(long_term[record_id].embedding, dtype=np.float64)
                    rows[record_id] = row
                    stacked.append(row)
                self._index_ids = ids
                self._index_matrix = (
                    np.vstack(stacked)
                    if stacked
                    else np.empty((0, self.config.embedding_dim), dtype=np.float64)
                )
                self._vector_rows = rows
                self._index_dirty = False
            return self._index_ids, self._index_matrix

    # -- introspection ---------------------------------------------------------

    def records(self, layer: Optional[Layer] = None) -> list[MemoryRecord]:
        with self._lock.read():
            if layer is not None:
                return list(self._layers[layer].values())
            return [r for records in self._layers.values() for r in records.values()]

    def count(self, layer: Optional[Layer] = None) -> int:
        with self._lock.read():
            if layer is not None:
                return len(self._layers[layer])
            return sum(len(records) for records in self._layers.values())

    def get(self, record_id: str) -> Optional[MemoryRecord]:
        with self._lock.read():
            found = self._find_unlocked(record_id)
            return found[1] if found else None

    def usage_stats(self) -> StoreStats:
        with self._lock.read():
            counts = {layer.value: len(records) for layer, records in self._layers.items()}
            return StoreStats(
                counts=counts,
                capacity_fraction=len(self._layers[Layer.LONG_TERM]) / self.config.capacity,
                bytes_estimate=self._bytes_estimate_unlocked(),
            )

    def _bytes_estimate_unlocked(self) -> int:
        total = 0
        vector_bytes = self.config.embedding_dim * 8
        for records in self._layers.values():
            for record in records.values():
                total += len(record.content.encode("utf-8")) + vector_bytes + _RECORD_OVERHEAD_BYTES
        return total

    def _check_watermark_unlocked(self, now: int) -> None:
        watermark = self.config.memory_watermark_bytes
        if watermark is None:
            return
        if self._bytes_estimate_unlocked() <= watermark:
            return
        if self.forgetting_enabled:
            self._capacity_prune_unlocked(now)
            if self._bytes_estimate_unlocked() <= watermark:
                return
        raise BackpressureError(
            f"memory estimate exceeds watermark of {watermark} bytes; prune before ingesting"
        )

    def _find_unlocked(self, record_id: str) -> Optional[tuple[Layer, MemoryRecord]]:
        for layer, records in self._layers.items():
            record = records.get(record_id)
            if record is not None:
                return layer, record
        return None

    def _find_record_unlocked(self, record_id: str) -> Optional[MemoryRecord]:
        found = self._find_unlocked(record_id)
        return found[1] if found else None

    # -- persistence -----------------------------------------------------------

    def checkpoint(self, path, now: Optional[int] = None) -> StoreSnapshot:
        """Write the full store state to one digest-verified file, atomically."""
        path = Path(path)
        created_at = (now if now is not None else round(time.time() * 1000)) / MS_PER_SECOND
        with self._lock.write():
            self._sequence += 1
            records = [r for records in self._layers.values() for r in records.values()]
            records.sort(key=lambda r: (r.layer.value, r.id))
            body = "".join(
                json.dumps(record_to_dict(r), ensure_ascii=False) + "\n" for r in records
            )
            body_bytes = body.encode("utf-8")
            header = {
                "format": SNAPSHOT_FORMAT,
                "version": SNAPSHOT_VERSION,
                "sequence": self._sequence,
                "created_at": created_at,
                "config": config_to_dict(self.config),
                "config_digest": _config_digest(self.config),
                "record_count": len(records),
                "content_digest": hashlib.sha256(body_bytes).hexdigest(),
                "ingest_counter": self._ingest_counter,
            }
            payload = json.dumps(header, ensure_ascii=False) + "\n" + body

            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(payload)
                os.replace(tmp_name, path)
            except BaseException:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
                raise
            return StoreSnapshot(
                counts={layer.value: len(records) for layer, records in self._layers.items()},
                config_digest=header["config_digest"],
                created_at=created_at,
                sequence=self._sequence,
                record_count=len(records),
            )

    @classmethod
    def restore(
        cls,
        path,
        *,
        audit: Optional[AuditLog] = None,
        rules: Optional[RuleBundle] = None,
    ) -> "MemoryStore":
        """Rebuild the exact store state from a snapshot file."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CorruptSnapshotError(f"cannot read snapshot {path}: {exc}") from exc
        newline = text.find("\n")
        if newline < 0:
            raise CorruptSnapshotError("snapshot has no header line")
        header_line, body = text[:newline], text[newline + 1 :]
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise CorruptSnapshotError(f"bad snapshot header: {exc}") from exc
        if header.get("format") != SNAPSHOT_FORMAT or header.get("version") != SNAPSHOT_VERSION:
            raise CorruptSnapshotError(f"unrecognized snapshot format: {header.get('format')!r}")

        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        if digest != header.get("content_digest"):
            raise CorruptSnapshotError("snapshot content digest mismatch (truncated or edited file)")

        try:
            config = config_from_dict(header["config"])
        except Exception as exc:
            raise CorruptSnapshotError(f"bad snapshot config: {exc}") from exc

        store = cls(config, audit=audit, rules=rules)
        store._sequence = int(header.get("sequence", 0))
        store._ingest_counter = int(header.get("ingest_counter", 0))
        count = 0
        for line in body.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                record = record_from_dict(json.loads(line))
            except (json.JSONDecodeError, MalformedRecordError) as exc:
                raise CorruptSnapshotError(f"bad snapshot record: {exc}") from exc
            store._layers[record.layer][record.id] = record
            count += 1
        if count != header.get("record_count"):
            raise CorruptSnapshotError(
                f"snapshot record count {count} != declared {header.get('record_count')}"
            )
        store._index_dirty = True
        return store

    @property
    def sequence(self) -> int:
        return self._sequence
