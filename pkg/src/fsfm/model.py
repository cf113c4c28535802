"""Core domain types: records, score breakdowns, policy configuration.

All types are immutable value objects. Timestamps are stored as integer
milliseconds since the epoch internally and exposed as seconds in file
formats; decay math works in days.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Any, Iterable, Iterator, Optional

import numpy as np

from .errors import InvalidConfigError, MalformedRecordError

MS_PER_SECOND = 1_000
MS_PER_DAY = 86_400_000

#: Tolerance for the unit-norm invariant on embeddings.
NORM_TOLERANCE = 1e-9


class Category(str, Enum):
    """Five-way content classification carried by every record."""

    IMPORTANT = "Important"
    MEDIUM = "Medium"
    GENERAL = "General"
    SENSITIVE = "Sensitive"
    DANGEROUS = "Dangerous"


class Layer(str, Enum):
    """Hierarchical store layers, from transient intake to persistent storage."""

    SENSORY = "Sensory"
    WORKING = "Working"
    LONG_TERM = "LongTerm"


class ToolTag(str, Enum):
    """Business-tool label attached to a record; drives the business-value score."""

    KNOWLEDGE_BASE_QA = "KnowledgeBaseQA"
    CUSTOMER_PROFILING = "CustomerProfiling"
    COMMUNITY_QUERY = "CommunityQuery"
    STANDARD_QUERY = "StandardQuery"
    PAGE_NAVIGATION = "PageNavigation"
    SIMPLE_LOOKUP = "SimpleLookup"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ScoreBreakdown:
    """The four dimension scores plus the aggregate importance.

    cqa: content quality, 0-3.
    bve: business value, 1-3.
    trs: temporal relevance, 0-2 (decayed, frequency-weighted).
    src: security risk penalty, one of {0, -2, -10}.
    importance: weighted aggregate; exactly -10 whenever src is -10.
    """

    cqa: float
    bve: float
    trs: float
    src: float
    importance: float


@dataclass(frozen=True)
class MemoryRecord:
    """One stored interaction, complete with embedding and score."""

    id: str
    content: str
    embedding: tuple[float, ...]
    category: Category
    tool_tag: ToolTag
    created_at: int  # ms since epoch
    last_accessed_at: int  # ms since epoch
    usage_frequency: int
    layer: Layer
    score: ScoreBreakdown
    user_id: Optional[str] = None

    def with_layer(self, layer: Layer) -> "MemoryRecord":
        return replace(self, layer=layer)


@dataclass
class RecordDraft:
    """A record as supplied by callers, before embedding and scoring.

    Missing fields are filled in at ingestion: the embedding is computed from
    the content, timestamps default to the ingestion time, and the id is
    generated deterministically from the store's ingest counter.
    """

    content: str
    category: Category = Category.GENERAL
    tool_tag: ToolTag = ToolTag.UNKNOWN
    id: Optional[str] = None
    embedding: Optional[tuple[float, ...]] = None
    created_at: Optional[int] = None  # ms since epoch
    last_accessed_at: Optional[int] = None  # ms since epoch
    usage_frequency: int = 1
    user_id: Optional[str] = None


@dataclass(frozen=True)
class ReinforcementSignal:
    """Caller-supplied feedback accompanying an access or reinforcement.

    The measurement of these signals is out of scope; they are accepted as
    already-normalized values.
    """

    user_feedback: float = 0.0  # [-1, 1]
    contextual_relevance: float = 0.0  # [0, 1]
    emotional_valence: float = 0.0  # [0, 1]
    social_consensus: float = 0.0  # [0, 1]
    security_compliance: bool = True

    def __post_init__(self) -> None:
        if not -1.0 <= self.user_feedback <= 1.0:
            raise ValueError(f"user_feedback outside [-1, 1]: {self.user_feedback}")
        for name in ("contextual_relevance", "emotional_valence", "social_consensus"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} outside [0, 1]: {value}")


NEUTRAL_SIGNAL = ReinforcementSignal()


@dataclass(frozen=True)
class PolicyConfig:
    """All tunables for scoring, decay, capacity, and pruning.

    weights are the (cqa, bve, trs, src) aggregation weights and must be
    non-negative and sum to 1. Decay rates are per day. capacity is the
    absolute record cap; capacity_fraction is the retained target under it.
    """

    weights: tuple[float, float, float, float] = (0.4, 0.3, 0.2, 0.1)
    lambda_longterm: float = 0.05
    lambda_transient: float = 0.2
    capacity: int = 10_000
    capacity_fraction: float = 0.70
    batch_size: int = 100
    prune_fraction: float = 0.10
    embedding_dim: int = 128
    rng_seed: int = 42
    # Layer behavior: intake TTL, bounded active layer, consolidation bar.
    sensory_ttl_seconds: float = 60.0
    working_capacity: int = 9
    consolidation_threshold: float = 1.0
    # Soft memory watermark in bytes; None disables backpressure.
    memory_watermark_bytes: Optional[int] = None
    # Master switch for purge/prune on ingest (the no-forgetting baseline
    # runs with this off).
    forgetting_enabled: bool = True
    # Retention-period knob for sensitive data; no expiry is enforced by
    # default, the value is carried for policy layers above this store.
    sensitive_retention_days: Optional[float] = None


@dataclass(frozen=True)
class ConfigViolation:
    """One violated configuration invariant."""

    code: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}({self.field}): {self.message}"


def validate_config(config: PolicyConfig) -> list[ConfigViolation]:
    """Check every PolicyConfig invariant; return all violations (empty if valid)."""
    violations: list[ConfigViolation] = []
    weights = config.weights
    if len(weights) != 4 or any(w < 0 for w in weights):
        violations.append(
            ConfigViolation("InvalidWeightSum", "weights", "weights must be four non-negative reals")
        )
    elif abs(sum(weights) - 1.0) > 1e-9:
        violations.append(
            ConfigViolation("InvalidWeightSum", "weights", f"weights sum to {sum(weights)!r}, expected 1")
        )
    if not 0.0 < config.capacity_fraction <= 1.0:
        violations.append(
            ConfigViolation("InvalidFraction", "capacity_fraction", f"{config.capacity_fraction!r} not in (0, 1]")
        )
    if not 0.0 < config.prune_fraction < 1.0:
        violations.append(
            ConfigViolation("InvalidFraction", "prune_fraction", f"{config.prune_fraction!r} not in (0, 1)")
        )
    if config.lambda_longterm <= 0:
        violations.append(
            ConfigViolation("InvalidDecayRate", "lambda_longterm", f"{config.lambda_longterm!r} must be > 0")
        )
    if config.lambda_transient <= 0:
        violations.append(
            ConfigViolation("InvalidDecayRate", "lambda_transient", f"{config.lambda_transient!r} must be > 0")
        )
    if config.batch_size < 1:
        violations.append(ConfigViolation("InvalidCount", "batch_size", f"{config.batch_size!r} must be >= 1"))
    if config.capacity < 1:
        violations.append(ConfigViolation("InvalidCount", "capacity", f"{config.capacity!r} must be >= 1"))
    if config.embedding_dim < 2:
        violations.append(ConfigViolation("InvalidCount", "embedding_dim", f"{config.embedding_dim!r} must be >= 2"))
    if config.sensory_ttl_seconds <= 0:
        violations.append(
            ConfigViolation("InvalidCount", "sensory_ttl_seconds", f"{config.sensory_ttl_seconds!r} must be > 0")
        )
    if config.working_capacity < 1:
        violations.append(
            ConfigViolation("InvalidCount", "working_capacity", f"{config.working_capacity!r} must be >= 1")
        )
    return violations


def require_valid(config: PolicyConfig) -> PolicyConfig:
    """Return the config unchanged or raise InvalidConfigError with all violations."""
    violations = validate_config(config)
    if violations:
        raise InvalidConfigError(violations)
    return config


# ---------------------------------------------------------------------------
# Serialization: JSON documents use seconds since epoch for timestamps and
# flat field names matching the type definitions.
# ---------------------------------------------------------------------------

def ms_to_seconds(ms: int) -> float:
    return ms / MS_PER_SECOND


def seconds_to_ms(seconds: float) -> int:
    return round(seconds * MS_PER_SECOND)


def record_to_dict(record: MemoryRecord) -> dict[str, Any]:
    return {
        "id": record.id,
        "content": record.content,
        "embedding": list(record.embedding),
        "category": record.category.value,
        "tool_tag": record.tool_tag.value,
        "created_at": ms_to_seconds(record.created_at),
        "last_accessed_at": ms_to_seconds(record.last_accessed_at),
        "usage_frequency": record.usage_frequency,
        "layer": record.layer.value,
        "score": {
            "cqa": record.score.cqa,
            "bve": record.score.bve,
            "trs": record.score.trs,
            "src": record.score.src,
            "importance": record.score.importance,
        },
        "user_id": record.user_id,
    }


def record_from_dict(data: dict[str, Any]) -> MemoryRecord:
    try:
        score = data["score"]
        return MemoryRecord(
            id=str(data["id"]),
            content=data["content"],
            embedding=tuple(float(x) for x in data["embedding"]),
            category=Category(data["category"]),
            tool_tag=ToolTag(data["tool_tag"]),
            created_at=seconds_to_ms(data["created_at"]),
            last_accessed_at=seconds_to_ms(data["last_accessed_at"]),
            usage_frequency=int(data["usage_frequency"]),
            layer=Layer(data["layer"]),
            score=ScoreBreakdown(
                cqa=float(score["cqa"]),
                bve=float(score["bve"]),
                trs=float(score["trs"]),
                src=float(score["src"]),
                importance=float(score["importance"]),
            ),
            user_id=data.get("user_id"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecordError(f"bad record document: {exc}") from exc


def draft_from_dict(data: dict[str, Any]) -> RecordDraft:
    """Parse an input-file record into a draft, tolerating missing fields."""
    if not isinstance(data, dict):
        raise MalformedRecordError(f"record line is not an object: {type(data).__name__}")
    if "content" not in data or not isinstance(data["content"], str):
        raise MalformedRecordError("record has no text content")
    try:
        embedding = data.get("embedding")
        return RecordDraft(
            content=data["content"],
            category=Category(data["category"]) if "category" in data else Category.GENERAL,
            tool_tag=ToolTag(data["tool_tag"]) if "tool_tag" in data else ToolTag.UNKNOWN,
            id=str(data["id"]) if "id" in data and data["id"] is not None else None,
            embedding=tuple(float(x) for x in embedding) if embedding is not None else None,
            created_at=seconds_to_ms(data["created_at"]) if "created_at" in data else None,
            last_accessed_at=seconds_to_ms(data["last_accessed_at"]) if "last_accessed_at" in data else None,
            usage_frequency=int(data.get("usage_frequency", 1)),
            user_id=data.get("user_id"),
        )
    except (TypeError, ValueError) as exc:
        raise MalformedRecordError(f"bad record field: {exc}") from exc


def records_to_jsonl(records: Iterable[MemoryRecord]) -> str:
    return "".join(json.dumps(record_to_dict(r), ensure_ascii=False) + "\n" for r in records)


def records_from_jsonl(text: str) -> Iterator[MemoryRecord]:
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        yield record_from_dict(json.loads(line))


def config_to_dict(config: PolicyConfig) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    for f in fields(PolicyConfig):
        value = getattr(config, f.name)
        doc[f.name] = list(value) if isinstance(value, tuple) else value
    return doc


def config_from_dict(data: dict[str, Any]) -> PolicyConfig:
    known = {f.name for f in fields(PolicyConfig)}
    unknown = set(data) - known
    if unknown:
        raise InvalidConfigError(
            [ConfigViolation("UnknownField", name, "not a PolicyConfig field") for name in sorted(unknown)]
        )
    kwargs = dict(data)
    if "weights" in kwargs:
        kwargs["weights"] = tuple(float(w) for w in kwargs["weights"])
    return PolicyConfig(**kwargs)


def load_config(path) -> PolicyConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def embedding_norm_error(embedding) -> float:
    return float(abs(np.linalg.norm(np.asarray(embedding, dtype=np.float64)) - 1.0))
