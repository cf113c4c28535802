"""fsfm: a selective-forgetting memory store for agent systems.

Records are scored on content quality, business value, temporal relevance,
and security risk; the store keeps itself within a capacity target by
forgetting the lowest-importance records first, purges dangerous content
unconditionally, and supports user-scoped deletion. A benchmark harness
compares the managed store against a remember-everything baseline and
against random / oldest-first forgetting.
"""

__version__ = "0.1.0"

from .audit import AuditLog
from .corpus import DEFAULT_MIX, CorpusSpec, default_corpus_spec, generate_corpus, query_workload
from .embedding import embed
from .errors import FsfmError
from .forgetting import (
    ForgetDecision,
    ForgetPolicy,
    PruneOutcome,
    capacity_prune,
    reinforce,
    safety_purge,
    select_forget_set,
    select_old_first_baseline,
    select_random_baseline,
    user_requested_delete,
)
from .model import (
    Category,
    Layer,
    MemoryRecord,
    PolicyConfig,
    RecordDraft,
    ReinforcementSignal,
    ScoreBreakdown,
    ToolTag,
    validate_config,
)
from .retention import ReinforcementEvent, RetentionTrajectory, retention, retention_extended, simulate_staircase
from .scoring import aggregate_importance, classify_security, score_bve, score_cqa, score_record, score_trs
from .stats import welch_t_test
from .store import MemoryStore, QueryResult, StoreSnapshot

__all__ = [
    "__version__",
    "AuditLog",
    "Category",
    "CorpusSpec",
    "DEFAULT_MIX",
    "ForgetDecision",
    "ForgetPolicy",
    "FsfmError",
    "Layer",
    "MemoryRecord",
    "MemoryStore",
    "PolicyConfig",
    "PruneOutcome",
    "QueryResult",
    "RecordDraft",
    "ReinforcementEvent",
    "ReinforcementSignal",
    "RetentionTrajectory",
    "ScoreBreakdown",
    "StoreSnapshot",
    "ToolTag",
    "aggregate_importance",
    "capacity_prune",
    "classify_security",
    "default_corpus_spec",
    "embed",
    "generate_corpus",
    "query_workload",
    "reinforce",
    "retention",
    "retention_extended",
    "safety_purge",
    "score_bve",
    "score_cqa",
    "score_record",
    "score_trs",
    "select_forget_set",
    "select_old_first_baseline",
    "select_random_baseline",
    "simulate_staircase",
    "user_requested_delete",
    "validate_config",
    "welch_t_test",
]
