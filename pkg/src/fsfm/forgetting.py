"""Forgetting decisions: capacity pruning, safety purge, user deletion,
reinforcement, and the random / old-first baseline strategies.

All functions here are pure: they take an immutable view of records and
return decisions (and, for pruning, the rescored retained view). The store
applies the results and appends every decision to its audit log.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Optional, Sequence, Union

from .errors import KTooLargeError
from .model import MemoryRecord, PolicyConfig, ReinforcementSignal
from .rules import RuleBundle
from .scoring import DANGEROUS_PENALTY, refresh_score, score_record

logger = logging.getLogger(__name__)


class ForgetPolicy(str, Enum):
    PASSIVE_DECAY = "PassiveDecay"
    ACTIVE_DELETION = "ActiveDeletion"
    SAFETY_TRIGGERED = "SafetyTriggered"
    USER_REQUESTED = "UserRequested"
    CAPACITY_PRUNE = "CapacityPrune"
    RANDOM_BASELINE = "RandomBaseline"
    OLD_FIRST_BASELINE = "OldFirstBaseline"


@dataclass(frozen=True)
class ForgetDecision:
    """Audit-loggable record of one executed forget action."""

    record_id: str
    policy: ForgetPolicy
    importance_at_decision: float
    decided_at: int  # ms since epoch
    reason: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "record_id": self.record_id,
            "policy": self.policy.value,
            "importance_at_decision": self.importance_at_decision,
            "decided_at": self.decided_at / 1000.0,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ForgetDecision":
        return cls(
            record_id=data["record_id"],
            policy=ForgetPolicy(data["policy"]),
            importance_at_decision=float(data["importance_at_decision"]),
            decided_at=round(data["decided_at"] * 1000),
            reason=data["reason"],
        )


@dataclass(frozen=True)
class PruneOutcome:
    """Result of one capacity prune cycle."""

    forgotten: tuple[ForgetDecision, ...]
    retained_count: int
    capacity_after: float
    #: Retained records with their rescored breakdowns, for the store to apply.
    retained: tuple[MemoryRecord, ...] = ()


ScoredEntry = Union[tuple[str, float], tuple[str, float, int]]


def select_forget_set(scores: Iterable[ScoredEntry], retain_limit: int) -> set[str]:
    """Ids of the lowest-importance records beyond the retain limit.

    Entries are (id, importance) or (id, importance, created_at). Ties on
    importance break toward older created_at, then lexicographic id, which
    makes the selection a deterministic minimizer of the forgotten score sum.
    """
    if retain_limit < 0:
        raise ValueError(f"retain_limit must be >= 0, got {retain_limit}")
    entries = []
    for entry in scores:
        record_id, importance = entry[0], float(entry[1])
        created_at = entry[2] if len(entry) > 2 else 0
        entries.append((importance, created_at, record_id))
    excess = len(entries) - retain_limit
    if excess <= 0:
        return set()
    entries.sort()
    return {record_id for _, _, record_id in entries[:excess]}


def retain_limit_for(config: PolicyConfig) -> int:
    """Largest record count satisfying count <= capacity_fraction * capacity."""
    return math.floor(config.capacity_fraction * config.capacity + 1e-9)


def prune_count(total: int, config: PolicyConfig) -> int:
    """How many records one prune cycle removes from a store of `total`.

    The larger of the overflow past the cap and the configured prune
    fraction of the store, so each cycle both restores the cap and clears
    enough headroom to avoid immediate re-triggering.
    """
    overflow = total - retain_limit_for(config)
    batch = math.floor(config.prune_fraction * total + 1e-9)
    return max(overflow, batch)


def capacity_prune(
    store_view: Sequence[MemoryRecord],
    config: PolicyConfig,
    now: int,
    rules: Optional[RuleBundle] = None,
) -> PruneOutcome:
    """Rescore everything, then forget the lowest-importance overflow.

    No-op (empty forgotten tuple) when the view is already at or under
    capacity_fraction * capacity.
    """
    total = len(store_view)
    limit = retain_limit_for(config)
    if total <= limit:
        return PruneOutcome(
            forgotten=(),
            retained_count=total,
            capacity_after=total / config.capacity,
            retained=tuple(store_view),
        )

    rescored = []
    for r in store_view:
        fresh = refresh_score(r, config, now)
        rescored.append(r if fresh == r.score else replace(r, score=fresh))
    to_forget = select_forget_set(
        [(r.id, r.score.importance, r.created_at) for r in rescored],
        retain_limit=total - prune_count(total, config),
    )
    decisions = tuple(
        ForgetDecision(
            record_id=r.id,
            policy=ForgetPolicy.CAPACITY_PRUNE,
            importance_at_decision=r.score.importance,
            decided_at=now,
            reason="capacity-prune",
        )
        for r in rescored
        if r.id in to_forget
    )
    retained = tuple(r for r in rescored if r.id not in to_forget)
    return PruneOutcome(
        forgotten=decisions,
        retained_count=len(retained),
        capacity_after=len(retained) / config.capacity,
        retained=retained,
    )


def safety_purge(store_view: Sequence[MemoryRecord], now: int) -> list[ForgetDecision]:
    """Forget every dangerous-classified record immediately, capacity aside."""
    return [
        ForgetDecision(
            record_id=r.id,
            policy=ForgetPolicy.SAFETY_TRIGGERED,
            importance_at_decision=r.score.importance,
            decided_at=now,
            reason="dangerous-content",
        )
        for r in store_view
        if r.score.src == DANGEROUS_PENALTY
    ]


def user_requested_delete(
    store_view: Sequence[MemoryRecord], user_id: str, now: int
) -> list[ForgetDecision]:
    """Forget every record owned by `user_id` (right to be forgotten).

    Zero matches is a soft condition: logs a warning and returns an empty
    list.
    """
    if not user_id:
        raise ValueError("user_id must be non-empty")
    decisions = [
        ForgetDecision(
            record_id=r.id,
            policy=ForgetPolicy.USER_REQUESTED,
            importance_at_decision=r.score.importance,
            decided_at=now,
            reason=f"user-delete:{user_id}",
        )
        for r in store_view
        if r.user_id == user_id
    ]
    if not decisions:
        logger.warning("UnknownUser: no records owned by %r", user_id)
    return decisions


def reinforce(
    record: MemoryRecord,
    signal: ReinforcementSignal,
    config: PolicyConfig,
    now: int,
    rules: Optional[RuleBundle] = None,
) -> MemoryRecord:
    """Refresh a record on access: bump usage, reset recency, rescore.

    The signal is carried for audit and retention analytics; the importance
    recomputation itself depends only on the refreshed counters.
    """
    updated = replace(
        record,
        usage_frequency=record.usage_frequency + 1,
        last_accessed_at=now,
    )
    return replace(updated, score=score_record(updated, config, now, rules))


def select_random_baseline(ids: Sequence[str], k: int, seed: int) -> set[str]:
    """Uniform seeded sample of k ids; the order of `ids` does not matter."""
    if k < 0 or k > len(ids):
        raise KTooLargeError(f"k={k} outside [0, {len(ids)}]")
    rng = random.Random(seed)
    return set(rng.sample(sorted(ids), k))


def select_old_first_baseline(records: Sequence[MemoryRecord], k: int) -> set[str]:
    """The k ids with the smallest created_at; ties break by id."""
    if k < 0 or k > len(records):
        raise KTooLargeError(f"k={k} outside [0, {len(records)}]")
    ordered = sorted(records, key=lambda r: (r.created_at, r.id))
    return {r.id for r in ordered[:k]}
