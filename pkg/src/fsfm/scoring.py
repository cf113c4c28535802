"""Multi-dimensional importance scoring.

Each record is scored on four dimensions:

- content quality (cqa, 0-3): data-rich detail scores high, refusals score 0;
- business value (bve, 1-3): fixed mapping from the producing tool;
- temporal relevance (trs, 0-2): min(2, e^(-rate * days) * usage_frequency);
- security risk (src): 0, -2 for PII content, -10 for dangerous content.

The aggregate is the weighted sum, except that dangerous records are clamped
to exactly -10 so they always sort first for removal regardless of weights.
"""

from __future__ import annotations

import math
import re
from typing import Optional

from .errors import NegativeElapsedTimeError
from .model import MS_PER_DAY, Category, MemoryRecord, PolicyConfig, ScoreBreakdown, ToolTag
from .rules import RuleBundle, default_rules

DANGEROUS_PENALTY = -10.0
SENSITIVE_PENALTY = -2.0

#: A "numeric/data token" is a whitespace-delimited token carrying a digit
#: or a currency/percent symbol.
_DATA_TOKEN_RE = re.compile(r"[^\s]*[0-9%$¥€£][^\s]*")

#: Minimum content length for the detailed-information score of 3.
DETAIL_LENGTH_THRESHOLD = 40

_BVE_POINTS = {
    ToolTag.KNOWLEDGE_BASE_QA: 3.0,
    ToolTag.CUSTOMER_PROFILING: 3.0,
    ToolTag.COMMUNITY_QUERY: 3.0,
    ToolTag.STANDARD_QUERY: 2.0,
    ToolTag.PAGE_NAVIGATION: 1.0,
    ToolTag.SIMPLE_LOOKUP: 1.0,
    ToolTag.UNKNOWN: 1.0,
}

#: Long-lived business knowledge decays slowly; everything else decays fast.
_SLOW_DECAY_CATEGORIES = frozenset({Category.IMPORTANT, Category.MEDIUM})


def count_data_tokens(content: str) -> int:
    return len(_DATA_TOKEN_RE.findall(content))


def score_cqa(content: str, rules: Optional[RuleBundle] = None) -> float:
    """Content quality on the {0, 1, 2, 3} scale.

    Refusal phrases score 0 regardless of any quoted figures; otherwise two
    or more data tokens in a detailed response score 3, a single data token
    scores 2, and any other informative text scores 1.
    """
    rules = rules or default_rules()
    if rules.refusal.matches(content):
        return 0.0
    data_tokens = count_data_tokens(content)
    if data_tokens >= 2 and len(content) >= DETAIL_LENGTH_THRESHOLD:
        return 3.0
    if data_tokens >= 1:
        return 2.0
    return 1.0


def score_bve(tool: ToolTag) -> float:
    """Business value from the producing tool: high 3, standard 2, low 1."""
    return _BVE_POINTS[tool]


def score_trs(last_accessed_at: int, now: int, usage_frequency: int, decay_rate: float) -> float:
    """Temporal relevance: min(2, e^(-rate * days_elapsed) * usage_frequency)."""
    if now < last_accessed_at:
        raise NegativeElapsedTimeError(f"now {now} precedes last access {last_accessed_at}")
    if usage_frequency < 1:
        raise ValueError(f"usage_frequency must be >= 1, got {usage_frequency}")
    if decay_rate <= 0:
        raise ValueError(f"decay rate must be > 0, got {decay_rate}")
    days = (now - last_accessed_at) / MS_PER_DAY
    raw = math.exp(-decay_rate * days) * usage_frequency
    return min(2.0, max(0.0, raw))


def classify_security(
    content: str, rules: Optional[RuleBundle] = None
) -> tuple[Optional[Category], float]:
    """Return a (category hint, penalty) pair for the content.

    Dangerous patterns dominate PII patterns; unmatched content carries no
    hint and no penalty.
    """
    rules = rules or default_rules()
    if rules.dangerous.matches(content):
        return Category.DANGEROUS, DANGEROUS_PENALTY
    if rules.sensitive.matches(content):
        return Category.SENSITIVE, SENSITIVE_PENALTY
    return None, 0.0


def aggregate_importance(
    cqa: float, bve: float, trs: float, src: float, weights: tuple[float, float, float, float]
) -> float:
    """Weighted aggregate with the dangerous clamp.

    A -10 security penalty forces the aggregate to exactly -10; otherwise no
    weighting could guarantee that dangerous records rank below everything
    else.
    """
    if src == DANGEROUS_PENALTY:
        return DANGEROUS_PENALTY
    w_cqa, w_bve, w_trs, w_src = weights
    return w_cqa * cqa + w_bve * bve + w_trs * trs + w_src * src


def decay_rate_for(category: Category, config: PolicyConfig) -> float:
    if category in _SLOW_DECAY_CATEGORIES:
        return config.lambda_longterm
    return config.lambda_transient


def score_record(
    record: MemoryRecord, config: PolicyConfig, now: int, rules: Optional[RuleBundle] = None
) -> ScoreBreakdown:
    """Full breakdown for a record at logical time `now` (ms)."""
    rules = rules or default_rules()
    cqa = score_cqa(record.content, rules)
    bve = score_bve(record.tool_tag)
    trs = score_trs(
        record.last_accessed_at,
        now,
        record.usage_frequency,
        decay_rate_for(record.category, config),
    )
    _, src = classify_security(record.content, rules)
    importance = aggregate_importance(cqa, bve, trs, src, config.weights)
    return ScoreBreakdown(cqa=cqa, bve=bve, trs=trs, src=src, importance=importance)


def refresh_score(record: MemoryRecord, config: PolicyConfig, now: int) -> ScoreBreakdown:
    """Recompute only the time-dependent part of an existing breakdown.

    cqa, bve, and src are pure functions of content and tool, so rescoring a
    stored record only needs the decayed trs and a fresh aggregate. Agrees
    exactly with score_record for any record scored at ingestion.
    """
    trs = score_trs(
        record.last_accessed_at,
        now,
        record.usage_frequency,
        decay_rate_for(record.category, config),
    )
    old = record.score
    importance = aggregate_importance(old.cqa, old.bve, trs, old.src, config.weights)
    return ScoreBreakdown(cqa=old.cqa, bve=old.bve, trs=trs, src=old.src, importance=importance)
