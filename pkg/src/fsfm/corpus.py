"""Seeded synthetic corpus generation for the benchmark harness.

Each category's templates are built to land on the intended scores: rich
numeric detail for Important (quality 3, high-value tools), one data token
for Medium, navigation text for General, PII shapes for Sensitive, and
marker tokens from the dangerous lexicon for Dangerous. Category labels are
kept as ground truth for retention accounting.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidMixError
from .model import MS_PER_DAY, Category, RecordDraft, ToolTag

#: Desk-scale blend used by the harness; proportions are configuration.
DEFAULT_MIX: dict[Category, float] = {
    Category.IMPORTANT: 0.12,
    Category.MEDIUM: 0.50,
    Category.GENERAL: 0.15,
    Category.SENSITIVE: 0.22,
    Category.DANGEROUS: 0.01,
}

DEFAULT_CORPUS_TOTAL = 100_000

#: Marker tokens mirrored from rules/dangerous.rules; generated dangerous
#: drafts embed one of these so the classifier and generator always agree.
DANGEROUS_MARKERS = (
    "hate speech",
    "identity hate",
    "sexual exploitation",
    "graphic violence",
    "suicide",
    "self-harm",
    "illegal weapons",
    "controlled substance",
    "criminal planning",
    "harassment campaign",
    "threat of harm",
    "violent extremism",
    "fraud scheme",
)

_PLANS = ("Silver", "Gold", "Platinum", "Family", "Campus", "Travel")
_TOPICS = ("data roaming", "billing history", "coverage map", "loyalty points", "device upgrade")
_PAGES = ("billing", "plans", "support", "coverage", "account overview", "downloads")

_HIGH_VALUE_TOOLS = (ToolTag.KNOWLEDGE_BASE_QA, ToolTag.CUSTOMER_PROFILING, ToolTag.COMMUNITY_QUERY)
_LOW_VALUE_TOOLS = (ToolTag.PAGE_NAVIGATION, ToolTag.SIMPLE_LOOKUP)


@dataclass(frozen=True)
class CorpusSpec:
    """Shape of a generated corpus; deterministic per seed."""

    total: int
    mix: dict[Category, float] = field(default_factory=lambda: dict(DEFAULT_MIX))
    seed: int = 42
    #: Record ages are drawn from the last `age_days` days before `now`.
    age_days: float = 30.0
    #: "uniform" ages every category alike; "important-oldest" forces every
    #: Important record to predate all others (adversarial for old-first).
    age_profile: str = "uniform"
    user_pool: int = 20
    #: Fraction of the corpus carrying a dangerous marker; must equal the
    #: Dangerous mix share (markers appear in exactly those drafts).
    dangerous_marker_rate: Optional[float] = None


def validate_spec(spec: CorpusSpec) -> None:
    if spec.total < 0:
        raise InvalidMixError(f"total must be >= 0, got {spec.total}")
    if spec.age_profile not in ("uniform", "important-oldest"):
        raise InvalidMixError(f"unknown age_profile {spec.age_profile!r}")
    for category, fraction in spec.mix.items():
        if not isinstance(category, Category):
            raise InvalidMixError(f"mix key {category!r} is not a Category")
        if fraction < 0:
            raise InvalidMixError(f"negative mix fraction for {category.value}: {fraction}")
    total_fraction = math.fsum(spec.mix.values())
    if abs(total_fraction - 1.0) > 1e-9:
        raise InvalidMixError(f"mix fractions sum to {total_fraction!r}, expected 1")
    dangerous_share = spec.mix.get(Category.DANGEROUS, 0.0)
    if spec.dangerous_marker_rate is not None and abs(spec.dangerous_marker_rate - dangerous_share) > 1e-9:
        raise InvalidMixError(
            f"dangerous_marker_rate {spec.dangerous_marker_rate} inconsistent with "
            f"Dangerous mix share {dangerous_share}"
        )


def allocate_counts(total: int, mix: dict[Category, float]) -> dict[Category, int]:
    """Exact integer allocation by largest remainder; counts sum to total."""
    shares = [(category, total * mix.get(category, 0.0)) for category in Category]
    counts = {category: math.floor(share + 1e-9) for category, share in shares}
    remainder = total - sum(counts.values())
    by_fraction = sorted(shares, key=lambda item: (-(item[1] - math.floor(item[1] + 1e-9)), item[0].value))
    for category, _ in by_fraction[:remainder]:
        counts[category] += 1
    return counts


def _important_content(rng: random.Random) -> str:
    plan = rng.choice(_PLANS)
    gb = rng.randint(10, 500)
    price = rng.randint(29, 199)
    day = rng.randint(1, 28)
    return (
        f"The {plan} plan includes {gb}GB of data at ¥{price} per month and "
        f"renews automatically on day {day} of each billing cycle."
    )


def _medium_content(rng: random.Random) -> str:
    days = rng.randint(1, 30)
    topic = rng.choice(_TOPICS)
    return f"Your request about {topic} is scheduled for review within {days} days."


def _general_content(rng: random.Random) -> str:
    page = rng.choice(_PAGES)
    return f"Open the {page} page from the main menu to continue."


def _sensitive_content(rng: random.Random) -> str:
    variant = rng.randrange(3)
    if variant == 0:
        phone = "1" + str(rng.randint(3, 9)) + "".join(str(rng.randint(0, 9)) for _ in range(9))
        return f"Contact number {phone} is saved on the customer profile."
    if variant == 1:
        account = "".join(str(rng.randint(0, 9)) for _ in range(16))
        return f"Payment card ending reference {account} stored for autopay."
    # Keep one data token here so every sensitive variant scores quality 2,
    # strictly above the general band; retention accounting stays stable.
    number = rng.randint(1, 99)
    street = rng.choice(("Maple Street", "Harbor Road", "Jianguo Avenue", "Elm Court"))
    return f"Delivery note kept for the home address at {number} {street}."


def _dangerous_content(rng: random.Random) -> str:
    marker = rng.choice(DANGEROUS_MARKERS)
    return f"User message flagged for {marker} and escalated to the safety team for review."


_CONTENT_BUILDERS = {
    Category.IMPORTANT: _important_content,
    Category.MEDIUM: _medium_content,
    Category.GENERAL: _general_content,
    Category.SENSITIVE: _sensitive_content,
    Category.DANGEROUS: _dangerous_content,
}


def _tool_for(category: Category, rng: random.Random) -> ToolTag:
    if category is Category.IMPORTANT:
        return rng.choice(_HIGH_VALUE_TOOLS)
    if category is Category.MEDIUM or category is Category.SENSITIVE:
        return ToolTag.STANDARD_QUERY
    if category is Category.GENERAL:
        return rng.choice(_LOW_VALUE_TOOLS)
    return ToolTag.UNKNOWN


def _age_days_for(category: Category, spec: CorpusSpec, rng: random.Random) -> float:
    if spec.age_profile == "important-oldest":
        if category is Category.IMPORTANT:
            return spec.age_days * rng.uniform(0.75, 1.0)
        return spec.age_days * rng.uniform(0.0, 0.5)
    return spec.age_days * rng.uniform(0.0, 1.0)


def generate_corpus(spec: CorpusSpec, now: int) -> list[RecordDraft]:
    """Generate drafts matching `spec`, aged relative to logical time `now` (ms)."""
    validate_spec(spec)
    rng = random.Random(spec.seed)
    counts = allocate_counts(spec.total, spec.mix)

    drafts: list[RecordDraft] = []
    serial = 0
    for category in Category:
        builder = _CONTENT_BUILDERS[category]
        for _ in range(counts[category]):
            age_ms = round(_age_days_for(category, spec, rng) * MS_PER_DAY)
            created_at = now - age_ms
            drafts.append(
                RecordDraft(
                    id=f"r{serial:06d}",
                    content=builder(rng),
                    category=category,
                    tool_tag=_tool_for(category, rng),
                    created_at=created_at,
                    last_accessed_at=created_at,
                    usage_frequency=rng.randint(1, 5),
                    user_id=f"u{rng.randrange(spec.user_pool):03d}",
                )
            )
            serial += 1
    return drafts


def query_workload(count: int, seed: int) -> list[str]:
    """Query texts over the corpus topics, fixed per seed."""
    rng = random.Random(seed)
    queries = []
    for _ in range(count):
        variant = rng.randrange(3)
        if variant == 0:
            queries.append(f"what does the {rng.choice(_PLANS)} plan include per month")
        elif variant == 1:
            queries.append(f"how do I check {rng.choice(_TOPICS)}")
        else:
            queries.append(f"where is the {rng.choice(_PAGES)} page")
    return queries


def default_corpus_spec(total: int = DEFAULT_CORPUS_TOTAL, seed: int = 42) -> CorpusSpec:
    return CorpusSpec(total=total, mix=dict(DEFAULT_MIX), seed=seed)
