import json

import pytest

from fsfm import Category, Layer, MemoryRecord, PolicyConfig, ScoreBreakdown, ToolTag, validate_config
from fsfm.errors import InvalidConfigError, MalformedRecordError
from fsfm.model import (
    config_from_dict,
    config_to_dict,
    draft_from_dict,
    ms_to_seconds,
    record_from_dict,
    record_to_dict,
    require_valid,
    seconds_to_ms,
)


def test_default_config_is_valid():
    assert validate_config(PolicyConfig()) == []


def test_explicit_default_weights_are_valid():
    assert validate_config(PolicyConfig(weights=(0.4, 0.3, 0.2, 0.1))) == []


def test_uniform_weights_are_valid():
    assert validate_config(PolicyConfig(weights=(0.25, 0.25, 0.25, 0.25))) == []


def test_weight_sum_violation():
    violations = validate_config(PolicyConfig(weights=(0.5, 0.5, 0.5, 0.5)))
    assert [v.code for v in violations] == ["InvalidWeightSum"]
    assert violations[0].field == "weights"


def test_negative_weight_violation():
    violations = validate_config(PolicyConfig(weights=(-0.1, 0.5, 0.4, 0.2)))
    assert any(v.code == "InvalidWeightSum" for v in violations)


@pytest.mark.parametrize(
    "kwargs, code, field",
    [
        ({"capacity_fraction": 0.0}, "InvalidFraction", "capacity_fraction"),
        ({"capacity_fraction": 1.5}, "InvalidFraction", "capacity_fraction"),
        ({"prune_fraction": 0.0}, "InvalidFraction", "prune_fraction"),
        ({"prune_fraction": 1.0}, "InvalidFraction", "prune_fraction"),
        ({"lambda_longterm": 0.0}, "InvalidDecayRate", "lambda_longterm"),
        ({"lambda_transient": -0.2}, "InvalidDecayRate", "lambda_transient"),
        ({"batch_size": 0}, "InvalidCount", "batch_size"),
        ({"embedding_dim": 1}, "InvalidCount", "embedding_dim"),
    ],
)
def test_single_violations_name_the_field(kwargs, code, field):
    violations = validate_config(PolicyConfig(**kwargs))
    assert (code, field) in [(v.code, v.field) for v in violations]


def test_all_violations_reported_together():
    bad = PolicyConfig(weights=(0.5, 0.5, 0.5, 0.5), prune_fraction=0.0, lambda_longterm=-1)
    codes = {v.code for v in validate_config(bad)}
    assert codes == {"InvalidWeightSum", "InvalidFraction", "InvalidDecayRate"}


def test_validation_is_idempotent():
    config = require_valid(PolicyConfig())
    assert validate_config(config) == []


def test_require_valid_raises_with_violations():
    with pytest.raises(InvalidConfigError) as excinfo:
        require_valid(PolicyConfig(weights=(1.0, 1.0, 0.0, 0.0)))
    assert excinfo.value.violations


def _sample_record(now_ms: int) -> MemoryRecord:
    return MemoryRecord(
        id="rec-1",
        content="The Gold plan includes 30GB at ¥59 per month.",
        embedding=(1.0, 0.0, 0.0, 0.0),
        category=Category.IMPORTANT,
        tool_tag=ToolTag.KNOWLEDGE_BASE_QA,
        created_at=now_ms - 86_400_000,
        last_accessed_at=now_ms - 3_600_000,
        usage_frequency=3,
        layer=Layer.LONG_TERM,
        score=ScoreBreakdown(cqa=3.0, bve=3.0, trs=1.25, src=0.0, importance=2.35),
        user_id="u42",
    )


def test_record_json_round_trip_is_identity(now_ms):
    record = _sample_record(now_ms)
    assert record_from_dict(json.loads(json.dumps(record_to_dict(record)))) == record


def test_record_round_trip_without_user(now_ms):
    record = _sample_record(now_ms)
    record = MemoryRecord(**{**record.__dict__, "user_id": None})
    assert record_from_dict(record_to_dict(record)) == record


def test_record_timestamps_exposed_as_seconds(now_ms):
    doc = record_to_dict(_sample_record(now_ms))
    assert doc["created_at"] == (now_ms - 86_400_000) / 1000
    assert seconds_to_ms(ms_to_seconds(now_ms)) == now_ms


def test_record_from_dict_rejects_garbage():
    with pytest.raises(MalformedRecordError):
        record_from_dict({"id": "x"})


def test_draft_from_dict_minimal():
    draft = draft_from_dict({"content": "hello there"})
    assert draft.category is Category.GENERAL
    assert draft.tool_tag is ToolTag.UNKNOWN
    assert draft.embedding is None


def test_draft_from_dict_full():
    draft = draft_from_dict(
        {
            "content": "x",
            "category": "Sensitive",
            "tool_tag": "StandardQuery",
            "created_at": 1000.5,
            "usage_frequency": 4,
            "user_id": "u9",
        }
    )
    assert draft.category is Category.SENSITIVE
    assert draft.created_at == 1_000_500
    assert draft.usage_frequency == 4


@pytest.mark.parametrize(
    "doc",
    [
        {"category": "Important"},
        {"content": 17},
        {"content": "ok", "category": "NotACategory"},
        {"content": "ok", "usage_frequency": "many"},
        "not an object",
    ],
)
def test_draft_from_dict_rejects_malformed(doc):
    with pytest.raises(MalformedRecordError):
        draft_from_dict(doc)


def test_config_round_trip():
    config = PolicyConfig(capacity=555, rng_seed=7, memory_watermark_bytes=1_000_000)
    assert config_from_dict(config_to_dict(config)) == config


def test_config_from_dict_rejects_unknown_fields():
    with pytest.raises(InvalidConfigError):
        config_from_dict({"capacity": 10, "bogus_field": 1})


def test_reinforcement_signal_ranges_enforced():
    from fsfm import ReinforcementSignal

    ReinforcementSignal(user_feedback=-1.0, contextual_relevance=1.0)
    with pytest.raises(ValueError):
        ReinforcementSignal(user_feedback=1.5)
    with pytest.raises(ValueError):
        ReinforcementSignal(emotional_valence=-0.1)
    with pytest.raises(ValueError):
        ReinforcementSignal(social_consensus=2.0)
