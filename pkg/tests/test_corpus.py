import pytest

from fsfm import Category, CorpusSpec, DEFAULT_MIX, generate_corpus, query_workload
from fsfm.corpus import allocate_counts, default_corpus_spec, validate_spec
from fsfm.errors import InvalidMixError
from fsfm.scoring import classify_security, score_cqa

NOW = 1_760_000_000_000


def spec(total=1000, **kw):
    return CorpusSpec(total=total, mix=dict(DEFAULT_MIX), **kw)


def test_exact_integer_allocation():
    counts = allocate_counts(10_000, DEFAULT_MIX)
    assert counts[Category.DANGEROUS] == 100
    assert counts[Category.IMPORTANT] == 1200
    assert sum(counts.values()) == 10_000


def test_allocation_handles_rounding():
    mix = {
        Category.IMPORTANT: 1 / 3,
        Category.MEDIUM: 1 / 3,
        Category.GENERAL: 1 / 3,
        Category.SENSITIVE: 0.0,
        Category.DANGEROUS: 0.0,
    }
    counts = allocate_counts(100, mix)
    assert sum(counts.values()) == 100
    assert sorted(counts.values(), reverse=True)[:3] == [34, 33, 33]


def test_generation_is_deterministic():
    first = generate_corpus(spec(seed=7), NOW)
    second = generate_corpus(spec(seed=7), NOW)
    assert first == second
    third = generate_corpus(spec(seed=8), NOW)
    assert first != third


def test_category_counts_match_mix():
    drafts = generate_corpus(spec(total=2000), NOW)
    by_category = {}
    for draft in drafts:
        by_category[draft.category] = by_category.get(draft.category, 0) + 1
    assert by_category[Category.DANGEROUS] == 20
    assert by_category[Category.IMPORTANT] == 240
    assert sum(by_category.values()) == 2000


def test_generator_classifier_agreement():
    drafts = generate_corpus(spec(total=1500), NOW)
    for draft in drafts:
        hint, _ = classify_security(draft.content)
        if draft.category is Category.DANGEROUS:
            assert hint is Category.DANGEROUS, draft.content
        elif draft.category is Category.SENSITIVE:
            assert hint is Category.SENSITIVE, draft.content
        else:
            assert hint is None, draft.content


def test_generator_quality_bands():
    drafts = generate_corpus(spec(total=600), NOW)
    for draft in drafts:
        quality = score_cqa(draft.content)
        if draft.category is Category.IMPORTANT:
            assert quality == 3.0, draft.content
        elif draft.category is Category.MEDIUM:
            assert quality == 2.0, draft.content
        elif draft.category is Category.GENERAL:
            assert quality == 1.0, draft.content


def test_zero_dangerous_mix_produces_no_dangerous_content():
    mix = dict(DEFAULT_MIX)
    mix[Category.DANGEROUS] = 0.0
    mix[Category.MEDIUM] += 0.01
    drafts = generate_corpus(CorpusSpec(total=800, mix=mix), NOW)
    assert all(classify_security(d.content)[0] is not Category.DANGEROUS for d in drafts)


def test_records_are_aged_within_window():
    drafts = generate_corpus(spec(total=500, age_days=30.0), NOW)
    for draft in drafts:
        assert NOW - 30 * 86_400_000 <= draft.created_at <= NOW
        assert draft.last_accessed_at == draft.created_at
        assert 1 <= draft.usage_frequency <= 5


def test_important_oldest_profile():
    drafts = generate_corpus(spec(total=500, age_profile="important-oldest"), NOW)
    important = [d.created_at for d in drafts if d.category is Category.IMPORTANT]
    others = [d.created_at for d in drafts if d.category is not Category.IMPORTANT]
    assert max(important) < min(others)


def test_ids_unique_and_stable():
    drafts = generate_corpus(spec(total=300), NOW)
    ids = [d.id for d in drafts]
    assert len(set(ids)) == 300
    assert ids[0] == "r000000"


@pytest.mark.parametrize(
    "bad",
    [
        {"total": -5},
        {"mix": {Category.IMPORTANT: 0.5, Category.MEDIUM: 0.6}},
        {"mix": {Category.IMPORTANT: -0.1, Category.MEDIUM: 1.1}},
        {"age_profile": "sideways"},
        {"dangerous_marker_rate": 0.5},
    ],
)
def test_invalid_specs_rejected(bad):
    kwargs = {"total": 100, "mix": dict(DEFAULT_MIX)}
    kwargs.update(bad)
    with pytest.raises(InvalidMixError):
        validate_spec(CorpusSpec(**kwargs))


def test_marker_rate_consistent_accepts_matching_value():
    ok = CorpusSpec(total=100, mix=dict(DEFAULT_MIX), dangerous_marker_rate=DEFAULT_MIX[Category.DANGEROUS])
    validate_spec(ok)


def test_query_workload_deterministic():
    assert query_workload(50, 9) == query_workload(50, 9)
    assert query_workload(50, 9) != query_workload(50, 10)
    assert len(query_workload(120, 3)) == 120


def test_default_corpus_spec_uses_documented_blend():
    default = default_corpus_spec()
    assert default.total == 100_000
    assert default.mix == DEFAULT_MIX
