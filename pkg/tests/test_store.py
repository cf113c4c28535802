import threading

import pytest

from fsfm import (
    Category,
    Layer,
    MemoryStore,
    PolicyConfig,
    RecordDraft,
    ReinforcementSignal,
    ToolTag,
)
from fsfm.errors import (
    BackpressureError,
    BatchTooLargeError,
    CorruptSnapshotError,
    IllegalTransitionError,
)

NOW = 1_760_000_000_000


def important_draft(i=0, **kw):
    return RecordDraft(
        content=f"The Gold plan includes {30 + i}GB of data at ¥{50 + i} per month and renews on day 5.",
        category=Category.IMPORTANT,
        tool_tag=ToolTag.KNOWLEDGE_BASE_QA,
        **kw,
    )


def general_draft(i=0, **kw):
    return RecordDraft(
        content=f"Open the billing page number variant {chr(97 + i % 26)} from the menu.",
        category=Category.GENERAL,
        tool_tag=ToolTag.PAGE_NAVIGATION,
        **kw,
    )


def dangerous_draft(**kw):
    return RecordDraft(content="flagged for criminal planning discussion", **kw)


# -- ingestion ---------------------------------------------------------------

def test_ingest_clean_batch_counts():
    store = MemoryStore(PolicyConfig(capacity=1000))
    report = store.ingest_batch([general_draft(i) for i in range(100)], NOW)
    assert report.to_dict() == {"accepted": 100, "purged": 0, "pruned": 0}
    assert store.count(Layer.LONG_TERM) == 100


def test_ingest_purges_dangerous():
    store = MemoryStore(PolicyConfig(capacity=1000))
    drafts = [general_draft(i) for i in range(8)] + [dangerous_draft(), dangerous_draft()]
    report = store.ingest_batch(drafts, NOW)
    assert report.accepted == 10
    assert report.purged == 2
    assert store.count() == 8


def test_ingest_batch_too_large():
    store = MemoryStore(PolicyConfig(capacity=1000, batch_size=10))
    with pytest.raises(BatchTooLargeError):
        store.ingest_batch([general_draft(i) for i in range(11)], NOW)


def test_ingest_malformed_record_continues():
    store = MemoryStore(PolicyConfig(capacity=1000))
    drafts = [general_draft(0), RecordDraft(content="   "), general_draft(1)]
    report = store.ingest_batch(drafts, NOW)
    assert report.accepted == 2
    assert report.rejected == 1
    assert report.errors[0][0] == 1


def test_ingest_duplicate_id_rejected():
    store = MemoryStore(PolicyConfig(capacity=1000))
    first = store.ingest_batch([general_draft(0, id="dup")], NOW)
    second = store.ingest_batch([general_draft(1, id="dup")], NOW)
    assert first.accepted == 1
    assert second.accepted == 0 and second.rejected == 1


def test_ingest_respects_cap_across_batches():
    config = PolicyConfig(capacity=1000, capacity_fraction=0.70, batch_size=100)
    store = MemoryStore(config)
    for start in range(0, 1000, 100):
        store.ingest_batch([general_draft(start + i) for i in range(100)], NOW)
        assert store.count(Layer.LONG_TERM) <= 700
    assert store.count(Layer.LONG_TERM) <= 700


def test_ingest_with_supplied_embedding_validated():
    config = PolicyConfig(capacity=10, embedding_dim=4)
    store = MemoryStore(config)
    good = general_draft(0, embedding=(1.0, 0.0, 0.0, 0.0))
    bad_dim = general_draft(1, embedding=(1.0, 0.0))
    bad_norm = general_draft(2, embedding=(1.0, 1.0, 0.0, 0.0))
    report = store.ingest_batch([good, bad_dim, bad_norm], NOW)
    assert report.accepted == 1 and report.rejected == 2


def test_ingest_rejects_time_travel():
    store = MemoryStore(PolicyConfig(capacity=10))
    report = store.ingest_batch(
        [general_draft(0, created_at=NOW + 1000), general_draft(1, created_at=NOW, last_accessed_at=NOW - 5)],
        NOW,
    )
    assert report.accepted == 0 and report.rejected == 2


def test_ingestion_counts_as_first_access():
    store = MemoryStore(PolicyConfig(capacity=10))
    store.ingest_batch([general_draft(0, id="g", usage_frequency=0)], NOW)
    assert store.get("g").usage_frequency == 1


def test_forgetting_disabled_keeps_everything():
    config = PolicyConfig(capacity=100, forgetting_enabled=False)
    store = MemoryStore(config)
    drafts = [general_draft(i) for i in range(98)] + [dangerous_draft(), dangerous_draft()]
    report = store.ingest_batch(drafts, NOW)
    assert report.purged == 0 and report.pruned == 0
    assert store.count(Layer.LONG_TERM) == 100  # over the 70-record target


# -- layers ------------------------------------------------------------------

def test_add_places_into_sensory():
    store = MemoryStore(PolicyConfig(capacity=10))
    record = store.add(general_draft(0), NOW)
    assert record.layer is Layer.SENSORY
    assert store.count(Layer.SENSORY) == 1


def test_promote_working_to_longterm_threshold():
    store = MemoryStore(PolicyConfig(capacity=10, consolidation_threshold=1.0))
    record = store.add(important_draft(0), NOW)  # importance 2.3
    record = store.promote(record.id, Layer.WORKING, NOW)
    assert record.layer is Layer.WORKING
    promoted = store.promote(record.id, Layer.LONG_TERM, NOW)
    assert promoted is not None and promoted.layer is Layer.LONG_TERM


def test_promote_below_threshold_drops_with_audit():
    store = MemoryStore(PolicyConfig(capacity=10, consolidation_threshold=1.0))
    record = store.add(general_draft(0), NOW)  # importance 0.9
    store.promote(record.id, Layer.WORKING, NOW)
    dropped = store.promote(record.id, Layer.LONG_TERM, NOW)
    assert dropped is None
    assert store.get(record.id) is None
    entries = store.audit.entries()
    assert len(entries) == 1 and entries[0].reason == "consolidation-threshold"


def test_promote_expired_sensory_dropped():
    store = MemoryStore(PolicyConfig(capacity=10, sensory_ttl_seconds=60))
    record = store.add(general_draft(0), NOW)
    later = NOW + 61_000
    assert store.promote(record.id, Layer.WORKING, later) is None
    entries = store.audit.entries()
    assert len(entries) == 1 and entries[0].reason == "sensory-ttl-expired"


def test_promote_illegal_transitions():
    store = MemoryStore(PolicyConfig(capacity=10))
    store.ingest_batch([general_draft(0, id="lt")], NOW)
    with pytest.raises(IllegalTransitionError):
        store.promote("lt", Layer.WORKING, NOW)
    record = store.add(general_draft(1), NOW)
    with pytest.raises(IllegalTransitionError):
        store.promote(record.id, Layer.LONG_TERM, NOW)  # skipping Working
    with pytest.raises(KeyError):
        store.promote("missing", Layer.WORKING, NOW)


def test_working_capacity_evicts_lowest():
    store = MemoryStore(PolicyConfig(capacity=100, working_capacity=3))
    ids = []
    for i in range(4):
        draft = important_draft(i) if i else general_draft(0)
        record = store.add(draft, NOW)
        ids.append(record.id)
        store.promote(record.id, Layer.WORKING, NOW)
    # The general record (lowest importance, 0.9 < threshold 1.0) is evicted
    # and dropped at task completion.
    assert store.count(Layer.WORKING) == 3
    assert store.get(ids[0]) is None


def test_sweep_sensory_ttl():
    store = MemoryStore(PolicyConfig(capacity=10, sensory_ttl_seconds=60))
    store.add(general_draft(0), NOW)
    store.add(general_draft(1), NOW + 59_000)
    decisions = store.sweep_sensory(NOW + 61_000)
    assert len(decisions) == 1
    assert store.count(Layer.SENSORY) == 1


def test_layer_partition_invariant():
    store = MemoryStore(PolicyConfig(capacity=100))
    store.ingest_batch([general_draft(i) for i in range(10)], NOW)
    store.add(general_draft(20), NOW)
    all_ids = [r.id for r in store.records()]
    assert len(all_ids) == len(set(all_ids)) == 11
    by_layer = sum(store.count(layer) for layer in Layer)
    assert by_layer == store.count() == 11


# -- retrieval ------------------------------------------------------------------

def test_query_self_similarity():
    store = MemoryStore(PolicyConfig(capacity=100))
    draft = important_draft(0, id="a")
    store.ingest_batch([draft, important_draft(1, id="b")], NOW)
    result = store.query(draft.content, k=2)
    assert result.hits[0][0] == "a"
    assert result.hits[0][1] == pytest.approx(1.0, abs=1e-9)
    assert result.latency_ns > 0


def test_query_k_larger_than_store():
    store = MemoryStore(PolicyConfig(capacity=100))
    store.ingest_batch([general_draft(i) for i in range(2)], NOW)
    assert len(store.query("billing page", k=10).hits) == 2


def test_query_empty_store_zero_hits():
    store = MemoryStore(PolicyConfig(capacity=100))
    assert store.query("anything", k=3).hits == ()


def test_query_orthogonal_embeddings():
    config = PolicyConfig(capacity=10, embedding_dim=4)
    store = MemoryStore(config)
    store.ingest_batch(
        [
            general_draft(0, id="A", embedding=(1.0, 0.0, 0.0, 0.0)),
            general_draft(1, id="B", embedding=(0.0, 1.0, 0.0, 0.0)),
        ],
        NOW,
    )
    result = store.query(embedding=(1.0, 0.0, 0.0, 0.0), k=2)
    assert result.hits == ((("A", pytest.approx(1.0, abs=1e-12))), ("B", pytest.approx(0.0, abs=1e-12)))


def test_query_excludes_sensory_and_working():
    store = MemoryStore(PolicyConfig(capacity=10))
    record = store.add(important_draft(0), NOW)
    assert store.query(record.content, k=5).hits == ()
    store.promote(record.id, Layer.WORKING, NOW)
    assert store.query(record.content, k=5).hits == ()


def test_query_never_returns_dangerous():
    store = MemoryStore(PolicyConfig(capacity=100))
    store.ingest_batch([dangerous_draft(id="dgr"), general_draft(0)], NOW)
    result = store.query("criminal planning discussion", k=5)
    assert all(record_id != "dgr" for record_id, _ in result.hits)


def test_query_deterministic_hits():
    store = MemoryStore(PolicyConfig(capacity=100))
    store.ingest_batch([general_draft(i) for i in range(20)], NOW)
    first = store.query("billing page", k=5)
    second = store.query("billing page", k=5)
    assert first.hits == second.hits  # latency may differ


def test_query_ties_break_by_id():
    config = PolicyConfig(capacity=10, embedding_dim=4)
    store = MemoryStore(config)
    shared = (0.0, 0.0, 1.0, 0.0)
    store.ingest_batch(
        [general_draft(0, id="z", embedding=shared), general_draft(1, id="a", embedding=shared)],
        NOW,
    )
    result = store.query(embedding=shared, k=2)
    assert [record_id for record_id, _ in result.hits] == ["a", "z"]


def test_query_input_validation():
    store = MemoryStore(PolicyConfig(capacity=10))
    with pytest.raises(ValueError):
        store.query("x", embedding=(1.0,), k=1)
    with pytest.raises(ValueError):
        store.query(k=1)
    with pytest.raises(ValueError):
        store.query("x", k=0)


def test_ingest_scoring_matches_score_record():
    # The inlined single-pass scoring at ingest must agree exactly with the
    # composed scoring function on the stored record.
    from fsfm.scoring import score_record

    store = MemoryStore(PolicyConfig(capacity=100))
    drafts = [
        important_draft(0, id="imp", created_at=NOW - 5 * 86_400_000, usage_frequency=3),
        general_draft(0, id="gen"),
        RecordDraft(content="Contact number 13800138000 is saved on the profile.", id="sen"),
    ]
    store.ingest_batch(drafts, NOW)
    for record_id in ("imp", "gen", "sen"):
        record = store.get(record_id)
        assert record.score == score_record(record, store.config, NOW)


# -- reinforcement through the store ---------------------------------------------

def test_reinforce_record_updates_store():
    store = MemoryStore(PolicyConfig(capacity=10))
    store.ingest_batch([general_draft(0, id="g", created_at=NOW - 20 * 86_400_000)], NOW)
    before = store.get("g")
    updated = store.reinforce_record("g", ReinforcementSignal(), NOW)
    assert updated.usage_frequency == before.usage_frequency + 1
    assert store.get("g").last_accessed_at == NOW


# -- stats -------------------------------------------------------------------------

def test_usage_stats_empty():
    stats = MemoryStore(PolicyConfig(capacity=10)).usage_stats()
    assert stats.total == 0
    assert stats.capacity_fraction == 0.0
    assert stats.bytes_estimate == 0


def test_usage_stats_fraction():
    store = MemoryStore(PolicyConfig(capacity=1000, forgetting_enabled=False, batch_size=700))
    store.ingest_batch([general_draft(i) for i in range(700)], NOW)
    stats = store.usage_stats()
    assert stats.capacity_fraction == pytest.approx(0.70)
    assert stats.counts[Layer.LONG_TERM.value] == 700
    assert stats.bytes_estimate > 0


def test_backpressure_watermark():
    config = PolicyConfig(capacity=100, memory_watermark_bytes=2000, forgetting_enabled=False)
    store = MemoryStore(config)
    store.ingest_batch([general_draft(i) for i in range(10)], NOW)
    with pytest.raises(BackpressureError):
        store.ingest_batch([general_draft(100 + i) for i in range(10)], NOW)


def test_backpressure_relieved_by_prune():
    # With forgetting on, the watermark check prunes first and only fails if
    # the estimate is still over afterwards. At dim 4 each record costs
    # ~150 bytes, so 20 records breach 2500 and the pruned 10 do not.
    config = PolicyConfig(
        capacity=20, capacity_fraction=0.5, memory_watermark_bytes=2500, embedding_dim=4
    )
    store = MemoryStore(config)
    store.ingest_batch([general_draft(i) for i in range(20)], NOW)
    assert store.count() == 10
    report = store.ingest_batch([general_draft(100 + i) for i in range(5)], NOW)
    assert report.accepted == 5


# -- persistence ----------------------------------------------------------------------

def test_checkpoint_restore_identity(tmp_path):
    store = MemoryStore(PolicyConfig(capacity=1000))
    store.ingest_batch(
        [general_draft(i, user_id=f"u{i % 3}") for i in range(50)]
        + [important_draft(i) for i in range(10)],
        NOW,
    )
    store.add(general_draft(99), NOW)
    path = tmp_path / "store.fsfm"
    snapshot = store.checkpoint(path, now=NOW)
    restored = MemoryStore.restore(path)

    assert restored.config == store.config
    assert restored.sequence == store.sequence == snapshot.sequence == 1
    original = {r.id: r for r in store.records()}
    loaded = {r.id: r for r in restored.records()}
    assert original == loaded


def test_checkpoint_sequence_monotonic(tmp_path):
    store = MemoryStore(PolicyConfig(capacity=10))
    first = store.checkpoint(tmp_path / "a.fsfm", now=NOW)
    second = store.checkpoint(tmp_path / "b.fsfm", now=NOW)
    assert second.sequence == first.sequence + 1


def test_restore_truncated_snapshot_rejected(tmp_path):
    store = MemoryStore(PolicyConfig(capacity=100))
    store.ingest_batch([general_draft(i) for i in range(20)], NOW)
    path = tmp_path / "store.fsfm"
    store.checkpoint(path, now=NOW)
    data = path.read_text(encoding="utf-8")
    path.write_text(data[: len(data) - 40], encoding="utf-8")
    with pytest.raises(CorruptSnapshotError):
        MemoryStore.restore(path)


def test_restore_edited_snapshot_rejected(tmp_path):
    store = MemoryStore(PolicyConfig(capacity=100))
    store.ingest_batch([general_draft(0)], NOW)
    path = tmp_path / "store.fsfm"
    store.checkpoint(path, now=NOW)
    tampered = path.read_text(encoding="utf-8").replace("billing", "phishing")
    path.write_text(tampered, encoding="utf-8")
    with pytest.raises(CorruptSnapshotError):
        MemoryStore.restore(path)


def test_restore_missing_file_rejected(tmp_path):
    with pytest.raises(CorruptSnapshotError):
        MemoryStore.restore(tmp_path / "nope.fsfm")


def test_restored_store_continues_id_sequence(tmp_path):
    store = MemoryStore(PolicyConfig(capacity=100))
    store.ingest_batch([general_draft(0)], NOW)
    path = tmp_path / "store.fsfm"
    store.checkpoint(path, now=NOW)
    restored = MemoryStore.restore(path)
    report = restored.ingest_batch([general_draft(1)], NOW)
    assert report.accepted == 1
    assert restored.count() == 2


def test_from_records_builds_long_term_store():
    source = MemoryStore(PolicyConfig(capacity=100))
    source.ingest_batch([general_draft(i) for i in range(5)], NOW)
    clone = MemoryStore.from_records(source.config, source.records())
    assert clone.count(Layer.LONG_TERM) == 5


# -- audit completeness -----------------------------------------------------------------

def test_audit_entries_match_removals():
    store = MemoryStore(PolicyConfig(capacity=10))
    drafts = [general_draft(i, user_id="uA") for i in range(8)] + [dangerous_draft(), dangerous_draft()]
    report = store.ingest_batch(drafts, NOW)
    removed = report.purged + report.pruned
    assert len(store.audit) == removed
    decisions = store.user_requested_delete("uA", NOW)
    assert len(store.audit) == removed + len(decisions)
    assert store.count() == 10 - removed - len(decisions)


# -- concurrency smoke --------------------------------------------------------------------

def test_concurrent_readers_and_writer():
    store = MemoryStore(PolicyConfig(capacity=5000, batch_size=50))
    store.ingest_batch([general_draft(i) for i in range(50)], NOW)
    errors = []

    def reader():
        try:
            for _ in range(30):
                store.query("billing page", k=3)
                store.usage_stats()
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    def writer(base):
        try:
            for b in range(4):
                drafts = [general_draft(base + b * 50 + i) for i in range(50)]
                store.ingest_batch(drafts, NOW)
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=reader) for _ in range(4)]
    threads += [threading.Thread(target=writer, args=(1000,)), threading.Thread(target=writer, args=(5000,))]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=30)
    assert not errors
    assert store.count(Layer.LONG_TERM) == 50 + 2 * 4 * 50
