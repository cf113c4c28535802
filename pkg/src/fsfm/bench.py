"""Benchmark harness: A/B protocol, strategy ablations, reports.

The A/B run feeds both arms the identical shuffled stream per round seed:
70% as a warm-up with no forgetting anywhere, then 30% as validation with
the managed arm purging and pruning while the baseline keeps everything.
Latency and throughput are sampled on a shared query workload after every
validation batch; retention is accounted against the corpus ground-truth
labels at round end.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import forgetting as engine
from .corpus import CorpusSpec, generate_corpus, query_workload, validate_spec
from .embedding import embed
from .errors import DegenerateSamplesError, IncompleteReportError, InvalidMixError, ManifestError
from .model import Category, Layer, PolicyConfig, RecordDraft, config_from_dict, config_to_dict
from .scoring import refresh_score
from .stats import welch_t_test
from .store import MemoryStore

FSFM_SYSTEM = "fsfm"
BASELINE_SYSTEM = "baseline"

#: Metrics that depend on wall-clock measurement and are exempt from
#: determinism and stability bounds.
LATENCY_METRICS = frozenset({"latency_mean_ns", "latency_std_ns", "throughput_qpm"})

RETENTION_METRICS = tuple(f"retention_{category.value}" for category in Category)

METRIC_ORDER = (
    "latency_mean_ns",
    "latency_std_ns",
    "throughput_qpm",
    "storage_fraction",
    "max_storage_fraction",
) + RETENTION_METRICS

#: Queries sampled after each validation batch (rotating slice of the workload).
CHECKPOINT_QUERY_COUNT = 25


class Strategy(str, Enum):
    RANDOM = "Random"
    OLD_FIRST = "OldFirst"
    FSFM = "FSFM"


@dataclass(frozen=True)
class RunMetrics:
    """Metrics of one round for one arm."""

    latency_mean_ns: float
    latency_std_ns: float
    throughput_qpm: float
    storage_fraction: float
    max_storage_fraction: float
    retention: dict[str, float]

    def metric(self, name: str) -> float:
        if name.startswith("retention_"):
            return self.retention[name.removeprefix("retention_")]
        return getattr(self, name)


@dataclass
class BenchReport:
    """Per-run metrics, their aggregates, and significance vs the other arm."""

    system: str
    per_run: list[RunMetrics]
    aggregate: dict[str, tuple[float, float]] = field(default_factory=dict)
    significance: dict[str, tuple[float, float]] = field(default_factory=dict)

    def samples(self, metric: str) -> list[float]:
        return [run.metric(metric) for run in self.per_run]


def _aggregate(per_run: list[RunMetrics]) -> dict[str, tuple[float, float]]:
    out = {}
    for metric in METRIC_ORDER:
        values = np.asarray([run.metric(metric) for run in per_run], dtype=np.float64)
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        out[metric] = (float(values.mean()), std)
    return out


def _significance(a: list[float], b: list[float]) -> tuple[float, float]:
    """Welch t and p, with the zero-variance limit handled explicitly."""
    try:
        result = welch_t_test(a, b)
        return result.statistic, result.p_value
    except DegenerateSamplesError:
        mean_a = math.fsum(a) / len(a)
        mean_b = math.fsum(b) / len(b)
        if mean_a == mean_b:
            return 0.0, 1.0
        return math.copysign(math.inf, mean_a - mean_b), 0.0


def _attach_significance(fsfm: BenchReport, baseline: BenchReport) -> None:
    for metric in METRIC_ORDER:
        a, b = fsfm.samples(metric), baseline.samples(metric)
        t, p = _significance(a, b)
        fsfm.significance[metric] = (t, p)
        baseline.significance[metric] = (-t if math.isfinite(t) else -t, p)


def _measure(store: MemoryStore, queries: Sequence[str], k: int = 10) -> tuple[list[int], float]:
    """Per-query latencies (ns) and total wall seconds for the workload."""
    latencies = []
    started = time.perf_counter()
    for query in queries:
        latencies.append(store.query(query, k=k).latency_ns)
    return latencies, time.perf_counter() - started


def _ground_truth(corpus: Sequence[RecordDraft]) -> dict[Category, set[str]]:
    truth: dict[Category, set[str]] = {category: set() for category in Category}
    for draft in corpus:
        if draft.id is None:
            raise ValueError("benchmark corpora need explicit record ids for accounting")
        truth[draft.category].add(draft.id)
    return truth


def _retention_rates(store: MemoryStore, truth: dict[Category, set[str]]) -> dict[str, float]:
    retained_ids = {record.id for record in store.records()}
    rates = {}
    for category, ids in truth.items():
        rates[category.value] = len(ids & retained_ids) / len(ids) if ids else 0.0
    return rates


def baseline_config(config: PolicyConfig, corpus_size: int) -> PolicyConfig:
    """Unlimited-capacity, never-forgetting counterpart of a config."""
    return replace(
        config,
        capacity=max(corpus_size, 1),
        capacity_fraction=1.0,
        forgetting_enabled=False,
        memory_watermark_bytes=None,
    )


def _pre_embedded(corpus: Sequence[RecordDraft], config: PolicyConfig) -> list[RecordDraft]:
    """Copies of the drafts with embeddings filled in once.

    Both arms and every round ingest the same contents, so computing each
    vector once keeps the protocol identical while avoiding repeated work.
    """
    out = []
    for draft in corpus:
        if draft.embedding is not None:
            out.append(draft)
            continue
        copied = replace(draft)
        copied.embedding = embed(draft.content, config.embedding_dim, config.rng_seed)
        out.append(copied)
    return out


def _long_term_fraction(store: MemoryStore) -> float:
    return store.count(Layer.LONG_TERM) / store.config.capacity


def run_ab(
    corpus: Sequence[RecordDraft],
    queries: Sequence[str],
    config: PolicyConfig,
    rounds: int,
    seeds: Sequence[int],
    now: int,
    *,
    checkpoint_queries: int = CHECKPOINT_QUERY_COUNT,
) -> tuple[BenchReport, BenchReport]:
    """Run the managed arm against the remember-everything baseline."""
    if rounds != len(seeds) or rounds < 1:
        raise ValueError(f"rounds ({rounds}) must equal the number of seeds ({len(seeds)})")
    if not corpus:
        raise ValueError("corpus is empty")
    if not queries:
        raise ValueError("query workload is empty")

    truth = _ground_truth(corpus)
    embedded = _pre_embedded(corpus, config)
    fsfm_runs: list[RunMetrics] = []
    baseline_runs: list[RunMetrics] = []

    for seed in seeds:
        order = list(range(len(embedded)))
        random.Random(seed).shuffle(order)
        stream = [embedded[i] for i in order]
        split = math.floor(0.7 * len(stream))

        fsfm_store = MemoryStore(config)
        base_store = MemoryStore(baseline_config(config, len(corpus)))

        # Warm-up: both arms remember everything.
        fsfm_store.forgetting_enabled = False
        for start in range(0, split, config.batch_size):
            batch = stream[start : min(start + config.batch_size, split)]
            fsfm_store.ingest_batch(batch, now)
            base_store.ingest_batch(batch, now)
        fsfm_store.forgetting_enabled = True

        # Validation: the managed arm forgets, the baseline does not.
        stats: dict[str, dict[str, list[float]]] = {
            FSFM_SYSTEM: {"latency": [], "wall": [], "fraction": []},
            BASELINE_SYSTEM: {"latency": [], "wall": [], "fraction": []},
        }
        stats[FSFM_SYSTEM]["fraction"].append(_long_term_fraction(fsfm_store))
        stats[BASELINE_SYSTEM]["fraction"].append(_long_term_fraction(base_store))
        probe = max(1, min(checkpoint_queries, len(queries)))
        batch_index = 0
        for start in range(split, len(stream), config.batch_size):
            batch = stream[start : start + config.batch_size]
            fsfm_store.ingest_batch(batch, now)
            base_store.ingest_batch(batch, now)
            offset = (batch_index * probe) % len(queries)
            window = [queries[(offset + j) % len(queries)] for j in range(probe)]
            for system, store in ((FSFM_SYSTEM, fsfm_store), (BASELINE_SYSTEM, base_store)):
                latencies, wall = _measure(store, window)
                stats[system]["latency"].extend(latencies)
                stats[system]["wall"].append(wall)
                stats[system]["fraction"].append(_long_term_fraction(store))
            batch_index += 1

        for system, store, runs in (
            (FSFM_SYSTEM, fsfm_store, fsfm_runs),
            (BASELINE_SYSTEM, base_store, baseline_runs),
        ):
            latencies = np.asarray(stats[system]["latency"], dtype=np.float64)
            total_wall = math.fsum(stats[system]["wall"])
            queries_run = len(latencies)
            runs.append(
                RunMetrics(
                    latency_mean_ns=float(latencies.mean()),
                    latency_std_ns=float(latencies.std(ddof=1)) if latencies.size > 1 else 0.0,
                    throughput_qpm=queries_run / (total_wall / 60.0) if total_wall > 0 else 0.0,
                    storage_fraction=_long_term_fraction(store),
                    max_storage_fraction=max(stats[system]["fraction"]),
                    retention=_retention_rates(store, truth),
                )
            )

    fsfm_report = BenchReport(system=FSFM_SYSTEM, per_run=fsfm_runs, aggregate=_aggregate(fsfm_runs))
    base_report = BenchReport(
        system=BASELINE_SYSTEM, per_run=baseline_runs, aggregate=_aggregate(baseline_runs)
    )
    _attach_significance(fsfm_report, base_report)
    return fsfm_report, base_report


# ---------------------------------------------------------------------------
# Strategy ablation: identical pruning budget, different selection rules.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StrategyMetrics:
    retention_accuracy: float
    memory_efficiency: float
    overhead_seconds: float
    processing_speed_qpm: Optional[float] = None


def run_strategy_comparison(
    corpus: Sequence[RecordDraft],
    config: PolicyConfig,
    strategies: Sequence[Strategy],
    seeds: Sequence[int],
    now: int,
    *,
    queries: Optional[Sequence[str]] = None,
    budget: Optional[int] = None,
) -> dict[Strategy, list[StrategyMetrics]]:
    """Compare forget-set selection strategies under one shared budget.

    Retention accuracy is the fraction of ground-truth Important records
    retained; efficiency is the retained non-negative score mass per slot of
    the capacity target; overhead is the wall time of the selection itself.
    """
    truth = _ground_truth(corpus)
    master = MemoryStore(baseline_config(config, len(corpus)))
    for start in range(0, len(corpus), config.batch_size):
        master.ingest_batch(corpus[start : start + config.batch_size], now)
    records = master.records()
    retain_limit = engine.retain_limit_for(config)
    k = budget if budget is not None else max(0, len(records) - retain_limit)
    if k > len(records):
        raise ValueError(f"budget {k} exceeds store size {len(records)}")

    important_ids = truth[Category.IMPORTANT]
    results: dict[Strategy, list[StrategyMetrics]] = {s: [] for s in strategies}
    for seed in seeds:
        for strategy in strategies:
            started = time.perf_counter()
            if strategy is Strategy.FSFM:
                rescored = [(r.id, refresh_score(r, config, now).importance, r.created_at) for r in records]
                forget = engine.select_forget_set(rescored, retain_limit=len(records) - k)
            elif strategy is Strategy.RANDOM:
                forget = engine.select_random_baseline([r.id for r in records], k, seed)
            elif strategy is Strategy.OLD_FIRST:
                forget = engine.select_old_first_baseline(records, k)
            else:
                raise ValueError(f"unknown strategy {strategy}")
            overhead = time.perf_counter() - started
            # Every strategy must spend exactly the shared budget.
            assert len(forget) == k, f"{strategy.value} selected {len(forget)} != budget {k}"

            retained = [r for r in records if r.id not in forget]
            retained_ids = {r.id for r in retained}
            accuracy = (
                len(important_ids & retained_ids) / len(important_ids) if important_ids else 1.0
            )
            useful_mass = math.fsum(max(0.0, r.score.importance) for r in retained)
            efficiency = useful_mass / retain_limit if retain_limit else 0.0

            speed = None
            if queries:
                pruned_store = MemoryStore.from_records(baseline_config(config, len(corpus)), retained)
                latencies, wall = _measure(pruned_store, queries)
                speed = len(latencies) / (wall / 60.0) if wall > 0 else 0.0

            results[strategy].append(
                StrategyMetrics(
                    retention_accuracy=accuracy,
                    memory_efficiency=efficiency,
                    overhead_seconds=overhead,
                    processing_speed_qpm=speed,
                )
            )
    return results


# ---------------------------------------------------------------------------
# Report serialization.
# ---------------------------------------------------------------------------

def report_to_dict(report: BenchReport) -> dict:
    return {
        "system": report.system,
        "per_run": [
            {
                "latency_mean_ns": run.latency_mean_ns,
                "latency_std_ns": run.latency_std_ns,
                "throughput_qpm": run.throughput_qpm,
                "storage_fraction": run.storage_fraction,
                "max_storage_fraction": run.max_storage_fraction,
                "retention": dict(run.retention),
            }
            for run in report.per_run
        ],
        "aggregate": {metric: list(stats) for metric, stats in report.aggregate.items()},
        "significance": {metric: list(stats) for metric, stats in report.significance.items()},
    }


def report_from_dict(data: dict) -> BenchReport:
    return BenchReport(
        system=data["system"],
        per_run=[
            RunMetrics(
                latency_mean_ns=run["latency_mean_ns"],
                latency_std_ns=run["latency_std_ns"],
                throughput_qpm=run["throughput_qpm"],
                storage_fraction=run["storage_fraction"],
                max_storage_fraction=run["max_storage_fraction"],
                retention=dict(run["retention"]),
            )
            for run in data["per_run"]
        ],
        aggregate={metric: tuple(stats) for metric, stats in data["aggregate"].items()},
        significance={metric: tuple(stats) for metric, stats in data["significance"].items()},
    )


CSV_HEADER = "metric,system,mean,std,p_value"


def report_to_csv(report: BenchReport) -> str:
    """Aggregate table with the fixed header metric,system,mean,std,p_value."""
    lines = [CSV_HEADER]
    for metric in METRIC_ORDER:
        mean, std = report.aggregate[metric]
        p_value = report.significance.get(metric, (math.nan, math.nan))[1]
        lines.append(f"{metric},{report.system},{mean!r},{std!r},{p_value!r}")
    return "\n".join(lines) + "\n"


def export_report(report: BenchReport, fmt: str, path) -> Path:
    """Write a complete report as json or csv; bit-stable per report."""
    if not report.per_run:
        raise IncompleteReportError("report has no per-run data")
    path = Path(path)
    if fmt == "json":
        path.write_text(
            json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    elif fmt == "csv":
        path.write_text(report_to_csv(report), encoding="utf-8")
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return path


def per_run_csv(reports: Sequence[BenchReport]) -> str:
    """One row per (run, system) with every per-run metric."""
    retention_cols = [f"retention_{category.value}" for category in Category]
    header = ["run", "system", "latency_mean_ns", "latency_std_ns", "throughput_qpm",
              "storage_fraction", "max_storage_fraction", *retention_cols]
    lines = [",".join(header)]
    for report in reports:
        for index, run in enumerate(report.per_run):
            row = [
                str(index),
                report.system,
                repr(run.latency_mean_ns),
                repr(run.latency_std_ns),
                repr(run.throughput_qpm),
                repr(run.storage_fraction),
                repr(run.max_storage_fraction),
                *(repr(run.retention[c.value]) for c in Category),
            ]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def summary_table(fsfm: BenchReport, baseline: BenchReport) -> str:
    """Human-readable side-by-side comparison with p-values."""
    width = max(len(m) for m in METRIC_ORDER)
    lines = [
        f"{'metric':<{width}}  {'fsfm mean':>14}  {'fsfm std':>12}  "
        f"{'baseline mean':>14}  {'baseline std':>12}  {'p_value':>10}"
    ]
    for metric in METRIC_ORDER:
        f_mean, f_std = fsfm.aggregate[metric]
        b_mean, b_std = baseline.aggregate[metric]
        p_value = fsfm.significance[metric][1]
        lines.append(
            f"{metric:<{width}}  {f_mean:>14.6g}  {f_std:>12.6g}  "
            f"{b_mean:>14.6g}  {b_std:>12.6g}  {p_value:>10.3g}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Run manifests: corpus spec + config + seeds + workload, for reproducibility.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchManifest:
    corpus: CorpusSpec
    config: PolicyConfig
    seeds: tuple[int, ...]
    query_count: int
    query_seed: int
    now_epoch_seconds: float

    @property
    def now_ms(self) -> int:
        return round(self.now_epoch_seconds * 1000)


def manifest_from_dict(data: dict) -> BenchManifest:
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")
    missing = {"corpus", "config", "seeds"} - set(data)
    if missing:
        raise ManifestError(f"manifest missing keys: {sorted(missing)}")
    corpus_doc = data["corpus"]
    if not isinstance(corpus_doc, dict) or "total" not in corpus_doc:
        raise ManifestError("manifest corpus must be an object with a total")
    try:
        mix = {Category(name): float(value) for name, value in corpus_doc.get("mix", {}).items()}
        spec = CorpusSpec(
            total=int(corpus_doc["total"]),
            mix=mix or dict(CorpusSpec(total=0).mix),
            seed=int(corpus_doc.get("seed", 42)),
            age_days=float(corpus_doc.get("age_days", 30.0)),
            age_profile=corpus_doc.get("age_profile", "uniform"),
            user_pool=int(corpus_doc.get("user_pool", 20)),
        )
        validate_spec(spec)
    except (ValueError, TypeError, InvalidMixError) as exc:
        raise ManifestError(f"bad corpus spec: {exc}") from exc
    try:
        config = config_from_dict(data["config"])
    except Exception as exc:
        raise ManifestError(f"bad config: {exc}") from exc
    seeds = data["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ManifestError("seeds must be a non-empty list of integers")
    try:
        return BenchManifest(
            corpus=spec,
            config=config,
            seeds=tuple(seeds),
            query_count=int(data.get("query_count", 1000)),
            query_seed=int(data.get("query_seed", 99)),
            now_epoch_seconds=float(data.get("now_epoch_seconds", 1_760_000_000.0)),
        )
    except (ValueError, TypeError) as exc:
        raise ManifestError(f"bad manifest field: {exc}") from exc


def load_manifest(path) -> BenchManifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    return manifest_from_dict(data)


def run_manifest_document(manifest: BenchManifest, version: str) -> dict:
    """The reproducibility document written next to the reports."""
    return {
        "code_version": version,
        "corpus": {
            "total": manifest.corpus.total,
            "mix": {category.value: fraction for category, fraction in manifest.corpus.mix.items()},
            "seed": manifest.corpus.seed,
            "age_days": manifest.corpus.age_days,
            "age_profile": manifest.corpus.age_profile,
            "user_pool": manifest.corpus.user_pool,
        },
        "config": config_to_dict(manifest.config),
        "seeds": list(manifest.seeds),
        "query_count": manifest.query_count,
        "query_seed": manifest.query_seed,
        "now_epoch_seconds": manifest.now_epoch_seconds,
    }


def run_from_manifest(manifest: BenchManifest) -> tuple[BenchReport, BenchReport]:
    corpus = generate_corpus(manifest.corpus, manifest.now_ms)
    queries = query_workload(manifest.query_count, manifest.query_seed)
    return run_ab(
        corpus,
        queries,
        manifest.config,
        rounds=len(manifest.seeds),
        seeds=manifest.seeds,
        now=manifest.now_ms,
    )
