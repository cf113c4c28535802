"""Command-line front end: ingest, query, forget, simulate, bench.

Results go to standard output as JSON (one object, or one object per hit);
diagnostics go to standard error. Exit codes: 0 success, 1 usage error,
2 data error, 3 internal error. Every command takes an explicit --now so
runs never depend on wall-clock time; FSFM_CONFIG can supply a default
config path.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path
from typing import Optional

import click

from . import __version__
from .audit import AuditLog
from .bench import (
    export_report,
    load_manifest,
    per_run_csv,
    report_to_csv,
    run_from_manifest,
    run_manifest_document,
    summary_table,
)
from .errors import DataError, FsfmError, MalformedRecordError
from .model import PolicyConfig, draft_from_dict, load_config, seconds_to_ms
from .retention import ReinforcementEvent, simulate_staircase, trajectory_to_csv
from .store import MemoryStore

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def _now_ms(now_s: Optional[float]) -> int:
    return seconds_to_ms(now_s) if now_s is not None else round(time.time() * 1000)


def _audit_for(store_path: Path) -> AuditLog:
    return AuditLog(Path(str(store_path) + ".audit"))


def _load_store(store_path: Path) -> MemoryStore:
    if not store_path.exists():
        raise DataError(f"store file not found: {store_path}")
    return MemoryStore.restore(store_path, audit=_audit_for(store_path))


@click.group(name="fsfm")
@click.version_option(version=__version__)
def cli() -> None:
    """Selective-forgetting memory store."""


@cli.command("ingest")
@click.option("--store", "store_path", required=True, type=click.Path(path_type=Path),
              help="Store snapshot to create or extend.")
@click.option("--input", "input_path", required=True, type=click.Path(path_type=Path),
              help="JSON Lines file, one record per line.")
@click.option("--config", "config_path", envvar="FSFM_CONFIG", default=None,
              type=click.Path(path_type=Path),
              help="Policy config JSON (used when creating a new store).")
@click.option("--now", "now_s", type=float, default=None,
              help="Logical time as epoch seconds; defaults to wall clock.")
def cmd_ingest(store_path: Path, input_path: Path, config_path: Optional[Path], now_s: Optional[float]) -> int:
    """Ingest records in config-sized batches and checkpoint the store."""
    if not input_path.exists():
        raise DataError(f"input file not found: {input_path}")
    now = _now_ms(now_s)

    if store_path.exists():
        store = _load_store(store_path)
        if config_path is not None:
            click.echo(f"note: store exists, keeping its embedded config over {config_path}", err=True)
    else:
        config = load_config(config_path) if config_path is not None else PolicyConfig()
        store = MemoryStore(config, audit=_audit_for(store_path))

    accepted = purged = pruned = bad_lines = 0
    batch: list = []
    batch_lines: list[int] = []

    def flush() -> None:
        nonlocal accepted, purged, pruned, bad_lines
        if not batch:
            return
        report = store.ingest_batch(batch, now)
        accepted += report.accepted
        purged += report.purged
        pruned += report.pruned
        bad_lines += report.rejected
        for index, message in report.errors:
            click.echo(f"line {batch_lines[index]}: {message}", err=True)
        batch.clear()
        batch_lines.clear()

    with open(input_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                draft = draft_from_dict(json.loads(line))
            except (json.JSONDecodeError, MalformedRecordError) as exc:
                bad_lines += 1
                click.echo(f"line {lineno}: {exc}", err=True)
                continue
            batch.append(draft)
            batch_lines.append(lineno)
            if len(batch) >= store.config.batch_size:
                flush()
    flush()

    store.checkpoint(store_path, now=now)
    click.echo(json.dumps({"accepted": accepted, "purged": purged, "pruned": pruned}))
    return EXIT_DATA if bad_lines else EXIT_OK


@cli.command("query")
@click.option("--store", "store_path", required=True, type=click.Path(path_type=Path))
@click.option("--text", required=True, help="Query text.")
@click.option("--k", type=int, default=10, show_default=True, help="Number of hits.")
def cmd_query(store_path: Path, text: str, k: int) -> int:
    """Top-k cosine retrieval; one JSON object per hit."""
    if k < 1:
        raise click.UsageError("--k must be >= 1")
    store = _load_store(store_path)
    result = store.query(text, k=k)
    for record_id, similarity in result.hits:
        record = store.get(record_id)
        category = record.category.value if record is not None else ""
        click.echo(
            f'{{"id": {json.dumps(record_id)}, "similarity": {similarity:.6f}, '
            f'"category": {json.dumps(category)}}}'
        )
    return EXIT_OK


@cli.command("forget")
@click.option("--store", "store_path", required=True, type=click.Path(path_type=Path))
@click.option("--user", "user_id", default=None, help="Forget all records of this user.")
@click.option("--dangerous", is_flag=True, help="Purge dangerous-classified records.")
@click.option("--prune", is_flag=True, help="Run one capacity prune cycle.")
@click.option("--now", "now_s", type=float, default=None)
def cmd_forget(store_path: Path, user_id: Optional[str], dangerous: bool, prune: bool,
               now_s: Optional[float]) -> int:
    """Run exactly one forgetting mode and append to the audit log."""
    modes = sum((user_id is not None, dangerous, prune))
    if modes != 1:
        raise click.UsageError("pass exactly one of --user, --dangerous, --prune")
    store = _load_store(store_path)
    now = _now_ms(now_s)
    if user_id is not None:
        forgotten = len(store.user_requested_delete(user_id, now))
    elif dangerous:
        forgotten = len(store.safety_purge(now))
    else:
        forgotten = len(store.capacity_prune(now).forgotten)
    store.checkpoint(store_path, now=now)
    click.echo(json.dumps({"forgotten": forgotten}))
    return EXIT_OK


def parse_events_spec(spec: str) -> list[ReinforcementEvent]:
    """Parse "day:plateau,day:plateau,..." into events."""
    events = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            day_text, plateau_text = part.split(":")
            events.append(ReinforcementEvent(at_day=float(day_text), plateau=float(plateau_text)))
        except ValueError as exc:
            raise click.UsageError(f"bad event {part!r} (expected day:plateau): {exc}") from exc
    return events


@cli.command("simulate")
@click.option("--lambda", "decay_rate", required=True, type=float, help="Decay rate per day.")
@click.option("--events", "events_spec", default="", help='Reinforcements as "day:plateau,...".')
@click.option("--horizon", required=True, type=float, help="Days to simulate.")
@click.option("--step", required=True, type=float, help="Sampling step in days.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def cmd_simulate(decay_rate: float, events_spec: str, horizon: float, step: float,
                 out_path: Path) -> int:
    """Emit a retention trajectory as CSV (columns day,retention)."""
    if step <= 0:
        raise click.UsageError("--step must be > 0")
    if decay_rate <= 0:
        raise click.UsageError("--lambda must be > 0")
    if horizon < 0:
        raise click.UsageError("--horizon must be >= 0")
    events = parse_events_spec(events_spec)
    try:
        trajectory = simulate_staircase(decay_rate, events, horizon, step)
    except FsfmError as exc:
        raise click.UsageError(str(exc)) from exc
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(trajectory_to_csv(trajectory), encoding="utf-8")
    click.echo(json.dumps({"out": str(out_path), "samples": len(trajectory.samples)}))
    return EXIT_OK


@cli.command("bench")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
def cmd_bench(manifest_path: Path, out_dir: Path) -> int:
    """Run the A/B comparison from a manifest and write report files."""
    manifest = load_manifest(manifest_path)
    fsfm_report, baseline_report = run_from_manifest(manifest)

    out_dir.mkdir(parents=True, exist_ok=True)
    export_report(fsfm_report, "json", out_dir / "fsfm_report.json")
    export_report(fsfm_report, "csv", out_dir / "fsfm_report.csv")
    export_report(baseline_report, "json", out_dir / "baseline_report.json")
    export_report(baseline_report, "csv", out_dir / "baseline_report.csv")
    (out_dir / "per_run.csv").write_text(per_run_csv([fsfm_report, baseline_report]), encoding="utf-8")
    combined = report_to_csv(fsfm_report) + "".join(
        line + "\n" for line in report_to_csv(baseline_report).splitlines()[1:]
    )
    (out_dir / "summary.csv").write_text(combined, encoding="utf-8")
    table = summary_table(fsfm_report, baseline_report)
    (out_dir / "summary.txt").write_text(table, encoding="utf-8")
    (out_dir / "run_manifest.json").write_text(
        json.dumps(run_manifest_document(manifest, __version__), indent=2) + "\n", encoding="utf-8"
    )
    click.echo(table, nl=False)
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    """Invoke the CLI and map every outcome to the documented exit codes."""
    try:
        result = cli.main(args=argv, prog_name="fsfm", standalone_mode=False)
        return int(result) if isinstance(result, int) else EXIT_OK
    except click.exceptions.Exit as exc:  # --help / --version
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except FsfmError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - catch-all for exit-code contract
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
