"""Command-line interface.

Exit codes: 0 success, 2 partial (pair-level failures recorded in the
report), 3 fatal (bad input, unreachable backend, broken config).
"""

import functools
import json
import logging
import math
from pathlib import Path

import click

from .backends import HttpLlmClient, MockLlmClient
from .config import load_config
from .errors import ArmadaError, ManifestError
from .ingest import (
    EntityRecord,
    extract_attributes_from_article,
    merge_records,
    parse_entity_records,
)
from .kb import (
    build_kb,
    deserialize_kb,
    link_entity,
    serialize_kb,
    sibling_with_most_shared_attributes,
)
from .pipeline import EXIT_FATAL, EXIT_PARTIAL, run_augment
from .reporting import read_candidates, run_report
from .selection import parse_policy, select_candidates

logger = logging.getLogger(__name__)


def _fatal_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ArmadaError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(EXIT_FATAL) from exc

    return wrapper


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Knowledge-guided augmentation for image-text pair datasets."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@_fatal_errors
def augment(manifest: str, kb_path: str, config_path: str, out_dir: str):
    """Run extraction, substitution, editing, and selection end to end."""
    config = load_config(config_path)
    result = run_augment(manifest, kb_path, config, out_dir)
    report = result.report
    click.echo(
        f"pairs={report['pairs']} candidates={report['candidates']} "
        f"accepted={report['accepted']} failures={len(report['failures'])}"
    )
    click.echo(f"accepted manifest: {result.accepted_path}")
    click.echo(f"full candidates:   {result.candidates_path}")
    click.echo(f"report:            {result.report_path}")
    raise SystemExit(result.exit_code)


@main.command()
@click.option("--candidates", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--fig-dir", default=None, type=click.Path(file_okay=False),
              help="Directory for figures (default: alongside the manifest).")
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the summary JSON here as well as stdout.")
@click.option("--figures/--no-figures", default=True, show_default=True)
@_fatal_errors
def report(candidates: str, fig_dir: str | None, out: str | None, figures: bool):
    """Summarize a candidate manifest and render its figures."""
    summary, paths = run_report(candidates, fig_dir=fig_dir, figures=figures)
    payload = json.dumps(summary, ensure_ascii=False, indent=2)
    click.echo(payload)
    if out:
        Path(out).write_text(payload + "\n", encoding="utf-8")
    for path in paths:
        click.echo(f"figure: {path}", err=True)


@main.command()
@click.option("--candidates", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policy", required=True,
              help="quantile:<qlo>:<qhi> or absolute:<lo>:<hi>.")
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the selection report here instead of stdout.")
@_fatal_errors
def select(candidates: str, policy: str, out: str | None):
    """Re-apply a selection band to an existing candidate manifest."""
    rows = read_candidates(candidates)
    band = parse_policy(policy)
    selected = select_candidates([float(r["distance"]) for r in rows], band)
    lines = []
    for row, entry in zip(rows, selected.entries):
        lines.append(json.dumps(
            {"id": row["id"], "distance": entry.distance, "accepted": entry.accepted},
            ensure_ascii=False,
        ))
    lines.append(json.dumps(
        {
            "summary": True,
            "total": len(rows),
            "accepted": selected.accepted_count,
            "lo": _finite_or_text(selected.lo),
            "hi": _finite_or_text(selected.hi),
        },
        ensure_ascii=False,
    ))
    text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _finite_or_text(value: float):
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


@main.group()
def kb():
    """Build, inspect, and enrich the entity-attribute knowledge base."""


@kb.command("build")
@click.option("--records", "record_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_fatal_errors
def kb_build(record_paths: tuple[str, ...], out: str):
    """Parse and merge record files into a validated KB file."""
    merged: list[EntityRecord] = []
    for path in record_paths:
        records = parse_entity_records(Path(path).read_bytes(), source_name=path)
        merged = merge_records(merged, records)
    knowledge = build_kb(merged)
    Path(out).write_bytes(serialize_kb(knowledge))
    click.echo(f"wrote {len(knowledge.nodes)} entities to {out}")


@kb.command("query")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--link", "mention", default=None, help="Resolve a mention to an entity id.")
@click.option("--siblings", "sibling_of", default=None,
              help="Most-similar sibling of an entity id.")
@click.option("--entity", "entity_id", default=None, help="Dump one entity record.")
@_fatal_errors
def kb_query(kb_path: str, mention: str | None, sibling_of: str | None, entity_id: str | None):
    """Run one query against a KB file and print the result as JSON."""
    chosen = [x for x in (mention, sibling_of, entity_id) if x is not None]
    if len(chosen) != 1:
        raise click.UsageError("pass exactly one of --link, --siblings, --entity")
    knowledge = deserialize_kb(Path(kb_path).read_bytes())
    if mention is not None:
        result = {"mention": mention, "entity_id": link_entity(knowledge, mention)}
    elif sibling_of is not None:
        result = {
            "entity_id": sibling_of,
            "sibling": sibling_with_most_shared_attributes(knowledge, sibling_of),
        }
    else:
        node = knowledge.node(entity_id)
        result = {
            "id": node.id,
            "canonical_name": node.canonical_name,
            "aliases": sorted(node.aliases),
            "parent_id": node.parent_id,
            "attributes": node.attributes,
        }
    click.echo(json.dumps(result, ensure_ascii=False, indent=2))


@kb.command("enrich")
@click.option("--articles", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_name", default="mock", show_default=True,
              type=click.Choice(["mock", "http"]))
@click.option("--fixtures", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Fixture file for the mock backend.")
@click.option("--endpoint", default=None, help="LLM endpoint for the http backend.")
@click.option("--model", default=None, help="Model name for the http backend.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_fatal_errors
def kb_enrich(articles: str, backend_name: str, fixtures: str | None,
              endpoint: str | None, model: str | None, out: str):
    """Extract attribute records from entity articles via the LLM backend."""
    if backend_name == "mock":
        if not fixtures:
            raise click.UsageError("--fixtures is required with the mock backend")
        llm = MockLlmClient.from_file(fixtures)
    else:
        if not endpoint or not model:
            raise click.UsageError("--endpoint and --model are required with http")
        llm = HttpLlmClient(endpoint, model)

    failures = 0
    records = []
    raw = Path(articles).read_text(encoding="utf-8")
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or not {"id", "canonical_name", "article"} <= set(obj):
            raise ManifestError(line_no, "article lines need id, canonical_name, article")
        extra = set(obj) - {"id", "canonical_name", "article", "aliases", "parent_id"}
        if extra:
            raise ManifestError(line_no, f"unknown keys: {sorted(extra)}")
        try:
            attributes = extract_attributes_from_article(
                obj["article"], obj["canonical_name"], llm
            )
        except ArmadaError as exc:
            logger.warning("article %s failed: %s", obj["id"], exc)
            click.echo(f"skipping {obj['id']}: {exc}", err=True)
            failures += 1
            continue
        records.append(
            {
                "id": obj["id"],
                "canonical_name": obj["canonical_name"],
                "aliases": obj.get("aliases", []),
                "parent_id": obj.get("parent_id"),
                "attributes": attributes,
            }
        )
    with Path(out).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    click.echo(f"wrote {len(records)} records to {out}" +
               (f" ({failures} skipped)" if failures else ""))
    if failures:
        raise SystemExit(EXIT_PARTIAL)


if __name__ == "__main__":
    main()
