"""End-to-end augmentation: extract, plan, edit, score, select, write.

The run is two parallel phases separated by a selection barrier. Phase one
extracts triples and plans substitutions per pair; results join in manifest
order, so the plan list is identical whatever the worker count. The plan
list is truncated to twice the accepted-count target (band selection rejects
a share), then phase two edits and scores each plan, journaling every outcome
so an interrupted run resumes without redoing finished work. Selection is
batch-global; accepted candidates are capped to the target, closest first.
"""

import hashlib
import json
import logging
import math
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ImageRef
from .config import PipelineConfig, build_editor, build_embedder, build_llm
from .errors import (
    ArmadaError,
    BackendError,
    LinkFailed,
    ManifestError,
    NoAlternativeValue,
    NoSibling,
    UnknownAttribute,
    UnparseableResponse,
)
from .extraction import ExtractedTriple, extract_triples, lexicon_extract
from .kb import KnowledgeBase, deserialize_kb, link_entity
from .selection import pair_distance, select_candidates
from .substitution import (
    Strategy,
    SubstitutionPlan,
    plan_llm_attribute,
    plan_sibling,
    plan_within_entity,
)

logger = logging.getLogger(__name__)

_MANIFEST_KEYS = {"id", "image_path", "text"}
_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")

STRATEGY_SLUGS = {
    Strategy.WITHIN_ENTITY: "within",
    Strategy.SIBLING_ENTITY: "sibling",
    Strategy.LLM_ATTRIBUTE: "llm",
}

EXIT_OK = 0
EXIT_PARTIAL = 2
EXIT_FATAL = 3


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from a tuple of parts (hash-based, not Python's
    per-process hash)."""
    digest = hashlib.blake2b(digest_size=8)
    for part in parts:
        digest.update(str(part).encode("utf-8"))
        digest.update(b"\x00")
    return int.from_bytes(digest.digest(), "big")


@dataclass
class ImageTextPair:
    id: str
    image: ImageRef
    text: str


def load_manifest(path: Path | str) -> list[ImageTextPair]:
    """Read a JSON-lines dataset manifest: {id, image_path, text} per line.

    Image paths resolve relative to the manifest's directory; every image
    must be readable so its digest can be recorded.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(0, f"cannot read manifest {path}: {exc}") from exc
    pairs = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or set(obj) != _MANIFEST_KEYS:
            raise ManifestError(line_no, "line must be an object with keys id, image_path, text")
        for key in ("id", "image_path", "text"):
            if not isinstance(obj[key], str) or not obj[key].strip():
                raise ManifestError(line_no, f"{key} must be a non-empty string")
        if obj["id"] in seen_ids:
            raise ManifestError(line_no, f"duplicate pair id {obj['id']!r}")
        seen_ids.add(obj["id"])
        image_path = Path(obj["image_path"])
        if not image_path.is_absolute():
            image_path = path.parent / image_path
        try:
            image = ImageRef.from_path(image_path)
        except BackendError as exc:
            raise ManifestError(line_no, str(exc)) from exc
        pairs.append(ImageTextPair(id=obj["id"], image=image, text=obj["text"]))
    return pairs


def _slug(raw: str) -> str:
    cleaned = _UNSAFE.sub("_", raw)
    if cleaned != raw:
        cleaned = f"{cleaned}-{hashlib.blake2b(raw.encode('utf-8'), digest_size=3).hexdigest()}"
    return cleaned


@dataclass
class PlanTask:
    pair_index: int
    pair: ImageTextPair
    triple_idx: int
    strategy: Strategy
    plan: SubstitutionPlan
    seed: int
    candidate_id: str
    image_rel: str


@dataclass
class Candidate:
    task: PlanTask
    edited: ImageRef
    distance: float
    accepted: bool = False


@dataclass
class PairFailure:
    pair_id: str
    stage: str
    message: str


@dataclass
class _PairPlans:
    tasks: list[PlanTask] = field(default_factory=list)
    failures: list[PairFailure] = field(default_factory=list)
    triples: int = 0
    dead_ends: int = 0


class Journal:
    """Append-only JSON-lines journal keyed by (pair_id, strategy, attempt).

    The last entry for a key wins; a truncated final line (crash mid-write)
    is tolerated by stopping at the first unparseable line.
    """

    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()
        self._state: dict[tuple[str, str, int], dict] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                logger.warning("journal %s has a truncated tail; ignoring it", self.path)
                break
            key = (entry["pair_id"], entry["strategy"], entry["attempt"])
            self._state[key] = entry

    def lookup(self, key: tuple[str, str, int]) -> dict | None:
        return self._state.get(key)

    def append(self, key: tuple[str, str, int], **fields) -> None:
        entry = {"pair_id": key[0], "strategy": key[1], "attempt": key[2], **fields}
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(entry, ensure_ascii=False) + "\n")
            self._state[key] = entry


def eligible_strategies(
    kb: KnowledgeBase, triple: ExtractedTriple, config: PipelineConfig
) -> list[Strategy]:
    """Strategies worth attempting for one triple.

    When the mention links to a node carrying the attribute, only the two
    KB-guided strategies run; the LLM path is reserved for attributes the
    KB cannot vouch for, which keeps made-up values out of covered ground.
    """
    enabled = config.enabled_strategies()
    entity_id = link_entity(kb, triple.entity_mention)
    covered = entity_id is not None and kb.has_attribute(entity_id, triple.attribute_name)
    if covered:
        return [s for s in enabled if s is not Strategy.LLM_ATTRIBUTE]
    return [s for s in enabled if s is Strategy.LLM_ATTRIBUTE]


def _build_plan(
    kb: KnowledgeBase,
    text: str,
    triple: ExtractedTriple,
    strategy: Strategy,
    llm,
    seed: int,
) -> SubstitutionPlan:
    if strategy is Strategy.WITHIN_ENTITY:
        return plan_within_entity(kb, text, triple, seed)
    if strategy is Strategy.SIBLING_ENTITY:
        return plan_sibling(kb, text, triple, seed)
    return plan_llm_attribute(text, triple, llm, seed)


def _plan_pair(
    pair_index: int,
    pair: ImageTextPair,
    kb: KnowledgeBase,
    config: PipelineConfig,
    llm,
) -> _PairPlans:
    result = _PairPlans()
    pair_seed = derive_seed(config.seed, pair.id)
    try:
        if config.extractor == "llm":
            triples = extract_triples(pair.text, llm).triples
        else:
            triples = lexicon_extract(pair.text, kb)
    except (BackendError, UnparseableResponse) as exc:
        result.failures.append(PairFailure(pair.id, "extract", str(exc)))
        return result
    result.triples = len(triples)
    for triple_idx, triple in enumerate(triples):
        for strategy in eligible_strategies(kb, triple, config):
            seed = derive_seed(pair_seed, triple_idx, strategy.value)
            try:
                plan = _build_plan(kb, pair.text, triple, strategy, llm, seed)
            except (LinkFailed, NoSibling, UnknownAttribute, NoAlternativeValue):
                result.dead_ends += 1
                continue
            except (BackendError, UnparseableResponse) as exc:
                result.failures.append(
                    PairFailure(pair.id, f"plan:{strategy.value}", str(exc))
                )
                continue
            candidate_id = f"{_slug(pair.id)}-t{triple_idx}-{STRATEGY_SLUGS[strategy]}"
            suffix = pair.image.path.suffix or ".img"
            result.tasks.append(
                PlanTask(
                    pair_index=pair_index,
                    pair=pair,
                    triple_idx=triple_idx,
                    strategy=strategy,
                    plan=plan,
                    seed=seed,
                    candidate_id=candidate_id,
                    image_rel=f"images/{candidate_id}{suffix}",
                )
            )
    return result


def _execute_task(
    task: PlanTask, out_dir: Path, editor, embedder, journal: Journal
) -> Candidate | PairFailure:
    key = (task.pair.id, task.strategy.value, task.triple_idx)
    image_abs = out_dir / task.image_rel
    entry = journal.lookup(key)
    if entry is not None and entry.get("status") == "ok" and image_abs.exists():
        data = image_abs.read_bytes()
        if hashlib.sha256(data).hexdigest() == entry.get("image_digest"):
            edited = ImageRef(path=image_abs, digest=entry["image_digest"])
            return Candidate(task=task, edited=edited, distance=float(entry["distance"]))
    try:
        edit_seed = derive_seed(task.seed, "edit")
        edited = editor.edit(task.pair.image, task.plan.edit_instruction, edit_seed, image_abs)
        distance = pair_distance(task.pair.image, edited, embedder)
    except ArmadaError as exc:
        journal.append(key, status="error", message=str(exc))
        return PairFailure(task.pair.id, f"edit:{task.strategy.value}", str(exc))
    journal.append(
        key,
        status="ok",
        image=task.image_rel,
        image_digest=edited.digest,
        distance=distance,
    )
    return Candidate(task=task, edited=edited, distance=distance)


def _candidate_row(candidate: Candidate) -> dict:
    task = candidate.task
    plan = task.plan
    return {
        "id": task.candidate_id,
        "source_id": task.pair.id,
        "image_path": task.image_rel,
        "text": plan.rewritten_text,
        "strategy": plan.kind.value,
        "attribute": plan.attribute_name,
        "old_value": plan.old_value,
        "new_value": plan.new_value,
        "edit_instruction": plan.edit_instruction,
        "distance": candidate.distance,
        "accepted": candidate.accepted,
    }


def _write_jsonl(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def _json_number(value: float):
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


@dataclass
class AugmentResult:
    out_dir: Path
    accepted_path: Path
    candidates_path: Path
    report_path: Path
    report: dict
    exit_code: int


def run_augment(
    manifest_path: Path | str,
    kb_path: Path | str,
    config: PipelineConfig,
    out_dir: Path | str,
) -> AugmentResult:
    """Run the full augmentation pipeline and write all outputs under
    ``out_dir``: accepted.jsonl, candidates.jsonl, report.json, images/,
    journal.jsonl."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = load_manifest(manifest_path)
    kb = deserialize_kb(Path(kb_path).read_bytes())

    target = math.ceil(config.ratio * len(pairs))
    budget = 2 * target

    need_llm = config.extractor == "llm" or any(
        s is Strategy.LLM_ATTRIBUTE for s in config.enabled_strategies()
    )
    llm = build_llm(config) if need_llm else None
    editor = build_editor(config)
    embedder = build_embedder(config)

    failures: list[PairFailure] = []
    tasks: list[PlanTask] = []
    total_triples = 0
    dead_ends = 0

    if budget > 0:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            planned = list(
                pool.map(
                    lambda item: _plan_pair(item[0], item[1], kb, config, llm),
                    enumerate(pairs),
                )
            )
        for outcome in planned:
            failures.extend(outcome.failures)
            total_triples += outcome.triples
            dead_ends += outcome.dead_ends
            tasks.extend(outcome.tasks)

    supply = len(tasks)
    tasks = tasks[:budget]

    journal = Journal(out_dir / "journal.jsonl")
    candidates: list[Candidate] = []
    if tasks:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            outcomes = list(
                pool.map(
                    lambda task: _execute_task(task, out_dir, editor, embedder, journal),
                    tasks,
                )
            )
        for outcome in outcomes:
            if isinstance(outcome, Candidate):
                candidates.append(outcome)
            else:
                failures.append(outcome)

    band_lo: float | None = None
    band_hi: float | None = None
    histogram = None
    if candidates:
        selected = select_candidates([c.distance for c in candidates], config.selection)
        band_lo, band_hi = selected.lo, selected.hi
        histogram = {"counts": selected.histogram_counts, "edges": selected.histogram_edges}
        in_band = [
            c for c, entry in zip(candidates, selected.entries) if entry.accepted
        ]
        ranked = sorted(
            in_band,
            key=lambda c: (
                c.distance,
                c.task.pair_index,
                c.task.triple_idx,
                STRATEGY_SLUGS[c.task.strategy],
            ),
        )
        chosen = {id(c) for c in ranked[:target]}
        for candidate in candidates:
            candidate.accepted = id(candidate) in chosen

    accepted = sorted(
        (c for c in candidates if c.accepted),
        key=lambda c: (
            c.distance,
            c.task.pair_index,
            c.task.triple_idx,
            STRATEGY_SLUGS[c.task.strategy],
        ),
    )

    candidates_path = out_dir / "candidates.jsonl"
    accepted_path = out_dir / "accepted.jsonl"
    _write_jsonl(candidates_path, [_candidate_row(c) for c in candidates])
    _write_jsonl(accepted_path, [_candidate_row(c) for c in accepted])

    strategy_counts = {s.value: 0 for s in Strategy}
    for candidate in candidates:
        strategy_counts[candidate.task.strategy.value] += 1

    failures.sort(key=lambda f: (f.pair_id, f.stage, f.message))
    exit_code = EXIT_PARTIAL if failures else EXIT_OK
    report = {
        "pairs": len(pairs),
        "triples": total_triples,
        "plan_supply": supply,
        "budget": budget,
        "target": target,
        "executed": len(tasks),
        "candidates": len(candidates),
        "accepted": len(accepted),
        "rejected": len(candidates) - len(accepted),
        "dead_ends": dead_ends,
        "band": None
        if band_lo is None
        else {"lo": _json_number(band_lo), "hi": _json_number(band_hi)},
        "strategy_counts": strategy_counts,
        "histogram": histogram,
        "failures": [
            {"pair_id": f.pair_id, "stage": f.stage, "message": f.message} for f in failures
        ],
        "exit_code": exit_code,
    }
    report_path = out_dir / "report.json"
    report_path.write_text(
        json.dumps(report, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    return AugmentResult(
        out_dir=out_dir,
        accepted_path=accepted_path,
        candidates_path=candidates_path,
        report_path=report_path,
        report=report,
        exit_code=exit_code,
    )
