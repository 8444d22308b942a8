"""Pipeline drivers: the full feedback pipeline, the direct baseline, and the
selection ablations.

The full pipeline walks, for every background chunk: M past-iterations, each
selecting titles, extracting inspirations, optionally suggesting, proposing
``proposals_per_call`` hypotheses, then running N refinement rounds per
proposal. Every intermediate refinement is persisted (not only the final
hypothesis), so a clean run yields exactly

    backgrounds x M x proposals_per_call x (N + 1)

records. Failures are contained per background: a background that raises is
logged and skipped, and the run only fails if every background failed.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from ..corpus import Chunk, CorpusHandle, CorpusView, BenchmarkEntry, chunk_passage
from ..gateway import Gateway, GatewayError, GenParams, RunTrace
from ..retrieval import SurveyIndex, build_index, bm25_topk, sample_random
from . import parsing
from .ops import EngineError, MooseEngine, OpParseError
from .prompts import TemplateSet
from .records import Background, HypothesisRecord, InspirationSet, PipelineConfig

logger = logging.getLogger(__name__)


class PipelineRunError(RuntimeError):
    """Every background failed; the run produced nothing."""


class AblationVariant(str, Enum):
    RAND_BACKGROUND = "rand-background"
    RAND_BOTH = "rand-both"
    BM25_INSPIRATIONS = "bm25-inspirations"
    GT_BACKGROUND_INSPIRATIONS = "gt-background-inspirations"
    GT_HYPOTHESES_PASSTHROUGH = "gt-hypotheses"


@dataclass
class RunResult:
    records: list[HypothesisRecord]
    trace: RunTrace
    manifest: dict
    failures: list[str] = field(default_factory=list)

    def records_jsonl_lines(self) -> list[str]:
        return [json.dumps(r.to_dict(), sort_keys=True) for r in self.records]


def _as_gateway(backend, trace: Optional[RunTrace]) -> Gateway:
    if isinstance(backend, Gateway):
        return backend
    return Gateway(backend, trace=trace)


def _base_manifest(mode: str, cfg: PipelineConfig, gateway: Gateway, templates: TemplateSet) -> dict:
    return {
        "engine_mode": mode,
        "config": cfg.to_dict(),
        "model_name": gateway.model_name,
        "template_hashes": templates.hashes(),
    }


def run_pipeline(
    view: CorpusView,
    survey: Optional[SurveyIndex],
    cfg: PipelineConfig,
    backend,
    templates: Optional[TemplateSet] = None,
    trace: Optional[RunTrace] = None,
) -> RunResult:
    """Run the full pipeline over every chunk of every background-pool passage."""
    gateway = _as_gateway(backend, trace)
    templates = templates or TemplateSet.load()
    if not cfg.enable_survey_access:
        survey = None
    engine = MooseEngine(gateway, templates, cfg, view, survey=survey)

    work: list[Chunk] = []
    for passage in view.background_pool:
        work.extend(chunk_passage(passage, cfg.chunk_size_words))

    def process(chunk: Chunk) -> list[HypothesisRecord]:
        records: list[HypothesisRecord] = []
        bg = engine.find_background(chunk)
        if bg is None:
            return records
        prev_titles: Optional[list] = None
        prev_hyps: list[HypothesisRecord] = []
        prev_bundles: list = []
        for k in range(cfg.past_iterations):
            past_text: Optional[str] = None
            if k != 0 and cfg.enable_past_feedback:
                past_text = engine.past_feedback(prev_titles or [], prev_hyps, prev_bundles)
            titles = engine.find_inspiration_titles(bg, past_feedback_text=past_text)
            insp = engine.find_inspirations(bg, titles, past_iteration=k)
            sug = engine.suggest(bg, insp) if cfg.enable_ff2 else None
            prefix = f"{chunk.passage_id}.c{chunk.index}.k{k}"
            initial = engine.propose(bg, insp, sug, None, cfg.proposals_per_call, id_prefix=prefix)
            records.extend(initial)
            round_hyps: list[HypothesisRecord] = list(initial)
            round_bundles: list = []
            for record in initial:
                current = record
                for _ in range(cfg.present_iterations):
                    bundle = engine.check(current)
                    round_bundles.append(bundle)
                    current = engine.propose(bg, insp, sug, (current, bundle), 1)[0]
                    records.append(current)
                    round_hyps.append(current)
            prev_titles, prev_hyps, prev_bundles = list(titles), round_hyps, round_bundles
        return records

    records: list[HypothesisRecord] = []
    failures: list[str] = []
    attempted = 0

    workers = 1 if gateway.deterministic else max(1, cfg.workers)
    if workers == 1:
        for chunk in work:
            attempted += 1
            try:
                records.extend(process(chunk))
            except (EngineError, GatewayError) as exc:
                failures.append(f"{chunk.passage_id}.c{chunk.index}: {exc}")
                logger.warning("background %s.c%d failed: %s", chunk.passage_id, chunk.index, exc)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [(chunk, pool.submit(process, chunk)) for chunk in work]
            for chunk, future in futures:
                attempted += 1
                try:
                    records.extend(future.result())
                except (EngineError, GatewayError) as exc:
                    failures.append(f"{chunk.passage_id}.c{chunk.index}: {exc}")
                    logger.warning("background %s.c%d failed: %s", chunk.passage_id, chunk.index, exc)

    if attempted > 0 and len(failures) == attempted:
        raise PipelineRunError(f"every background failed ({len(failures)} failures)")

    manifest = _base_manifest("moose", cfg, gateway, templates)
    manifest["record_count"] = len(records)
    return RunResult(records=records, trace=gateway.trace, manifest=manifest, failures=failures)


def _direct_records_from_chunk(
    chunk: Chunk,
    cfg: PipelineConfig,
    gateway: Gateway,
    templates: TemplateSet,
    id_prefix: str,
) -> list[HypothesisRecord]:
    """One direct-proposal call on a raw chunk; shared by the baseline and the
    random-background ablation."""
    prompt = templates.render(
        "baseline_direct", chunk=chunk.text, n_proposals=str(cfg.proposals_per_call)
    )
    params = GenParams.generation(gateway.model_name)
    response = gateway.generate(prompt, params, "baseline")
    items = parsing.parse_numbered_list(response)
    if not items:
        response = gateway.generate(
            f"{prompt}\n\n{parsing.NUMBERED_LIST_REMINDER}", params, "baseline"
        )
        items = parsing.parse_numbered_list(response)
    if not items:
        raise OpParseError("baseline response contained no numbered hypotheses", response)
    return [
        HypothesisRecord(
            id=f"{id_prefix}.b{j}",
            text=text,
            source_chunk=(chunk.passage_id, chunk.index),
            proposal_index=j,
        )
        for j, text in enumerate(items)
    ]


def run_baseline(
    view: CorpusView,
    cfg: PipelineConfig,
    backend,
    templates: Optional[TemplateSet] = None,
    trace: Optional[RunTrace] = None,
) -> RunResult:
    """Feed each background-pool chunk straight to the proposer, no selection stages."""
    gateway = _as_gateway(backend, trace)
    templates = templates or TemplateSet.load()
    records: list[HypothesisRecord] = []
    failures: list[str] = []
    attempted = 0
    for passage in view.background_pool:
        chunks = chunk_passage(passage, cfg.chunk_size_words)
        if not chunks:
            logger.warning("passage %s has an empty body; skipping", passage.id)
            continue
        for chunk in chunks:
            attempted += 1
            try:
                records.extend(
                    _direct_records_from_chunk(
                        chunk, cfg, gateway, templates, f"{chunk.passage_id}.c{chunk.index}"
                    )
                )
            except (EngineError, GatewayError) as exc:
                failures.append(f"{chunk.passage_id}.c{chunk.index}: {exc}")
                logger.warning("chunk %s.c%d failed: %s", chunk.passage_id, chunk.index, exc)
    if attempted > 0 and len(failures) == attempted:
        raise PipelineRunError(f"every chunk failed ({len(failures)} failures)")
    manifest = _base_manifest("baseline", cfg, gateway, templates)
    manifest["record_count"] = len(records)
    return RunResult(records=records, trace=gateway.trace, manifest=manifest, failures=failures)


def _random_chunk(passage, cfg: PipelineConfig, rng: random.Random) -> Optional[Chunk]:
    chunks = chunk_passage(passage, cfg.chunk_size_words)
    if not chunks:
        logger.warning("passage %s has an empty body; skipping", passage.id)
        return None
    return chunks[rng.randrange(len(chunks))]


def run_ablation(
    view: CorpusView,
    cfg: PipelineConfig,
    backend,
    variant: AblationVariant,
    benchmark: Optional[Sequence[BenchmarkEntry]] = None,
    corpus: Optional[CorpusHandle] = None,
    templates: Optional[TemplateSet] = None,
    trace: Optional[RunTrace] = None,
) -> RunResult:
    """Replace the selection stage per the variant; no feedback mechanisms run."""
    gateway = _as_gateway(backend, trace)
    templates = templates or TemplateSet.load()
    engine = MooseEngine(gateway, templates, cfg, view, survey=None)
    rng = random.Random(cfg.seed)
    records: list[HypothesisRecord] = []
    failures: list[str] = []
    attempted = 0

    if variant in (AblationVariant.GT_BACKGROUND_INSPIRATIONS, AblationVariant.GT_HYPOTHESES_PASSTHROUGH):
        if not benchmark or corpus is None:
            raise ValueError(f"variant {variant.value} requires benchmark annotations and the corpus")

    if variant is AblationVariant.GT_HYPOTHESES_PASSTHROUGH:
        for entry in benchmark:
            records.append(HypothesisRecord(id=f"{entry.paper_id}.gt", text=entry.gt_hypothesis))
        manifest = _base_manifest(f"ablation:{variant.value}", cfg, gateway, templates)
        manifest["record_count"] = len(records)
        return RunResult(records=records, trace=gateway.trace, manifest=manifest)

    if variant is AblationVariant.GT_BACKGROUND_INSPIRATIONS:
        for entry in benchmark:
            attempted += 1
            bg_passage = corpus.passage(entry.gt_background_passage_id)
            bg = Background(text=bg_passage.body, source_chunk=(bg_passage.id, 0))
            gt_passages = [corpus.passage(pid) for pid in entry.gt_inspiration_passage_ids]
            insp = InspirationSet(
                titles=tuple((p.title, None) for p in gt_passages),
                inspirations=tuple((p.body, p.id) for p in gt_passages),
            )
            try:
                records.extend(
                    engine.propose(bg, insp, None, None, cfg.proposals_per_call, id_prefix=entry.paper_id)
                )
            except (EngineError, GatewayError) as exc:
                failures.append(f"{entry.paper_id}: {exc}")
                logger.warning("entry %s failed: %s", entry.paper_id, exc)
    else:
        pool = sorted(view.inspiration_pool, key=lambda p: p.id)
        pool_by_id = {p.id: p for p in pool}
        title_index = build_index([(p.id, p.title) for p in pool]) if pool else None
        for passage in view.background_pool:
            chunk = _random_chunk(passage, cfg, rng)
            if chunk is None:
                continue
            attempted += 1
            prefix = f"{chunk.passage_id}.c{chunk.index}"
            try:
                if variant is AblationVariant.RAND_BACKGROUND:
                    records.extend(_direct_records_from_chunk(chunk, cfg, gateway, templates, prefix))
                    continue
                bg = Background(text=chunk.text, source_chunk=(chunk.passage_id, chunk.index))
                if variant is AblationVariant.RAND_BOTH:
                    n = min(cfg.title_topk, len(pool))
                    picked = sample_random([p.id for p in pool], n, rng.randrange(2**31))
                    chosen = [pool_by_id[pid] for pid in picked]
                elif variant is AblationVariant.BM25_INSPIRATIONS:
                    hits = bm25_topk(title_index, bg.text, cfg.title_topk)
                    if not hits:
                        logger.warning("background %s matched no inspiration titles; skipping", prefix)
                        continue
                    chosen = [pool_by_id[d.passage_id] for d in hits]
                else:  # pragma: no cover - enum is closed
                    raise ValueError(f"unknown ablation variant {variant!r}")
                insp = InspirationSet(
                    titles=tuple((p.title, None) for p in chosen),
                    inspirations=tuple((p.body, p.id) for p in chosen),
                )
                records.extend(
                    engine.propose(bg, insp, None, None, cfg.proposals_per_call, id_prefix=prefix)
                )
            except (EngineError, GatewayError) as exc:
                failures.append(f"{prefix}: {exc}")
                logger.warning("background %s failed: %s", prefix, exc)

    if attempted > 0 and len(failures) == attempted:
        raise PipelineRunError(f"every background failed ({len(failures)} failures)")
    manifest = _base_manifest(f"ablation:{variant.value}", cfg, gateway, templates)
    manifest["record_count"] = len(records)
    return RunResult(records=records, trace=gateway.trace, manifest=manifest, failures=failures)


def write_jsonl(path: Path, lines: Sequence[str]) -> None:
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")


def load_records_jsonl(path: Path) -> list[HypothesisRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(HypothesisRecord.from_dict(json.loads(line)))
    return records
