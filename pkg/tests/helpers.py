"""Shared test builders: synthetic corpora and scripted-backend scripts.

Scripts are generated in exact call order for a clean pipeline run, keyed on
phrases that appear in exactly one prompt template each, so every scripted
response lands in the module it was written for.
"""

from __future__ import annotations

import itertools
import json
from pathlib import Path

from moose.corpus import CorpusHandle, CorpusMode, Passage, Role, select_corpus_view
from moose.engine.records import PastFeedbackMode, PipelineConfig

# One distinctive phrase per prompt template.
MATCHERS = {
    "background": "find a research background",
    "titles": "Candidate titles",
    "inspiration": "extract the single most inspiring",
    "suggestor": "Do not write final hypotheses",
    "propose_initial": "distinct research hypotheses",
    "refine": "Refine the hypothesis",
    "clarity": "is clear and provides",
    "reality": "reflects reality",
    "novelty": "Assess the novelty",
    "inspiration_feedback": "Give feedback on the inspiration titles",
    "baseline": "based only on the passage",
    "judge": "Score:",
}


def make_passages(n_background=2, n_inspiration=3, n_survey=1) -> list[Passage]:
    passages = []
    for i in range(n_background):
        passages.append(
            Passage(
                id=f"b{i:03d}",
                title=f"Market Shift {i}",
                body=f"Shoppers changed habit {i} after a new payment option appeared in stores.",
                role=Role.BACKGROUND,
            )
        )
    for i in range(n_inspiration):
        passages.append(
            Passage(
                id=f"i{i:03d}",
                title=f"Inspiration Topic {i}",
                body=f"A theory {i} says people imitate the visible choices of others around them.",
                role=Role.INSPIRATION,
            )
        )
    for i in range(n_survey):
        passages.append(
            Passage(
                id=f"s{i:03d}",
                title=f"Survey Review {i}",
                body=f"Prior work {i} reviews adoption drivers such as trust ratings and social proof.",
                role=Role.SURVEY,
            )
        )
    return passages


def make_handle(**kwargs) -> CorpusHandle:
    return CorpusHandle(make_passages(**kwargs))


def make_view(handle=None, mode=CorpusMode.STANDARD, **kwargs):
    return select_corpus_view(handle or make_handle(**kwargs), mode)


def titles_response(titles, with_reasons=False) -> str:
    lines = []
    for i, title in enumerate(titles, start=1):
        suffix = f" (reason: angle {i})" if with_reasons else ""
        lines.append(f"{i}. {title}{suffix}")
    return "\n".join(lines)


def build_moose_script(
    n_backgrounds: int,
    cfg: PipelineConfig,
    titles: list[str],
) -> list[tuple[str, str]]:
    """Script for a clean full-pipeline run: every response is unique so trace
    assertions can match texts exactly."""
    entries: list[tuple[str, str]] = []
    seq = itertools.count()
    for b in range(n_backgrounds):
        entries.append(
            (MATCHERS["background"], f"Background: topic {b}\nReason: reason {b}")
        )
        for k in range(cfg.past_iterations):
            if (
                k != 0
                and cfg.enable_past_feedback
                and cfg.past_feedback_mode is PastFeedbackMode.MODEL
            ):
                entries.append((MATCHERS["inspiration_feedback"], f"steer b{b} k{k}"))
            entries.append((MATCHERS["titles"], titles_response(titles, cfg.enable_ff1)))
            for title in titles:
                entries.append(
                    (MATCHERS["inspiration"], f"Inspiration: idea from {title} b{b} k{k}")
                )
            if cfg.enable_ff2:
                entries.append((MATCHERS["suggestor"], f"pairing sketch b{b} k{k}"))
            entries.append(
                (
                    MATCHERS["propose_initial"],
                    "\n".join(
                        f"{j + 1}. Hyp b{b} k{k} p{j} i0 n{next(seq)}"
                        for j in range(cfg.proposals_per_call)
                    ),
                )
            )
            for j in range(cfg.proposals_per_call):
                for it in range(1, cfg.present_iterations + 1):
                    entries.append((MATCHERS["clarity"], f"clarity b{b} k{k} p{j} i{it} n{next(seq)}"))
                    entries.append((MATCHERS["reality"], f"reality b{b} k{k} p{j} i{it} n{next(seq)}"))
                    entries.append((MATCHERS["novelty"], f"novelty b{b} k{k} p{j} i{it} n{next(seq)}"))
                    entries.append(
                        (MATCHERS["refine"], f"1. Hyp b{b} k{k} p{j} i{it} n{next(seq)}")
                    )
    return entries


def build_judge_script(n_records: int, score: int = 4) -> list[tuple[str, str]]:
    return [(MATCHERS["judge"], f"Reasoned assessment. Score: {score}")] * (3 * n_records)


# Marginal distributions of the full 50-entry dataset; used to build a
# dataset-shaped benchmark fixture for histogram checks.
SUBJECT_DISTRIBUTION = {
    "Communication": 5,
    "Psychology": 7,
    "Human Resource Management": 8,
    "Information System": 8,
    "International Business": 5,
    "Management": 6,
    "Marketing": 11,
}
REASONING_COMPLEXITY_DISTRIBUTION = {"easy": 24, "medium": 17, "hard": 9}
ASSOCIATION_COMPLEXITY_DISTRIBUTION = {"easy": 12, "medium": 25, "hard": 13}


def dataset_shaped_benchmark_objs() -> list[dict]:
    """50 synthetic entries whose subject and complexity marginals match the
    full dataset's published distribution."""
    subjects = [s for s, n in SUBJECT_DISTRIBUTION.items() for _ in range(n)]
    reasoning = [c for c, n in REASONING_COMPLEXITY_DISTRIBUTION.items() for _ in range(n)]
    association = [c for c, n in ASSOCIATION_COMPLEXITY_DISTRIBUTION.items() for _ in range(n)]
    return [
        {
            "paper_id": f"ds{i:02d}",
            "publication_link": f"https://example.org/ds/{i}",
            "publication_date": "2023-06-15",
            "subject": subject,
            "gt_hypothesis": f"synthetic hypothesis {i}",
            "gt_background_passage_id": "b000",
            "gt_inspiration_passage_ids": ["i000"],
            "reasoning_process": f"process {i}",
            "reasoning_complexity": r_complexity,
            "association_complexity": a_complexity,
        }
        for i, (subject, r_complexity, a_complexity) in enumerate(
            zip(subjects, reasoning, association)
        )
    ]


def write_script_jsonl(path: Path, entries: list[tuple[str, str]]) -> Path:
    with Path(path).open("w", encoding="utf-8") as fh:
        for match, response in entries:
            fh.write(json.dumps({"match": match, "response": response}) + "\n")
    return Path(path)


def write_corpus_jsonl(path: Path, passages: list[Passage]) -> Path:
    with Path(path).open("w", encoding="utf-8") as fh:
        for passage in passages:
            fh.write(json.dumps(passage.to_dict(), sort_keys=True) + "\n")
    return Path(path)
