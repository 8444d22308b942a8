"""Rubric-based judging, score aggregation, and rater-consistency metrics.

Hypotheses are scored 1-5 on three aspects (validness, novelty, helpfulness),
each aspect in its own judge call with the full five-level rubric embedded in
the prompt and temperature pinned to 0. Aggregation renders 3-decimal means
grouped by method, by refinement iteration, or by method averaged over
iterations. Consistency between two score lists is reported both hard
(exact-match rate) and soft (absolute difference 0..4 mapped to
1.00/0.75/0.50/0.25/0.00).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .gateway import Gateway, GenParams
from .engine import parsing


class Aspect(str, Enum):
    VALIDNESS = "validness"
    NOVELTY = "novelty"
    HELPFULNESS = "helpfulness"


@dataclass(frozen=True)
class ScoreTriple:
    validness: float
    novelty: float
    helpfulness: float

    def __post_init__(self) -> None:
        for aspect in Aspect:
            value = getattr(self, aspect.value)
            if not 1.0 <= value <= 5.0:
                raise ValueError(f"{aspect.value} score {value} outside [1, 5]")

    def get(self, aspect: Aspect) -> float:
        return getattr(self, aspect.value)

    def to_dict(self) -> dict:
        return {"validness": self.validness, "novelty": self.novelty, "helpfulness": self.helpfulness}


@dataclass(frozen=True)
class Rubric:
    aspect: Aspect
    level_descriptions: dict[int, str]

    def __post_init__(self) -> None:
        if sorted(self.level_descriptions) != [1, 2, 3, 4, 5]:
            raise ValueError(f"rubric for {self.aspect.value} must describe exactly levels 1..5")


DEFAULT_RUBRICS: dict[Aspect, Rubric] = {
    Aspect.VALIDNESS: Rubric(
        aspect=Aspect.VALIDNESS,
        level_descriptions={
            5: "The hypothesis completely reflects the reality.",
            4: "The hypothesis almost completely reflects the reality, but has only one or "
            "two minor conflictions that can be easily modified.",
            3: "The hypothesis has at least one moderate conflict or several minor conflicts.",
            2: "The hypothesis has at least one major confliction with the reality or only "
            "establishes in very rare circumstances that are not mentioned in this hypothesis.",
            1: "The hypothesis completely violates the reality.",
        },
    ),
    Aspect.NOVELTY: Rubric(
        aspect=Aspect.NOVELTY,
        level_descriptions={
            5: "The hypothesis is completely novel and has not been proposed by any existing "
            "literature.",
            4: "The main argument or several sub-arguments of the hypothesis are novel.",
            3: "The main argument is not novel, only one or two sub-arguments appear to be novel.",
            2: "The full hypothesis is not novel, but the way it combines the topics can be "
            "inspiring for human researchers.",
            1: "The hypothesis is not novel at all and not inspiring for human researchers.",
        },
    ),
    Aspect.HELPFULNESS: Rubric(
        aspect=Aspect.HELPFULNESS,
        level_descriptions={
            5: "The hypothesis is novel, valid, clear, and specific enough that it is itself a "
            "mature research hypothesis, and human researchers can directly adopt it for "
            "publication with no modifications needed.",
            4: "The hypothesis is novel enough and can be directly adopted by human researchers "
            "for publication after minor modifications.",
            3: "The hypothesis should be largely modified or reconstructed by human researchers "
            "to adopt it.",
            2: "Modifying this hypothesis might not deserve the efforts, but a small part of "
            "this hypothesis is inspiring for human researchers to develop a new hypothesis.",
            1: "The hypothesis is not helpful and not inspiring at all.",
        },
    ),
}

JUDGE_PROMPT = """\
You are scoring a machine-generated social science research hypothesis on one aspect, \
using a 5-point scale.

Aspect: {aspect}

Scale:
{scale}

Hypothesis:
{hypothesis}

Briefly justify your score, then end your reply with a line in exactly this format:
Score: <1-5>
"""

SCORE_REMINDER = 'Reminder: end your reply with a line in exactly this format: "Score: <1-5>".'


class JudgeError(RuntimeError):
    pass


class JudgeParseError(JudgeError):
    def __init__(self, message: str, raw_response: str):
        super().__init__(f"{message}; raw response: {raw_response!r}")
        self.raw_response = raw_response


def judge(
    hypothesis_text: str,
    rubric: Rubric,
    gateway: Gateway,
    params: Optional[GenParams] = None,
) -> int:
    """Score one hypothesis on one aspect. Temperature must be 0."""
    if params is None:
        params = GenParams.judge(gateway.model_name)
    if params.temperature != 0.0:
        raise ValueError("judge calls require temperature 0.0")
    scale = "\n".join(
        f"{level} - {rubric.level_descriptions[level]}" for level in range(5, 0, -1)
    )
    prompt = JUDGE_PROMPT.format(
        aspect=rubric.aspect.value, scale=scale, hypothesis=hypothesis_text
    )
    tag = f"judge_{rubric.aspect.value}"
    response = gateway.generate(prompt, params, tag)
    score = parsing.parse_score(response)
    if score is None:
        response = gateway.generate(f"{prompt}\n{SCORE_REMINDER}", params, tag)
        score = parsing.parse_score(response)
    if score is None:
        raise JudgeParseError(f"judge gave no 'Score:' line for {rubric.aspect.value}", response)
    return score


def judge_triple(
    hypothesis_text: str,
    gateway: Gateway,
    rubrics: Optional[dict[Aspect, Rubric]] = None,
    params: Optional[GenParams] = None,
) -> ScoreTriple:
    """Three judge calls, one per aspect."""
    rubrics = rubrics or DEFAULT_RUBRICS
    scores = {aspect: judge(hypothesis_text, rubrics[aspect], gateway, params) for aspect in Aspect}
    return ScoreTriple(
        validness=scores[Aspect.VALIDNESS],
        novelty=scores[Aspect.NOVELTY],
        helpfulness=scores[Aspect.HELPFULNESS],
    )


# ----------------------------------------------------------------------
# aggregation
# ----------------------------------------------------------------------

class GroupBy(str, Enum):
    METHOD = "method"
    PRESENT_ITERATION = "iteration"
    METHOD_AVERAGED_OVER_ITERATIONS = "method-averaged"


@dataclass(frozen=True)
class ScoredRecord:
    record_id: str
    method: str
    present_iteration: int
    scores: ScoreTriple


@dataclass(frozen=True)
class GroupStats:
    key: str
    n: int
    mean: ScoreTriple


def _mean_triple(triples: Sequence[ScoreTriple]) -> ScoreTriple:
    n = len(triples)
    return ScoreTriple(
        validness=sum(t.validness for t in triples) / n,
        novelty=sum(t.novelty for t in triples) / n,
        helpfulness=sum(t.helpfulness for t in triples) / n,
    )


def aggregate(rows: Sequence[ScoredRecord], group_by: GroupBy) -> list[GroupStats]:
    """Mean scores per group.

    METHOD takes the plain mean of a method's records. PRESENT_ITERATION groups
    across methods by refinement iteration. METHOD_AVERAGED_OVER_ITERATIONS
    first averages within each iteration and then averages the per-iteration
    means, so iterations weigh equally even with uneven record counts.
    """
    if not rows:
        raise ValueError("nothing to aggregate")
    stats: list[GroupStats] = []
    if group_by is GroupBy.METHOD:
        for method in sorted({r.method for r in rows}):
            group = [r.scores for r in rows if r.method == method]
            stats.append(GroupStats(key=method, n=len(group), mean=_mean_triple(group)))
    elif group_by is GroupBy.PRESENT_ITERATION:
        for iteration in sorted({r.present_iteration for r in rows}):
            group = [r.scores for r in rows if r.present_iteration == iteration]
            stats.append(GroupStats(key=str(iteration), n=len(group), mean=_mean_triple(group)))
    elif group_by is GroupBy.METHOD_AVERAGED_OVER_ITERATIONS:
        for method in sorted({r.method for r in rows}):
            method_rows = [r for r in rows if r.method == method]
            iteration_means = [
                _mean_triple([r.scores for r in method_rows if r.present_iteration == it])
                for it in sorted({r.present_iteration for r in method_rows})
            ]
            stats.append(
                GroupStats(key=method, n=len(method_rows), mean=_mean_triple(iteration_means))
            )
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown grouping {group_by!r}")
    return stats


def render_table(stats: Sequence[GroupStats]) -> str:
    key_width = max(5, max((len(s.key) for s in stats), default=5))
    header = f"{'group':<{key_width}}  {'n':>6}  validness  novelty  helpfulness"
    lines = [header, "-" * len(header)]
    for s in stats:
        lines.append(
            f"{s.key:<{key_width}}  {s.n:>6}  {s.mean.validness:>9.3f}  "
            f"{s.mean.novelty:>7.3f}  {s.mean.helpfulness:>11.3f}"
        )
    return "\n".join(lines)


def render_csv(stats: Sequence[GroupStats]) -> str:
    lines = ["group,n,validness,novelty,helpfulness"]
    for s in stats:
        lines.append(
            f"{s.key},{s.n},{s.mean.validness:.3f},{s.mean.novelty:.3f},{s.mean.helpfulness:.3f}"
        )
    return "\n".join(lines)


# ----------------------------------------------------------------------
# consistency
# ----------------------------------------------------------------------

SOFT_CONSISTENCY_BY_DIFF = {0: 1.00, 1: 0.75, 2: 0.50, 3: 0.25, 4: 0.00}


@dataclass(frozen=True)
class ConsistencyReport:
    hard: float
    soft: float
    n: int


def round_half_up(value: float) -> int:
    """3.5 -> 4; used to integerize fractional expert scores before consistency."""
    return int(math.floor(value + 0.5))


def _check_scores(name: str, values: Sequence[float]) -> list[int]:
    out = []
    for value in values:
        if isinstance(value, bool) or float(value) != int(value):
            raise ValueError(f"{name} contains non-integer score {value!r}")
        score = int(value)
        if not 1 <= score <= 5:
            raise ValueError(f"{name} contains score {score} outside 1..5")
        out.append(score)
    return out


def consistency(a: Sequence[float], b: Sequence[float]) -> ConsistencyReport:
    """Hard and soft agreement between two equal-length lists of 1..5 scores."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("cannot compute consistency of empty score lists")
    xs = _check_scores("a", a)
    ys = _check_scores("b", b)
    diffs = [abs(x - y) for x, y in zip(xs, ys)]
    hard = sum(1 for d in diffs if d == 0) / len(diffs)
    soft = sum(SOFT_CONSISTENCY_BY_DIFF[d] for d in diffs) / len(diffs)
    return ConsistencyReport(hard=hard, soft=soft, n=len(diffs))


# ----------------------------------------------------------------------
# expert score import
# ----------------------------------------------------------------------

EXPERT_CSV_HEADER = ["record_id", "rater_id", "validness", "novelty", "helpfulness"]


@dataclass(frozen=True)
class ExpertScore:
    record_id: str
    rater_id: str
    scores: ScoreTriple


def import_expert_scores(path: str | Path) -> list[ExpertScore]:
    """Read the expert CSV (record_id,rater_id,validness,novelty,helpfulness)."""
    rows: list[ExpertScore] = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EXPERT_CSV_HEADER:
            raise ValueError(f"expected header {','.join(EXPERT_CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ValueError(f"line {lineno}: expected 5 fields, got {len(row)}")
            try:
                values = [float(v) for v in row[2:]]
            except ValueError:
                raise ValueError(f"line {lineno}: scores must be numeric") from None
            for value in values:
                if not 1.0 <= value <= 5.0:
                    raise ValueError(f"line {lineno}: score {value} outside [1, 5]")
            rows.append(
                ExpertScore(
                    record_id=row[0],
                    rater_id=row[1],
                    scores=ScoreTriple(validness=values[0], novelty=values[1], helpfulness=values[2]),
                )
            )
    return rows


def mean_by_record(rows: Sequence[ExpertScore]) -> dict[str, ScoreTriple]:
    """Average each record's scores across the raters that scored it."""
    by_record: dict[str, list[ScoreTriple]] = {}
    for row in rows:
        by_record.setdefault(row.record_id, []).append(row.scores)
    return {record_id: _mean_triple(triples) for record_id, triples in by_record.items()}


def group_mean_table(rows: Sequence[ExpertScore], group_size: int = 8) -> list[ScoreTriple]:
    """Positional group means: each rater's rows split into consecutive blocks of
    ``group_size``, all blocks stacked, then averaged per within-group position."""
    if group_size < 1:
        raise ValueError("group_size must be >= 1")
    by_rater: dict[str, list[ScoreTriple]] = {}
    for row in rows:
        by_rater.setdefault(row.rater_id, []).append(row.scores)
    columns: list[list[ScoreTriple]] = [[] for _ in range(group_size)]
    for rater_id, triples in sorted(by_rater.items()):
        if len(triples) % group_size != 0:
            raise ValueError(
                f"rater {rater_id!r} scored {len(triples)} records, "
                f"not a multiple of group size {group_size}"
            )
        for i, triple in enumerate(triples):
            columns[i % group_size].append(triple)
    if not any(columns):
        raise ValueError("no expert rows to group")
    return [_mean_triple(column) for column in columns]
