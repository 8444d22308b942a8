"""Acceptance criteria for the whole package, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion. Everything here runs with zero network access; the only
networked check (criterion 10) is a manual smoke test that stays skipped
unless live credentials are supplied explicitly.
"""

from __future__ import annotations

import functools
import json
import os
import random
import time
from pathlib import Path

import pytest

from moose.cli import main
from moose.corpus import select_corpus_view
from moose.engine.ops import NO_SURVEY_NOTICE
from moose.engine.parsing import parse_numbered_list
from moose.engine.records import PipelineConfig
from moose.engine.pipeline import run_pipeline
from moose.evaluation import (
    ConsistencyReport,
    GroupBy,
    ScoreTriple,
    ScoredRecord,
    aggregate,
    consistency,
    render_table,
)
from moose.gateway import scripted_backend
from moose.presets import resolve_preset
from moose.retrieval import build_index, build_survey_index, bm25_topk
from helpers import (
    MATCHERS,
    build_judge_script,
    build_moose_script,
    make_handle,
    write_script_jsonl,
)
from oracles import bm25_brute_scores, bm25_brute_topk

FIXTURES = Path(__file__).parent / "fixtures"
TITLES = ["Inspiration Topic 0", "Inspiration Topic 1"]


def criterion(number, description):
    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except pytest.skip.Exception:
                print(f"criterion {number:02d} SKIP  {description}")
                raise
            except BaseException:
                print(f"criterion {number:02d} FAIL  {description}")
                raise
            print(f"criterion {number:02d} PASS  {description}")

        return inner

    return wrap


def _scripted_run(cfg, n_backgrounds, titles=TITLES):
    handle = make_handle(n_background=n_backgrounds)
    view = select_corpus_view(handle, cfg.corpus_mode)
    script = build_moose_script(n_backgrounds, cfg, titles)
    return run_pipeline(view, None, cfg, scripted_backend(script))


@criterion(1, "loop-count law: 50 backgrounds x 4 proposals x 5 iterations = 1000 records")
def test_criterion_01_loop_count_law():
    cfg = PipelineConfig(past_iterations=1, present_iterations=4, proposals_per_call=4)
    assert cfg.past_iterations * cfg.proposals_per_call == 4
    start = time.perf_counter()
    result = _scripted_run(cfg, n_backgrounds=50)
    elapsed = time.perf_counter() - start
    assert len(result.records) == 1000
    assert elapsed < 10.0, f"took {elapsed:.1f}s"


@criterion(2, "provenance closure over 200 records: chains, shared inspirations, traced feedback")
def test_criterion_02_provenance_closure():
    cfg = PipelineConfig(past_iterations=1, present_iterations=4, proposals_per_call=4)
    result = _scripted_run(cfg, n_backgrounds=10)
    records = result.records
    assert len(records) >= 200
    by_id = {r.id: r for r in records}
    trace = result.trace.records()
    checker_responses = {
        tag: {r.response for r in trace if r.module_tag == tag}
        for tag in ("clarity_checker", "reality_checker", "novelty_checker")
    }
    proposer_calls = [r for r in trace if r.module_tag == "proposer"]
    leaves = [r for r in records if r.present_iteration == 4]
    assert len(leaves) == 40
    for leaf in leaves:
        node = leaf
        for _ in range(4):
            assert node.feedback_used is not None
            assert node.feedback_used.clarity in checker_responses["clarity_checker"]
            assert node.feedback_used.reality in checker_responses["reality_checker"]
            assert node.feedback_used.novelty in checker_responses["novelty_checker"]
            # the producing refine call saw the parent text and the full bundle
            producing = [c for c in proposer_calls if node.text in c.response]
            assert len(producing) == 1
            parent = by_id[node.parent_id]
            for piece in (
                parent.text,
                node.feedback_used.clarity,
                node.feedback_used.reality,
                node.feedback_used.novelty,
            ):
                assert piece in producing[0].prompt
            node = parent
        assert node.present_iteration == 0
        assert node.parent_id is None and node.feedback_used is None
        assert node.inspiration_set == leaf.inspiration_set


@criterion(3, "ablation-flag soundness: no-ff2 / no-survey / base produce clean traces")
def test_criterion_03_ablation_flag_soundness():
    handle = make_handle(n_background=2, n_survey=2)

    def run_preset(name):
        _, cfg = resolve_preset(name)
        view = select_corpus_view(handle, cfg.corpus_mode)
        n_bg = len(view.background_pool)
        script = build_moose_script(n_bg, cfg, TITLES)
        survey = build_survey_index(view.survey_pool, cfg.chunk_size_words)
        return run_pipeline(view, survey, cfg, scripted_backend(script))

    no_ff2 = run_preset("moose-no-ff2")
    assert no_ff2.trace.tagged("suggestor") == []

    no_survey = run_preset("moose-no-survey")
    novelty_prompts = [r.prompt for r in no_survey.trace.tagged("novelty_checker")]
    assert novelty_prompts
    for prompt in novelty_prompts:
        literature = prompt.split("Possibly related literature:")[1].split("Point out")[0]
        assert NO_SURVEY_NOTICE in literature
        assert "#" not in literature  # survey chunk ids look like s000#0

    base = run_preset("moose-base")
    assert base.trace.tagged("inspiration_feedback") == []
    for record in base.trace.tagged("inspiration_title_finder"):
        assert "less related" not in record.prompt


@criterion(4, "BM25 parity with a brute-force oracle over 500 randomized cases")
def test_criterion_04_bm25_oracle_parity():
    rng = random.Random(20240501)
    vocab = [f"term{i}" for i in range(18)]
    start = time.perf_counter()
    for _ in range(500):
        n_docs = rng.randrange(1, 21)
        docs = [
            (f"d{i:02d}", " ".join(rng.choices(vocab, k=rng.randrange(1, 10))))
            for i in range(n_docs)
        ]
        query = " ".join(rng.choices(vocab, k=rng.randrange(1, 9)))
        index = build_index(docs)
        actual = bm25_topk(index, query, n_docs)
        expected = bm25_brute_topk(docs, query, n_docs)
        assert [d.passage_id for d in actual] == [i for i, _ in expected]
        for got, (_, want) in zip(actual, expected):
            assert abs(got.score - want) <= 1e-9
        brute = bm25_brute_scores(docs, query)
        for doc in actual:
            assert abs(doc.score - brute[doc.passage_id]) <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.1f}s"


@criterion(5, "consistency metric: exact difference mapping, soft >= hard, identity")
def test_criterion_05_consistency_metric():
    for diff, expected in [(0, 1.00), (1, 0.75), (2, 0.50), (3, 0.25), (4, 0.00)]:
        report = consistency([1], [1 + diff])
        assert report.soft == expected
        assert report.hard == (1.0 if diff == 0 else 0.0)
    rng = random.Random(7)
    for _ in range(1000):
        n = rng.randrange(1, 20)
        a = [rng.randrange(1, 6) for _ in range(n)]
        b = [rng.randrange(1, 6) for _ in range(n)]
        report = consistency(a, b)
        assert report.soft >= report.hard
        assert consistency(a, a) == ConsistencyReport(hard=1.0, soft=1.0, n=n)


@criterion(6, "aggregation fidelity: averaged-over-iterations means match hand computation")
def test_criterion_06_aggregation_fidelity():
    def triple(v, n, h):
        return ScoreTriple(validness=v, novelty=n, helpfulness=h)

    rows = [
        ScoredRecord("r1", "m", 0, triple(4, 3, 4)),
        ScoredRecord("r2", "m", 0, triple(4, 5, 4)),
        ScoredRecord("r3", "m", 1, triple(3, 2, 5)),
        ScoredRecord("r4", "m", 2, triple(5, 4, 4)),
        ScoredRecord("r5", "m", 2, triple(3, 2, 2)),
        ScoredRecord("r6", "m", 2, triple(4, 3, 3)),
        ScoredRecord("r7", "m", 3, triple(2, 5, 3)),
        ScoredRecord("r8", "m", 4, triple(5, 5, 5)),
        ScoredRecord("r9", "m", 4, triple(4, 4, 4)),
    ]
    # Hand computation: per-iteration means are (4,4,4), (3,2,5), (4,3,3),
    # (2,5,3), (4.5,4.5,4.5); their unweighted average is (3.5, 3.7, 3.9).
    (averaged,) = aggregate(rows, GroupBy.METHOD_AVERAGED_OVER_ITERATIONS)
    assert f"{averaged.mean.validness:.3f}" == "3.500"
    assert f"{averaged.mean.novelty:.3f}" == "3.700"
    assert f"{averaged.mean.helpfulness:.3f}" == "3.900"
    # and it differs from the record-weighted method mean (34/9 = 3.778)
    (plain,) = aggregate(rows, GroupBy.METHOD)
    assert f"{plain.mean.validness:.3f}" == "3.778"
    # rendering keeps the 3-decimal fixed width
    table = render_table(
        [s for s in aggregate([ScoredRecord("x", "b", 0, triple(3.954, 2.483, 3.489))], GroupBy.METHOD)]
    )
    assert "3.954" in table and "2.483" in table and "3.489" in table


@criterion(7, "determinism: two identical scripted runs give byte-identical artifacts")
def test_criterion_07_determinism(tmp_path):
    corpus = str(FIXTURES / "corpus.jsonl")
    _, cfg = resolve_preset("moose-full")
    outputs = []
    for name in ("d1", "d2"):
        script = write_script_jsonl(
            tmp_path / f"{name}.jsonl",
            build_moose_script(4, cfg, ["Herding Effect", "Privacy Calculus Theory"]),
        )
        out = tmp_path / name
        assert main(
            ["run", "--preset", "moose-full", "--corpus", corpus, "--out", str(out),
             "--backend", "scripted", "--script", str(script), "--seed", "11"]
        ) == 0
        n_records = len((out / "hypotheses.jsonl").read_text().splitlines())
        judge_script = write_script_jsonl(
            tmp_path / f"{name}-judge.jsonl", build_judge_script(n_records, score=4)
        )
        assert main(
            ["judge", "--run", str(out), "--backend", "scripted", "--script", str(judge_script)]
        ) == 0
        outputs.append(out)
    first, second = outputs
    assert (first / "hypotheses.jsonl").read_bytes() == (second / "hypotheses.jsonl").read_bytes()
    assert (first / "scores.jsonl").read_bytes() == (second / "scores.jsonl").read_bytes()


@criterion(8, "parser robustness: fuzzed numbered lists parse fully; one re-ask on failure")
def test_criterion_08_parser_robustness():
    rng = random.Random(808)
    prefixes = ["{n}. ", "{n}) ", "{n}: ", "Hypothesis {n}: "]
    for _ in range(300):
        items = [f"claim {i} marker{rng.randrange(10_000)}" for i in range(rng.randrange(1, 8))]
        numbers = list(range(1, len(items) + 1))
        rng.shuffle(numbers)
        lines = []
        if rng.random() < 0.6:
            lines += ["Certainly, here are the requested items:", ""]
        for number, item in zip(numbers, items):
            lines.append(rng.choice(prefixes).format(n=number) + item)
        if rng.random() < 0.6:
            lines += ["", "Let me know if these work."]
        assert parse_numbered_list("\n".join(lines)) == items

    # a malformed response triggers exactly one re-ask, then parses
    from moose.engine.ops import MooseEngine
    from moose.engine.prompts import TemplateSet
    from moose.engine.records import Background, InspirationSet
    from moose.gateway import Gateway, RunTrace

    view = select_corpus_view(make_handle(), PipelineConfig().corpus_mode)
    gateway = Gateway(
        scripted_backend(
            [
                (MATCHERS["propose_initial"], "I cannot fit this into a list."),
                (MATCHERS["propose_initial"], "1. recovered claim"),
            ]
        ),
        trace=RunTrace(),
    )
    engine = MooseEngine(gateway, TemplateSet.load(), PipelineConfig(), view)
    bg = Background(text="t", source_chunk=("b000", 0))
    insp = InspirationSet(titles=(("Inspiration Topic 0", None),), inspirations=(("x", "i000"),))
    records = engine.propose(bg, insp, None, None, 1, id_prefix="p")
    assert [r.text for r in records] == ["recovered claim"]
    calls = gateway.trace.tagged("proposer")
    assert len(calls) == 2
    assert "Reminder" in calls[1].prompt and "Reminder" not in calls[0].prompt


@criterion(9, "past-feedback heuristic steers later rounds only, quoting prior titles")
def test_criterion_09_past_feedback_heuristic():
    _, cfg = resolve_preset("moose-full")
    result = _scripted_run(cfg, n_backgrounds=1)
    title_prompts = [r.prompt for r in result.trace.tagged("inspiration_title_finder")]
    assert len(title_prompts) == cfg.past_iterations == 2
    first, second = title_prompts
    assert "less related" not in first
    assert "less related" in second
    for title in TITLES:
        assert title in second
    assert result.trace.tagged("inspiration_feedback") == []


@criterion(10, "manual live smoke: one background through the full pipeline (not CI)")
def test_criterion_10_live_smoke_manual():
    if os.environ.get("MOOSE_LIVE_SMOKE") != "1":
        pytest.skip("manual check: set MOOSE_LIVE_SMOKE=1 plus provider credentials")
    if os.environ.get("PROVIDER_A_API_KEY"):
        backend_flag = "provider-a"
    elif os.environ.get("PROVIDER_B_API_KEY"):
        backend_flag = "provider-b"
    else:
        pytest.skip("manual check: no provider credentials in the environment")
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "live"
        code = main(
            ["run", "--preset", "moose-full", "--corpus", str(FIXTURES / "corpus.jsonl"),
             "--out", str(out), "--backend", backend_flag,
             "--present-iters", "1", "--rate-limit", "2"]
        )
        assert code == 0
        lines = (out / "hypotheses.jsonl").read_text().splitlines()
        assert lines
        for line in lines:
            record = json.loads(line)
            assert record["text"].strip()
