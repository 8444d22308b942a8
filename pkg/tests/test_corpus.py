from __future__ import annotations

import json
import random

import pytest

from moose.corpus import (
    BenchmarkEntry,
    CorpusFormatError,
    CorpusHandle,
    CorpusMode,
    CorpusValidationError,
    Passage,
    Role,
    chunk_passage,
    complexity_histogram,
    load_benchmark,
    load_corpus,
    save_corpus,
    select_corpus_view,
    subject_histogram,
)
from helpers import make_handle, make_passages, write_corpus_jsonl


def _write_lines(path, objs):
    with path.open("w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj) + "\n")
    return path


def _passage_obj(pid, role="background", title=None, body="some words here"):
    return {"id": pid, "title": title or f"Title {pid}", "body": body, "role": role}


# ----------------------------------------------------------------------
# loading
# ----------------------------------------------------------------------

def test_load_corpus_counts_roles(tmp_path):
    path = _write_lines(
        tmp_path / "corpus.jsonl",
        [
            _passage_obj("p1", "background"),
            _passage_obj("p2", "background"),
            _passage_obj("p3", "survey"),
        ],
    )
    handle = load_corpus(path)
    counts = handle.role_counts()
    assert counts[Role.BACKGROUND] == 2
    assert counts[Role.INSPIRATION] == 0
    assert counts[Role.SURVEY] == 1


def test_load_corpus_duplicate_id_names_offender(tmp_path):
    path = _write_lines(
        tmp_path / "corpus.jsonl",
        [_passage_obj("p1"), _passage_obj("p1")],
    )
    with pytest.raises(CorpusValidationError, match="p1"):
        load_corpus(path)


def test_load_corpus_empty_title_rejected(tmp_path):
    path = _write_lines(tmp_path / "corpus.jsonl", [_passage_obj("p1", title="   ")])
    with pytest.raises(CorpusValidationError, match="title"):
        load_corpus(path)


def test_load_corpus_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "corpus.jsonl"
    path.write_text(json.dumps(_passage_obj("p1")) + "\nnot json at all\n")
    with pytest.raises(CorpusFormatError, match="line 2"):
        load_corpus(path)


def test_load_corpus_unknown_role_rejected(tmp_path):
    path = _write_lines(tmp_path / "corpus.jsonl", [_passage_obj("p1", role="opinion")])
    with pytest.raises(CorpusValidationError, match="role"):
        load_corpus(path)


def test_lookup_by_id_and_exact_title(tmp_path):
    handle = make_handle()
    assert handle.passage("b000").role is Role.BACKGROUND
    assert handle.passage_by_title("Inspiration Topic 1").id == "i001"
    assert handle.passage_by_title("No Such Title") is None
    with pytest.raises(KeyError):
        handle.passage("zzz")


def test_duplicate_title_resolves_to_ascending_id():
    handle = CorpusHandle(
        [
            Passage("i2", "Same Title", "body two", Role.INSPIRATION),
            Passage("i1", "Same Title", "body one", Role.INSPIRATION),
        ]
    )
    assert handle.passage_by_title("Same Title").id == "i1"


def test_round_trip_save_load(tmp_path):
    handle = make_handle(n_background=3, n_inspiration=4, n_survey=2)
    out = tmp_path / "copy.jsonl"
    save_corpus(handle, out)
    reloaded = load_corpus(out)
    assert {p.id for p in reloaded.passages()} == {p.id for p in handle.passages()}
    assert reloaded.passages() == handle.passages()


# ----------------------------------------------------------------------
# chunking
# ----------------------------------------------------------------------

def _passage_with_words(n_words):
    body = " ".join(f"w{i}" for i in range(n_words))
    return Passage("p", "Ten Words", body, Role.BACKGROUND)


def test_chunk_sizes_greedy():
    chunks = chunk_passage(_passage_with_words(10), chunk_size_words=4)
    assert [len(c.text.split()) for c in chunks] == [4, 4, 2]
    assert [c.index for c in chunks] == [0, 1, 2]


def test_chunk_oversized_limit_is_identity():
    passage = _passage_with_words(4)
    chunks = chunk_passage(passage, chunk_size_words=100)
    assert len(chunks) == 1
    assert chunks[0].text == " ".join(passage.body.split())


def test_chunk_thousand_word_body_reconstructs():
    passage = _passage_with_words(1000)
    chunks = chunk_passage(passage, chunk_size_words=300)
    assert len(chunks) == 4
    assert " ".join(c.text for c in chunks) == " ".join(passage.body.split())


def test_chunk_empty_body_gives_no_chunks():
    assert chunk_passage(Passage("p", "T", "   ", Role.BACKGROUND), 10) == []


def test_chunk_reconstruction_property_random_bodies():
    rng = random.Random(7)
    for trial in range(50):
        n_words = rng.randrange(0, 400)
        words = [f"tok{rng.randrange(1000)}" for _ in range(n_words)]
        sep = rng.choice([" ", "  ", "\n", " \t "])
        passage = Passage("p", "T", sep.join(words), Role.BACKGROUND)
        size = rng.randrange(1, 64)
        chunks = chunk_passage(passage, size)
        assert " ".join(c.text for c in chunks) == " ".join(passage.body.split())
        assert all(len(c.text.split()) <= size for c in chunks)
        assert [c.index for c in chunks] == list(range(len(chunks)))


# ----------------------------------------------------------------------
# corpus views
# ----------------------------------------------------------------------

def test_standard_view_pools():
    view = select_corpus_view(make_handle(n_background=2, n_inspiration=3), CorpusMode.STANDARD)
    assert len(view.background_pool) == 2
    assert len(view.inspiration_pool) == 3
    assert all(p.role is Role.BACKGROUND for p in view.background_pool)


def test_randomized_view_swaps_and_widens_pools():
    view = select_corpus_view(make_handle(n_background=2, n_inspiration=3), CorpusMode.RANDOMIZED)
    assert len(view.background_pool) == 3
    assert all(p.role is Role.INSPIRATION for p in view.background_pool)
    assert len(view.inspiration_pool) == 5


def test_randomized_view_without_inspirations_fails():
    handle = make_handle(n_background=2, n_inspiration=0)
    with pytest.raises(CorpusValidationError):
        select_corpus_view(handle, CorpusMode.RANDOMIZED)


def test_standard_view_without_backgrounds_fails():
    handle = make_handle(n_background=0, n_inspiration=2)
    with pytest.raises(CorpusValidationError):
        select_corpus_view(handle, CorpusMode.STANDARD)


# ----------------------------------------------------------------------
# benchmark
# ----------------------------------------------------------------------

def _entry_obj(paper_id="e1", background="b000", inspirations=("i000",), **over):
    obj = {
        "paper_id": paper_id,
        "publication_link": "https://example.org/paper",
        "publication_date": "2023-06-01",
        "subject": "Marketing",
        "gt_hypothesis": "Visible adoption by peers increases willingness to try new payment tech.",
        "gt_background_passage_id": background,
        "gt_inspiration_passage_ids": list(inspirations),
        "reasoning_process": "Connect imitation theory to payment adoption.",
        "reasoning_complexity": "easy",
        "association_complexity": "medium",
    }
    obj.update(over)
    return obj


def test_load_benchmark_resolves_references(tmp_path):
    corpus_path = write_corpus_jsonl(tmp_path / "corpus.jsonl", make_passages())
    handle = load_corpus(corpus_path)
    bench = _write_lines(tmp_path / "bench.jsonl", [_entry_obj()])
    entries = load_benchmark(bench, handle)
    assert len(entries) == 1
    assert entries[0].subject == "Marketing"


def test_load_benchmark_dangling_reference_fails(tmp_path):
    handle = make_handle()
    bench = _write_lines(tmp_path / "bench.jsonl", [_entry_obj(background="nope")])
    with pytest.raises(CorpusValidationError, match="nope"):
        load_benchmark(bench, handle)


def test_load_benchmark_role_mismatch_fails(tmp_path):
    handle = make_handle()
    bench = _write_lines(tmp_path / "bench.jsonl", [_entry_obj(inspirations=["b000"])])
    with pytest.raises(CorpusValidationError, match="role"):
        load_benchmark(bench, handle)


def test_load_benchmark_old_date_warns_not_fails(tmp_path, caplog):
    handle = make_handle()
    bench = _write_lines(
        tmp_path / "bench.jsonl", [_entry_obj(publication_date="2019-01-01")]
    )
    with caplog.at_level("WARNING"):
        entries = load_benchmark(bench, handle)
    assert len(entries) == 1
    assert any("2019-01-01" in rec.message for rec in caplog.records)


def test_benchmark_entry_requires_one_inspiration():
    with pytest.raises(CorpusValidationError, match="inspiration"):
        BenchmarkEntry(
            paper_id="e",
            publication_link="x",
            publication_date="2023-01-02",
            subject="Psychology",
            gt_hypothesis="h",
            gt_background_passage_id="b000",
            gt_inspiration_passage_ids=(),
            reasoning_process="r",
            reasoning_complexity="easy",
            association_complexity="hard",
        )


def test_subject_and_complexity_histograms(tmp_path):
    handle = make_handle()
    objs = [
        _entry_obj("e1", subject="Marketing"),
        _entry_obj("e2", subject="Marketing", reasoning_complexity="hard"),
        _entry_obj("e3", subject="Psychology", association_complexity="easy"),
    ]
    bench = _write_lines(tmp_path / "bench.jsonl", objs)
    entries = load_benchmark(bench, handle)
    assert subject_histogram(entries)["Marketing"] == 2
    assert subject_histogram(entries)["Psychology"] == 1
    hists = complexity_histogram(entries)
    assert hists["reasoning"]["easy"] == 2
    assert hists["reasoning"]["hard"] == 1
    assert hists["association"]["medium"] == 2


def test_dataset_shaped_fixture_matches_published_distribution(tmp_path):
    from helpers import dataset_shaped_benchmark_objs

    handle = make_handle()
    bench = _write_lines(tmp_path / "bench.jsonl", dataset_shaped_benchmark_objs())
    entries = load_benchmark(bench, handle)
    assert len(entries) == 50
    subjects = subject_histogram(entries)
    assert subjects["Marketing"] == 11
    assert subjects["Psychology"] == 7
    assert subjects["Human Resource Management"] == 8
    assert subjects["Information System"] == 8
    assert subjects["International Business"] == 5
    assert subjects["Management"] == 6
    assert subjects["Communication"] == 5
    hists = complexity_histogram(entries)
    assert dict(hists["reasoning"]) == {"easy": 24, "medium": 17, "hard": 9}
    assert dict(hists["association"]) == {"easy": 12, "medium": 25, "hard": 13}
