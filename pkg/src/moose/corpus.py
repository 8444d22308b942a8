"""Raw web corpus: loading, validation, chunking, and role-based views.

The corpus is a UTF-8 JSONL file, one passage per line, with keys
{id, title, body, role, source_url?, date?} and role one of
"background" | "inspiration" | "survey". Benchmark annotations live in a
second JSONL file whose entries reference passage ids in the corpus.

A loaded ``CorpusHandle`` is immutable and safe for concurrent reads.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE_WORDS = 1000

# Benchmark entries published before this date trigger a warning only; the
# cutoff matters for the real dataset, not for synthetic fixtures.
MIN_PUBLICATION_DATE = date(2023, 1, 1)

SUBJECTS = (
    "Communication",
    "Psychology",
    "Human Resource Management",
    "Information System",
    "International Business",
    "Management",
    "Marketing",
)

COMPLEXITY_LEVELS = ("easy", "medium", "hard")


class CorpusError(ValueError):
    """Base class for corpus file problems."""


class CorpusFormatError(CorpusError):
    """A line could not be parsed at all."""


class CorpusValidationError(CorpusError):
    """Parsed records violate a corpus invariant."""


class Role(str, Enum):
    BACKGROUND = "background"
    INSPIRATION = "inspiration"
    SURVEY = "survey"


class CorpusMode(str, Enum):
    STANDARD = "standard"
    RANDOMIZED = "randomized"


@dataclass(frozen=True)
class Passage:
    """One web document in the raw corpus."""

    id: str
    title: str
    body: str
    role: Role
    source_url: Optional[str] = None
    date: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusValidationError("passage id must be non-empty")
        if not self.title.strip():
            raise CorpusValidationError(f"passage {self.id!r}: title must be non-empty")
        if self.date is not None:
            try:
                date.fromisoformat(self.date)
            except ValueError as exc:
                raise CorpusValidationError(
                    f"passage {self.id!r}: date {self.date!r} is not ISO-8601"
                ) from exc

    def to_dict(self) -> dict:
        out = {"id": self.id, "title": self.title, "body": self.body, "role": self.role.value}
        if self.source_url is not None:
            out["source_url"] = self.source_url
        if self.date is not None:
            out["date"] = self.date
        return out


@dataclass(frozen=True)
class Chunk:
    """One contiguous slice of a passage body, at most chunk_size_words long."""

    passage_id: str
    index: int
    text: str


def chunk_passage(passage: Passage, chunk_size_words: int = DEFAULT_CHUNK_SIZE_WORDS) -> list[Chunk]:
    """Greedily split the passage body into chunks of at most ``chunk_size_words`` words.

    Words are maximal runs of non-whitespace characters. Joining the chunk
    texts with single spaces reconstructs a whitespace-normalized body.
    """
    if chunk_size_words < 1:
        raise ValueError("chunk_size_words must be >= 1")
    words = passage.body.split()
    return [
        Chunk(passage_id=passage.id, index=i // chunk_size_words, text=" ".join(words[i : i + chunk_size_words]))
        for i in range(0, len(words), chunk_size_words)
    ]


@dataclass(frozen=True)
class BenchmarkEntry:
    """One annotated publication: its hypothesis plus the corpus passages backing it."""

    paper_id: str
    publication_link: str
    publication_date: str
    subject: str
    gt_hypothesis: str
    gt_background_passage_id: str
    gt_inspiration_passage_ids: tuple[str, ...]
    reasoning_process: str
    reasoning_complexity: str
    association_complexity: str

    def __post_init__(self) -> None:
        if self.subject not in SUBJECTS:
            raise CorpusValidationError(
                f"entry {self.paper_id!r}: subject {self.subject!r} not one of {SUBJECTS}"
            )
        for name, value in (
            ("reasoning_complexity", self.reasoning_complexity),
            ("association_complexity", self.association_complexity),
        ):
            if value not in COMPLEXITY_LEVELS:
                raise CorpusValidationError(
                    f"entry {self.paper_id!r}: {name} {value!r} not one of {COMPLEXITY_LEVELS}"
                )
        if not self.gt_inspiration_passage_ids:
            raise CorpusValidationError(
                f"entry {self.paper_id!r}: at least one inspiration passage id required"
            )
        try:
            date.fromisoformat(self.publication_date)
        except ValueError as exc:
            raise CorpusValidationError(
                f"entry {self.paper_id!r}: publication_date {self.publication_date!r} is not ISO-8601"
            ) from exc


class CorpusHandle:
    """Validated, immutable collection of passages with O(1) id and title lookup."""

    def __init__(self, passages: Iterable[Passage]):
        self._by_id: dict[str, Passage] = {}
        for passage in passages:
            if passage.id in self._by_id:
                raise CorpusValidationError(f"duplicate passage id {passage.id!r}")
            self._by_id[passage.id] = passage
        # On duplicate titles, the passage with the smallest id wins the exact-title slot.
        self._by_title: dict[str, Passage] = {}
        for passage in sorted(self._by_id.values(), key=lambda p: p.id):
            self._by_title.setdefault(passage.title, passage)

    def __len__(self) -> int:
        return len(self._by_id)

    def passages(self) -> list[Passage]:
        return sorted(self._by_id.values(), key=lambda p: p.id)

    def passage(self, passage_id: str) -> Passage:
        try:
            return self._by_id[passage_id]
        except KeyError:
            raise KeyError(f"no passage with id {passage_id!r}") from None

    def get(self, passage_id: str) -> Optional[Passage]:
        return self._by_id.get(passage_id)

    def passage_by_title(self, title: str) -> Optional[Passage]:
        return self._by_title.get(title)

    def with_role(self, role: Role) -> list[Passage]:
        return [p for p in self.passages() if p.role is role]

    def role_counts(self) -> dict[Role, int]:
        counts = {role: 0 for role in Role}
        for passage in self._by_id.values():
            counts[passage.role] += 1
        return counts


def _parse_passage(obj: dict, where: str) -> Passage:
    for key in ("id", "title", "body", "role"):
        if key not in obj:
            raise CorpusFormatError(f"{where}: missing key {key!r}")
    try:
        role = Role(obj["role"])
    except ValueError:
        raise CorpusValidationError(
            f"{where}: role {obj['role']!r} must be one of {[r.value for r in Role]}"
        ) from None
    return Passage(
        id=str(obj["id"]),
        title=str(obj["title"]),
        body=str(obj["body"]),
        role=role,
        source_url=obj.get("source_url"),
        date=obj.get("date"),
    )


def load_corpus(path: str | Path) -> CorpusHandle:
    """Load and validate a JSONL corpus file.

    Raises CorpusFormatError naming the offending line for malformed input and
    CorpusValidationError for invariant violations (duplicate ids, empty
    titles, unknown roles).
    """
    path = Path(path)
    passages: list[Passage] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{where}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"{where}: expected a JSON object")
            passages.append(_parse_passage(obj, where))
    return CorpusHandle(passages)


def save_corpus(handle: CorpusHandle, path: str | Path) -> None:
    """Serialize a corpus back to JSONL; load(save(h)) equals h as a passage set."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for passage in handle.passages():
            fh.write(json.dumps(passage.to_dict(), sort_keys=True) + "\n")


def load_benchmark(path: str | Path, corpus: CorpusHandle) -> list[BenchmarkEntry]:
    """Load benchmark entries and resolve every passage reference against the corpus."""
    path = Path(path)
    entries: list[BenchmarkEntry] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{where}: invalid JSON ({exc.msg})") from exc
            try:
                entry = BenchmarkEntry(
                    paper_id=str(obj["paper_id"]),
                    publication_link=str(obj["publication_link"]),
                    publication_date=str(obj["publication_date"]),
                    subject=str(obj["subject"]),
                    gt_hypothesis=str(obj["gt_hypothesis"]),
                    gt_background_passage_id=str(obj["gt_background_passage_id"]),
                    gt_inspiration_passage_ids=tuple(obj["gt_inspiration_passage_ids"]),
                    reasoning_process=str(obj["reasoning_process"]),
                    reasoning_complexity=str(obj["reasoning_complexity"]),
                    association_complexity=str(obj["association_complexity"]),
                )
            except KeyError as exc:
                raise CorpusFormatError(f"{where}: missing key {exc.args[0]!r}") from exc
            _validate_entry_references(entry, corpus, where)
            entries.append(entry)
    return entries


def _validate_entry_references(entry: BenchmarkEntry, corpus: CorpusHandle, where: str) -> None:
    background = corpus.get(entry.gt_background_passage_id)
    if background is None:
        raise CorpusValidationError(
            f"{where}: background passage {entry.gt_background_passage_id!r} not in corpus"
        )
    if background.role is not Role.BACKGROUND:
        raise CorpusValidationError(
            f"{where}: passage {background.id!r} has role {background.role.value!r}, expected background"
        )
    for pid in entry.gt_inspiration_passage_ids:
        passage = corpus.get(pid)
        if passage is None:
            raise CorpusValidationError(f"{where}: inspiration passage {pid!r} not in corpus")
        if passage.role is not Role.INSPIRATION:
            raise CorpusValidationError(
                f"{where}: passage {pid!r} has role {passage.role.value!r}, expected inspiration"
            )
    if date.fromisoformat(entry.publication_date) < MIN_PUBLICATION_DATE:
        logger.warning(
            "%s: entry %s published %s, before %s",
            where,
            entry.paper_id,
            entry.publication_date,
            MIN_PUBLICATION_DATE.isoformat(),
        )


def subject_histogram(entries: Sequence[BenchmarkEntry]) -> Counter:
    return Counter(entry.subject for entry in entries)


def complexity_histogram(entries: Sequence[BenchmarkEntry]) -> dict[str, Counter]:
    return {
        "reasoning": Counter(entry.reasoning_complexity for entry in entries),
        "association": Counter(entry.association_complexity for entry in entries),
    }


@dataclass(frozen=True)
class CorpusView:
    """Role-resolved pools for one run: where backgrounds and inspirations come from."""

    mode: CorpusMode
    background_pool: tuple[Passage, ...]
    inspiration_pool: tuple[Passage, ...]
    survey_pool: tuple[Passage, ...] = field(default=())


def select_corpus_view(handle: CorpusHandle, mode: CorpusMode) -> CorpusView:
    """Resolve passage pools for the given corpus mode.

    Standard mode draws backgrounds from background-role passages and
    inspirations from inspiration-role passages. Randomized mode draws
    backgrounds from the inspiration-role passages and inspirations from
    passages of both roles.
    """
    backgrounds = tuple(handle.with_role(Role.BACKGROUND))
    inspirations = tuple(handle.with_role(Role.INSPIRATION))
    surveys = tuple(handle.with_role(Role.SURVEY))
    if mode is CorpusMode.STANDARD:
        background_pool, inspiration_pool = backgrounds, inspirations
    elif mode is CorpusMode.RANDOMIZED:
        background_pool = inspirations
        inspiration_pool = tuple(sorted(backgrounds + inspirations, key=lambda p: p.id))
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown corpus mode {mode!r}")
    if not background_pool:
        raise CorpusValidationError(f"{mode.value} mode: background pool is empty")
    if not inspiration_pool:
        raise CorpusValidationError(f"{mode.value} mode: inspiration pool is empty")
    return CorpusView(
        mode=mode,
        background_pool=background_pool,
        inspiration_pool=inspiration_pool,
        survey_pool=surveys,
    )
