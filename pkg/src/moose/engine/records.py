"""Domain records produced by the pipeline, with full provenance."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from ..corpus import DEFAULT_CHUNK_SIZE_WORDS, CorpusMode


class PastFeedbackMode(str, Enum):
    HEURISTIC = "heuristic"
    MODEL = "model"


@dataclass(frozen=True)
class Background:
    """A research background extracted from one corpus chunk."""

    text: str
    source_chunk: tuple[str, int]  # (passage_id, chunk index)
    reason: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("background text must be non-empty")

    def to_dict(self) -> dict:
        return {"text": self.text, "source_chunk": list(self.source_chunk), "reason": self.reason}

    @classmethod
    def from_dict(cls, obj: dict) -> "Background":
        return cls(text=obj["text"], source_chunk=tuple(obj["source_chunk"]), reason=obj.get("reason"))


@dataclass(frozen=True)
class InspirationSet:
    """Titles selected for a background and the texts extracted from their passages."""

    titles: tuple[tuple[str, Optional[str]], ...]  # (title, selection reason)
    inspirations: tuple[tuple[str, str], ...]  # (text, passage_id)
    past_iteration: int = 0

    def __post_init__(self) -> None:
        if not self.titles:
            raise ValueError("an inspiration set needs at least one selected title")
        if self.past_iteration < 0:
            raise ValueError("past_iteration must be non-negative")

    def to_dict(self) -> dict:
        return {
            "titles": [list(t) for t in self.titles],
            "inspirations": [list(i) for i in self.inspirations],
            "past_iteration": self.past_iteration,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "InspirationSet":
        return cls(
            titles=tuple((t[0], t[1]) for t in obj["titles"]),
            inspirations=tuple((i[0], i[1]) for i in obj["inspirations"]),
            past_iteration=obj["past_iteration"],
        )


@dataclass(frozen=True)
class Suggestion:
    text: str

    def to_dict(self) -> dict:
        return {"text": self.text}

    @classmethod
    def from_dict(cls, obj: dict) -> "Suggestion":
        return cls(text=obj["text"])


@dataclass(frozen=True)
class FeedbackBundle:
    """The three checker critiques fed back into refinement."""

    clarity: str
    reality: str
    novelty: str

    def __post_init__(self) -> None:
        for name in ("clarity", "reality", "novelty"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} feedback must be non-empty")

    def to_dict(self) -> dict:
        return {"clarity": self.clarity, "reality": self.reality, "novelty": self.novelty}

    @classmethod
    def from_dict(cls, obj: dict) -> "FeedbackBundle":
        return cls(clarity=obj["clarity"], reality=obj["reality"], novelty=obj["novelty"])


@dataclass(frozen=True)
class HypothesisRecord:
    """A proposed hypothesis plus everything needed to reconstruct how it was made.

    ``present_iteration`` 0 means unrefined; refined records point at their
    parent and carry the feedback bundle that drove the refinement. Baseline
    runs produce records with only ``source_chunk`` provenance.
    """

    id: str
    text: str
    background: Optional[Background] = None
    inspiration_set: Optional[InspirationSet] = None
    suggestion: Optional[Suggestion] = None
    present_iteration: int = 0
    parent_id: Optional[str] = None
    feedback_used: Optional[FeedbackBundle] = None
    proposal_index: int = 0
    source_chunk: Optional[tuple[str, int]] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"record {self.id!r}: hypothesis text must be non-empty")
        if self.present_iteration < 0 or self.proposal_index < 0:
            raise ValueError(f"record {self.id!r}: iteration indices must be non-negative")
        unrefined = self.present_iteration == 0
        if unrefined != (self.parent_id is None) or unrefined != (self.feedback_used is None):
            raise ValueError(
                f"record {self.id!r}: parent_id and feedback_used must be present "
                "exactly when present_iteration > 0"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "background": self.background.to_dict() if self.background else None,
            "inspiration_set": self.inspiration_set.to_dict() if self.inspiration_set else None,
            "suggestion": self.suggestion.to_dict() if self.suggestion else None,
            "present_iteration": self.present_iteration,
            "parent_id": self.parent_id,
            "feedback_used": self.feedback_used.to_dict() if self.feedback_used else None,
            "proposal_index": self.proposal_index,
            "source_chunk": list(self.source_chunk) if self.source_chunk else None,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "HypothesisRecord":
        return cls(
            id=obj["id"],
            text=obj["text"],
            background=Background.from_dict(obj["background"]) if obj.get("background") else None,
            inspiration_set=(
                InspirationSet.from_dict(obj["inspiration_set"]) if obj.get("inspiration_set") else None
            ),
            suggestion=Suggestion.from_dict(obj["suggestion"]) if obj.get("suggestion") else None,
            present_iteration=obj["present_iteration"],
            parent_id=obj.get("parent_id"),
            feedback_used=(
                FeedbackBundle.from_dict(obj["feedback_used"]) if obj.get("feedback_used") else None
            ),
            proposal_index=obj["proposal_index"],
            source_chunk=tuple(obj["source_chunk"]) if obj.get("source_chunk") else None,
        )


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob a run depends on; serialized verbatim into the run manifest."""

    past_iterations: int = 1
    present_iterations: int = 4
    proposals_per_call: int = 4
    title_topk: int = 8
    survey_topk: int = 3
    enable_ff1: bool = False
    enable_ff2: bool = False
    enable_past_feedback: bool = False
    enable_survey_access: bool = True
    corpus_mode: CorpusMode = CorpusMode.STANDARD
    seed: int = 0
    past_feedback_mode: PastFeedbackMode = PastFeedbackMode.HEURISTIC
    workers: int = 1
    chunk_size_words: int = DEFAULT_CHUNK_SIZE_WORDS

    def __post_init__(self) -> None:
        if self.enable_past_feedback and self.past_iterations < 1:
            raise ValueError("past_iterations must be >= 1 when past-feedback is enabled")
        if self.past_iterations < 0 or self.present_iterations < 0:
            raise ValueError("iteration counts must be non-negative")
        for name in ("proposals_per_call", "title_topk", "survey_topk", "workers", "chunk_size_words"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {
            "past_iterations": self.past_iterations,
            "present_iterations": self.present_iterations,
            "proposals_per_call": self.proposals_per_call,
            "title_topk": self.title_topk,
            "survey_topk": self.survey_topk,
            "enable_ff1": self.enable_ff1,
            "enable_ff2": self.enable_ff2,
            "enable_past_feedback": self.enable_past_feedback,
            "enable_survey_access": self.enable_survey_access,
            "corpus_mode": self.corpus_mode.value,
            "seed": self.seed,
            "past_feedback_mode": self.past_feedback_mode.value,
            "workers": self.workers,
            "chunk_size_words": self.chunk_size_words,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PipelineConfig":
        data = dict(obj)
        if "corpus_mode" in data:
            data["corpus_mode"] = CorpusMode(data["corpus_mode"])
        if "past_feedback_mode" in data:
            data["past_feedback_mode"] = PastFeedbackMode(data["past_feedback_mode"])
        return cls(**data)
