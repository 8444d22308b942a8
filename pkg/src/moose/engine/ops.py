"""The generation modules: background finder, inspiration title finder,
inspiration finder, suggestor, proposer, the three checkers, and
inspiration feedback.

Every module is one templated gateway call plus parsing. Parsing failures get
exactly one automatic re-ask with a format reminder appended; a second failure
raises ``OpParseError`` carrying the raw response. ``MooseEngine`` holds the
per-run context (config, corpus view, survey index, template set) so the
pipeline driver stays a thin loop.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

from ..corpus import Chunk, CorpusView, Passage
from ..gateway import Gateway, GenParams, CHECKER_MAX_TOKENS
from ..retrieval import SurveyIndex
from . import parsing
from .prompts import TemplateSet
from .records import (
    Background,
    FeedbackBundle,
    HypothesisRecord,
    InspirationSet,
    PastFeedbackMode,
    PipelineConfig,
    Suggestion,
)

logger = logging.getLogger(__name__)

# Titles offered to the title finder in one call; longer lists are batched and
# the selections unioned.
TITLE_BATCH_SIZE = 200

NO_SURVEY_NOTICE = (
    "Note: no related literature retrieved for this hypothesis; "
    "judge novelty from general knowledge."
)


class EngineError(RuntimeError):
    """An operation could not produce a usable result."""


class OpParseError(EngineError):
    """A response stayed unparseable after the single re-ask."""

    def __init__(self, message: str, raw_response: str):
        super().__init__(f"{message}; raw response: {raw_response!r}")
        self.raw_response = raw_response


def format_numbered(items: Sequence[str]) -> str:
    return "\n".join(f"{i}. {item}" for i, item in enumerate(items, start=1))


def format_inspirations(insp: InspirationSet) -> str:
    return format_numbered([text for text, _pid in insp.inspirations])


def _refined_id(prior: HypothesisRecord) -> str:
    base, sep, tail = prior.id.rpartition(".i")
    if sep and tail.isdigit():
        return f"{base}.i{prior.present_iteration + 1}"
    return f"{prior.id}.i{prior.present_iteration + 1}"


class MooseEngine:
    """Per-run context binding the generation modules to one gateway and corpus view."""

    def __init__(
        self,
        gateway: Gateway,
        templates: TemplateSet,
        cfg: PipelineConfig,
        view: CorpusView,
        survey: Optional[SurveyIndex] = None,
    ):
        self.gateway = gateway
        self.templates = templates
        self.cfg = cfg
        self.view = view
        self.survey = survey
        # The candidate title list is computed once per run.
        self.all_titles: list[str] = sorted({p.title for p in view.inspiration_pool})
        self._passages_by_title: dict[str, list[Passage]] = {}
        for passage in sorted(view.inspiration_pool, key=lambda p: p.id):
            self._passages_by_title.setdefault(passage.title.lower(), []).append(passage)

    # ------------------------------------------------------------------
    # gateway helpers
    # ------------------------------------------------------------------
    def _gen(self, prompt: str, module_tag: str, max_tokens: int) -> str:
        params = GenParams.generation(self.gateway.model_name, max_output_tokens=max_tokens)
        return self.gateway.generate(prompt, params, module_tag)

    def _gen_with_reask(self, prompt: str, module_tag: str, max_tokens: int, parse, reminder: str):
        """Generate, parse, and re-ask exactly once if parsing yields nothing."""
        response = self._gen(prompt, module_tag, max_tokens)
        parsed = parse(response)
        if parsed:
            return parsed, response
        response = self._gen(f"{prompt}\n\n{reminder}", module_tag, max_tokens)
        parsed = parse(response)
        return parsed, response

    # ------------------------------------------------------------------
    # background finder
    # ------------------------------------------------------------------
    def find_background(self, chunk: Chunk) -> Optional[Background]:
        """Extract a research background from one corpus chunk; None on the NONE sentinel."""
        if not chunk.text.strip():
            raise ValueError("chunk must be non-empty")
        if self.cfg.enable_ff1:
            reason_request = (
                "Also justify why this background is worth studying and what research "
                "could build on it.\n"
            )
            reason_format = "Reason: <your justification>\n"
        else:
            reason_request = ""
            reason_format = ""
        prompt = self.templates.render(
            "background_finder",
            chunk=chunk.text,
            reason_request=reason_request,
            reason_format=reason_format,
        )

        def parse(resp: str):
            if parsing.is_none_sentinel(resp):
                return {"__none__": True}
            sections = parsing.parse_labeled_sections(resp, ["Background", "Reason"])
            if "Background" not in sections:
                return None
            if parsing.is_none_sentinel(sections["Background"]):
                return {"__none__": True}
            return sections

        parsed, raw = self._gen_with_reask(
            prompt, "background_finder", 1024, parse, parsing.LABELED_SECTION_REMINDER
        )
        if parsed is None:
            raise OpParseError("background finder response had no 'Background:' section", raw)
        if parsed.get("__none__"):
            return None
        return Background(
            text=parsed["Background"],
            reason=parsed.get("Reason") if self.cfg.enable_ff1 else None,
            source_chunk=(chunk.passage_id, chunk.index),
        )

    # ------------------------------------------------------------------
    # inspiration title finder
    # ------------------------------------------------------------------
    def _match_corpus_title(self, candidate: str) -> Optional[str]:
        """Map a model-returned title onto a real corpus title (case-insensitive substring)."""
        lowered = candidate.lower().strip()
        if not lowered:
            return None
        if lowered in self._passages_by_title:
            return self._passages_by_title[lowered][0].title
        matches = [
            title for title in self.all_titles
            if lowered in title.lower() or title.lower() in lowered
        ]
        return min(matches) if matches else None

    def find_inspiration_titles(
        self,
        bg: Background,
        past_feedback_text: Optional[str] = None,
    ) -> list[tuple[str, Optional[str]]]:
        """Select inspiration titles for a background from the cached corpus title list."""
        if not self.all_titles:
            raise EngineError("no candidate titles in the inspiration pool")
        reason_block = ""
        if self.cfg.enable_ff1 and bg.reason:
            reason_block = f"Reason the background was selected:\n{bg.reason}\n\n"
        past_block = f"{past_feedback_text.strip()}\n\n" if past_feedback_text else ""
        reason_ask = (
            ", each followed by a short selection reason in the form '(reason: ...)'"
            if self.cfg.enable_ff1
            else ""
        )

        def prompt_for(batch: list[str]) -> str:
            return self.templates.render(
                "inspiration_title_finder",
                background=bg.text,
                reason=reason_block,
                past_feedback=past_block,
                title_topk=str(self.cfg.title_topk),
                titles=format_numbered(batch),
                reason_ask=reason_ask,
            )

        batches = [
            self.all_titles[i : i + TITLE_BATCH_SIZE]
            for i in range(0, len(self.all_titles), TITLE_BATCH_SIZE)
        ]

        def select(with_reminder: bool) -> list[tuple[str, Optional[str]]]:
            selected: list[tuple[str, Optional[str]]] = []
            seen: set[str] = set()
            for batch in batches:
                prompt = prompt_for(batch)
                if with_reminder:
                    prompt = f"{prompt}\n\n{parsing.NUMBERED_LIST_REMINDER}"
                response = self._gen(prompt, "inspiration_title_finder", 1024)
                for raw_title, reason in parsing.parse_title_list(response):
                    matched = self._match_corpus_title(raw_title)
                    if matched is None:
                        logger.warning("dropping unmatched title %r", raw_title)
                        continue
                    if matched not in seen:
                        seen.add(matched)
                        selected.append((matched, reason))
            return selected

        selected = select(with_reminder=False)
        if not selected:
            selected = select(with_reminder=True)
        if not selected:
            raise EngineError("inspiration title finder matched zero corpus titles")
        return selected[: self.cfg.title_topk]

    # ------------------------------------------------------------------
    # inspiration finder
    # ------------------------------------------------------------------
    def find_inspirations(
        self,
        bg: Background,
        selected: Sequence[tuple[str, Optional[str]]],
        past_iteration: int = 0,
    ) -> InspirationSet:
        """Extract one inspiration text from the passage behind each selected title."""
        reason_block = ""
        if self.cfg.enable_ff1 and bg.reason:
            reason_block = f"Reason the background was selected:\n{bg.reason}\n\n"
        inspirations: list[tuple[str, str]] = []
        for title, title_reason in selected:
            passages = self._passages_by_title.get(title.lower())
            if not passages:
                logger.warning("selected title %r resolves to no passage; skipping", title)
                continue
            passage = passages[0]  # ascending id on duplicate titles
            title_reason_block = ""
            if self.cfg.enable_ff1 and title_reason:
                title_reason_block = f"Reason this title was selected:\n{title_reason}\n\n"
            prompt = self.templates.render(
                "inspiration_finder",
                background=bg.text,
                reason=reason_block,
                title_reason=title_reason_block,
                title=passage.title,
                passage=passage.body,
            )
            response = self._gen(prompt, "inspiration_finder", 1024)
            sections = parsing.parse_labeled_sections(response, ["Inspiration"])
            text = sections.get("Inspiration", response.strip())
            inspirations.append((text, passage.id))
        if not inspirations:
            raise EngineError("every selected title failed to resolve to a passage")
        return InspirationSet(
            titles=tuple(selected),
            inspirations=tuple(inspirations),
            past_iteration=past_iteration,
        )

    # ------------------------------------------------------------------
    # hypothesis suggestor (future-feedback 2)
    # ------------------------------------------------------------------
    def suggest(self, bg: Background, insp: InspirationSet) -> Suggestion:
        prompt = self.templates.render(
            "hypothesis_suggestor",
            background=bg.text,
            inspirations=format_inspirations(insp),
        )
        return Suggestion(text=self._gen(prompt, "suggestor", 1024).strip())

    # ------------------------------------------------------------------
    # hypothesis proposer
    # ------------------------------------------------------------------
    def _suggestion_block(self, sug: Optional[Suggestion]) -> str:
        if sug is None:
            return ""
        return f"Preliminary suggestions on how to combine them:\n{sug.text}\n\n"

    def propose(
        self,
        bg: Background,
        insp: InspirationSet,
        sug: Optional[Suggestion],
        prior: Optional[tuple[HypothesisRecord, FeedbackBundle]],
        n_proposals: int,
        id_prefix: str = "h",
    ) -> list[HypothesisRecord]:
        """Initial call: n_proposals fresh records. Refinement call (prior set): one
        record continuing the prior's chain with the feedback bundle attached."""
        if prior is not None and n_proposals != 1:
            raise ValueError("a refinement call proposes exactly one hypothesis")
        if prior is None:
            prompt = self.templates.render(
                "hypothesis_proposer_initial",
                background=bg.text,
                inspirations=format_inspirations(insp),
                suggestion=self._suggestion_block(sug),
                n_proposals=str(n_proposals),
            )
        else:
            record, bundle = prior
            prompt = self.templates.render(
                "hypothesis_proposer_refine",
                background=bg.text,
                inspirations=format_inspirations(insp),
                suggestion=self._suggestion_block(sug),
                hypothesis=record.text,
                feedback_clarity=bundle.clarity,
                feedback_reality=bundle.reality,
                feedback_novelty=bundle.novelty,
            )
        items, raw = self._gen_with_reask(
            prompt, "proposer", 1024, parsing.parse_numbered_list, parsing.NUMBERED_LIST_REMINDER
        )
        if not items:
            raise OpParseError("proposer response contained no numbered hypotheses", raw)
        if prior is None:
            if len(items) < n_proposals:
                logger.warning("proposer returned %d of %d hypotheses", len(items), n_proposals)
            return [
                HypothesisRecord(
                    id=f"{id_prefix}.p{j}.i0",
                    text=text,
                    background=bg,
                    inspiration_set=insp,
                    suggestion=sug,
                    present_iteration=0,
                    proposal_index=j,
                )
                for j, text in enumerate(items[:n_proposals])
            ]
        record, bundle = prior
        return [
            HypothesisRecord(
                id=_refined_id(record),
                text=items[0],
                background=bg,
                inspiration_set=insp,
                suggestion=sug,
                present_iteration=record.present_iteration + 1,
                parent_id=record.id,
                feedback_used=bundle,
                proposal_index=record.proposal_index,
            )
        ]

    # ------------------------------------------------------------------
    # present-feedback checkers
    # ------------------------------------------------------------------
    def _survey_block(self, hypothesis_text: str) -> str:
        if not self.cfg.enable_survey_access or self.survey is None:
            return NO_SURVEY_NOTICE
        hits = self.survey.topk(hypothesis_text, self.cfg.survey_topk)
        if not hits:
            return NO_SURVEY_NOTICE
        return "\n".join(f"- [{cid}] {text}" for cid, text, _score in hits)

    def check(self, record: HypothesisRecord) -> FeedbackBundle:
        """Run the clarity, reality, and novelty checkers on one hypothesis."""
        clarity = self._gen(
            self.templates.render("clarity_checker", hypothesis=record.text),
            "clarity_checker",
            CHECKER_MAX_TOKENS,
        )
        reality = self._gen(
            self.templates.render("reality_checker", hypothesis=record.text),
            "reality_checker",
            CHECKER_MAX_TOKENS,
        )
        inspirations = (
            format_inspirations(record.inspiration_set) if record.inspiration_set else "(none)"
        )
        novelty = self._gen(
            self.templates.render(
                "novelty_checker",
                hypothesis=record.text,
                inspirations=inspirations,
                survey_chunks=self._survey_block(record.text),
            ),
            "novelty_checker",
            CHECKER_MAX_TOKENS,
        )
        return FeedbackBundle(clarity=clarity, reality=reality, novelty=novelty)

    # ------------------------------------------------------------------
    # past-feedback
    # ------------------------------------------------------------------
    def past_feedback(
        self,
        titles: Sequence[tuple[str, Optional[str]]],
        hypotheses: Sequence[HypothesisRecord],
        bundles: Sequence[FeedbackBundle],
    ) -> str:
        """Steering text for the next title-selection round (past iteration k >= 1)."""
        title_names = [t for t, _ in titles]
        if self.cfg.past_feedback_mode is PastFeedbackMode.HEURISTIC:
            return self.templates.render(
                "past_feedback_heuristic", prior_titles="; ".join(title_names)
            ).strip()
        prompt = self.templates.render(
            "inspiration_feedback",
            titles=format_numbered(title_names),
            hypotheses=format_numbered([h.text for h in hypotheses]),
            novelty_feedback=format_numbered([b.novelty for b in bundles]),
        )
        return self._gen(prompt, "inspiration_feedback", 1024).strip()
