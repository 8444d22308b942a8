"""Prompt template loading and rendering.

Templates are plain text files with ``{name}`` placeholders. The packaged
defaults can be overridden by pointing a run at a directory containing files
with the same names; whatever set is used, its content hashes go into the run
manifest so a run records exactly which prompts produced it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

TEMPLATE_NAMES = (
    "background_finder",
    "inspiration_title_finder",
    "inspiration_finder",
    "hypothesis_suggestor",
    "hypothesis_proposer_initial",
    "hypothesis_proposer_refine",
    "clarity_checker",
    "reality_checker",
    "novelty_checker",
    "inspiration_feedback",
    "past_feedback_heuristic",
    "baseline_direct",
)


class TemplateError(KeyError):
    pass


class _StrictFields(dict):
    def __missing__(self, key: str) -> str:
        raise TemplateError(f"missing template field {key!r}")


@dataclass(frozen=True)
class TemplateSet:
    texts: dict[str, str]

    def __post_init__(self) -> None:
        missing = [name for name in TEMPLATE_NAMES if name not in self.texts]
        if missing:
            raise TemplateError(f"missing templates: {missing}")

    @classmethod
    def load(cls, directory: Optional[Path] = None) -> "TemplateSet":
        """Load templates from a directory, or the packaged defaults."""
        texts: dict[str, str] = {}
        if directory is not None:
            directory = Path(directory)
            for name in TEMPLATE_NAMES:
                texts[name] = (directory / f"{name}.txt").read_text(encoding="utf-8")
        else:
            root = resources.files(__package__) / "templates"
            for name in TEMPLATE_NAMES:
                texts[name] = (root / f"{name}.txt").read_text(encoding="utf-8")
        return cls(texts=texts)

    def render(self, name: str, **fields: str) -> str:
        try:
            template = self.texts[name]
        except KeyError:
            raise TemplateError(f"unknown template {name!r}") from None
        return template.format_map(_StrictFields(fields))

    def hashes(self) -> dict[str, str]:
        return {
            name: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for name, text in sorted(self.texts.items())
        }
