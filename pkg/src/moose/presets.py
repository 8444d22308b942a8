"""Named experiment presets binding engine modes to pipeline configurations.

Each comparison the harness supports is one preset: the direct baseline, the
feedback-pipeline variants (base, future-feedback, full, and ablations that
disable one mechanism at a time), and the selection ablations. Presets resolve
to a concrete ``PipelineConfig`` and can be extended from a user config file.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional

from .corpus import CorpusMode
from .engine.pipeline import AblationVariant
from .engine.records import PastFeedbackMode, PipelineConfig


class EngineMode(str, Enum):
    BASELINE = "baseline"
    MOOSE = "moose"
    ABLATION = "ablation"


class UnknownPresetError(KeyError):
    def __init__(self, name: str, known: list[str]):
        super().__init__(f"unknown preset {name!r}; known presets: {', '.join(known)}")
        self.name = name
        self.known = known


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    engine_mode: EngineMode
    description: str
    ablation_variant: Optional[AblationVariant] = None
    overrides: Mapping[str, object] = field(default_factory=dict)

    def config(self, base: Optional[PipelineConfig] = None) -> PipelineConfig:
        cfg = base if base is not None else PipelineConfig()
        overrides = dict(self.overrides)
        # config-file presets carry enum fields as strings
        if isinstance(overrides.get("corpus_mode"), str):
            overrides["corpus_mode"] = CorpusMode(overrides["corpus_mode"])
        if isinstance(overrides.get("past_feedback_mode"), str):
            overrides["past_feedback_mode"] = PastFeedbackMode(overrides["past_feedback_mode"])
        return replace(cfg, **overrides)


_MOOSE_BASE = {
    "enable_ff1": False,
    "enable_ff2": False,
    "enable_past_feedback": False,
    "enable_survey_access": True,
    "past_iterations": 1,
    "proposals_per_call": 4,
    "present_iterations": 4,
}
# Full pipeline: past-feedback needs a second past-iteration to fire, so the
# 4-hypotheses-per-background budget splits into 2 iterations x 2 proposals.
_MOOSE_FULL = {
    **_MOOSE_BASE,
    "enable_ff1": True,
    "enable_ff2": True,
    "enable_past_feedback": True,
    "past_iterations": 2,
    "proposals_per_call": 2,
}


def _preset(name, mode, description, variant=None, **overrides) -> ExperimentPreset:
    return ExperimentPreset(
        name=name,
        engine_mode=mode,
        description=description,
        ablation_variant=variant,
        overrides=overrides,
    )


PRESETS: dict[str, ExperimentPreset] = {
    p.name: p
    for p in [
        _preset(
            "baseline",
            EngineMode.BASELINE,
            "Feed each corpus chunk straight to the proposer.",
            proposals_per_call=4,
        ),
        _preset(
            "moose-base",
            EngineMode.MOOSE,
            "Selection pipeline plus present-feedback refinement; no other feedback.",
            **_MOOSE_BASE,
        ),
        _preset(
            "moose-future",
            EngineMode.MOOSE,
            "moose-base plus future-feedback (justifications and the suggestor).",
            **{**_MOOSE_BASE, "enable_ff1": True, "enable_ff2": True},
        ),
        _preset(
            "moose-full",
            EngineMode.MOOSE,
            "Future-feedback plus past-feedback on title selection.",
            **_MOOSE_FULL,
        ),
        _preset(
            "moose-no-ff1",
            EngineMode.MOOSE,
            "moose-full without output justifications.",
            **{**_MOOSE_FULL, "enable_ff1": False},
        ),
        _preset(
            "moose-no-ff2",
            EngineMode.MOOSE,
            "moose-full without the suggestor module.",
            **{**_MOOSE_FULL, "enable_ff2": False},
        ),
        _preset(
            "moose-no-survey",
            EngineMode.MOOSE,
            "moose-full with the novelty checker cut off from the survey corpus.",
            **{**_MOOSE_FULL, "enable_survey_access": False},
        ),
        _preset(
            "moose-randomized-corpus",
            EngineMode.MOOSE,
            "moose-full with backgrounds drawn from inspiration passages and "
            "inspirations from both roles.",
            **{**_MOOSE_FULL, "corpus_mode": "randomized"},
        ),
        _preset(
            "moose-selection-only",
            EngineMode.MOOSE,
            "Model-picked background and inspirations, no feedback of any kind.",
            **{**_MOOSE_BASE, "present_iterations": 0},
        ),
        _preset(
            "ablation-rand-background",
            EngineMode.ABLATION,
            "Random background chunk, direct proposal.",
            variant=AblationVariant.RAND_BACKGROUND,
        ),
        _preset(
            "ablation-rand-both",
            EngineMode.ABLATION,
            "Random background chunk and random inspiration passages.",
            variant=AblationVariant.RAND_BOTH,
        ),
        _preset(
            "ablation-bm25-inspirations",
            EngineMode.ABLATION,
            "Random background chunk; inspiration passages ranked by BM25 against it.",
            variant=AblationVariant.BM25_INSPIRATIONS,
        ),
        _preset(
            "ablation-gt-background-inspirations",
            EngineMode.ABLATION,
            "Annotated background and inspiration passages fed to the proposer.",
            variant=AblationVariant.GT_BACKGROUND_INSPIRATIONS,
        ),
        _preset(
            "ablation-gt-hypotheses",
            EngineMode.ABLATION,
            "Annotated hypotheses passed through as records for judging.",
            variant=AblationVariant.GT_HYPOTHESES_PASSTHROUGH,
        ),
    ]
}


def parse_user_presets(raw: Mapping[str, Mapping]) -> dict[str, ExperimentPreset]:
    """Build presets from a config-file mapping {name: {engine_mode?, variant?, overrides?}}."""
    presets: dict[str, ExperimentPreset] = {}
    for name, spec in raw.items():
        mode = EngineMode(spec.get("engine_mode", "moose"))
        variant = AblationVariant(spec["variant"]) if "variant" in spec else None
        presets[name] = ExperimentPreset(
            name=name,
            engine_mode=mode,
            description=spec.get("description", "user preset"),
            ablation_variant=variant,
            overrides=dict(spec.get("overrides", {})),
        )
    return presets


def resolve_preset(
    name: str,
    base: Optional[PipelineConfig] = None,
    extra_presets: Optional[Mapping[str, ExperimentPreset]] = None,
) -> tuple[ExperimentPreset, PipelineConfig]:
    registry: dict[str, ExperimentPreset] = dict(PRESETS)
    if extra_presets:
        registry.update(extra_presets)
    if name not in registry:
        raise UnknownPresetError(name, sorted(registry))
    preset = registry[name]
    return preset, preset.config(base)


def preset_names() -> list[str]:
    return sorted(PRESETS)
