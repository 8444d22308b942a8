"""Pipeline engine: generation modules, feedback loops, and run drivers."""

from .ops import NO_SURVEY_NOTICE, EngineError, MooseEngine, OpParseError
from .pipeline import (
    AblationVariant,
    PipelineRunError,
    RunResult,
    run_ablation,
    run_baseline,
    run_pipeline,
)
from .prompts import TEMPLATE_NAMES, TemplateError, TemplateSet
from .records import (
    Background,
    FeedbackBundle,
    HypothesisRecord,
    InspirationSet,
    PastFeedbackMode,
    PipelineConfig,
    Suggestion,
)

__all__ = [
    "AblationVariant",
    "Background",
    "EngineError",
    "FeedbackBundle",
    "HypothesisRecord",
    "InspirationSet",
    "MooseEngine",
    "NO_SURVEY_NOTICE",
    "OpParseError",
    "PastFeedbackMode",
    "PipelineConfig",
    "PipelineRunError",
    "RunResult",
    "Suggestion",
    "TEMPLATE_NAMES",
    "TemplateError",
    "TemplateSet",
    "run_ablation",
    "run_baseline",
    "run_pipeline",
]
