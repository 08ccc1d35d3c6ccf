"""Python bindings for the valence toolkit."""

from ._core import (
    PIPELINE_STAGES,
    BackendError,
    BaselineModel,
    DependencyError,
    DomainError,
    Error,
    ParseError,
    ValidationError,
    evaluate,
    extract,
    gwet_ac,
    macro_metrics,
    percent_agreement,
    postprocess_generation,
    relative_drop,
    render,
    run_pipeline,
    score_lexicon,
    split_sizes,
    synth,
    train_baseline,
    verbalize,
)

__all__ = [
    "PIPELINE_STAGES",
    "BackendError",
    "BaselineModel",
    "DependencyError",
    "DomainError",
    "Error",
    "ParseError",
    "ValidationError",
    "evaluate",
    "extract",
    "gwet_ac",
    "macro_metrics",
    "percent_agreement",
    "postprocess_generation",
    "relative_drop",
    "render",
    "run_pipeline",
    "score_lexicon",
    "split_sizes",
    "synth",
    "train_baseline",
    "verbalize",
]
