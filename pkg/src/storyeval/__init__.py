"""storyeval: evaluation engine for open-ended story generation across the
top-k decoding spectrum."""

from .decoding import NgramModel, SamplerConfig, generate, load_ngram, save_ngram, top_k_step, train_ngram
from .metrics_relatedness import SifConfig
from .probes import LmScorer, ProbeResult, RandomBaselineScorer
from .resources import Resources, load_resources
from .schema import (
    AnnotatedToken,
    EvalRecord,
    TokenTrace,
    ValidationError,
    build_human_baseline,
    load_records,
    write_records,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedToken",
    "EvalRecord",
    "LmScorer",
    "NgramModel",
    "ProbeResult",
    "RandomBaselineScorer",
    "Resources",
    "SamplerConfig",
    "SifConfig",
    "TokenTrace",
    "ValidationError",
    "build_human_baseline",
    "generate",
    "load_ngram",
    "load_records",
    "load_resources",
    "save_ngram",
    "top_k_step",
    "train_ngram",
    "write_records",
    "__version__",
]
