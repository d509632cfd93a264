"""Compositional points-to analysis with hybrid inlining of critical statements."""

from .ir import Program, parse, pretty, dispatch_targets
from .inline import Config
from .driver import AnalysisResult, analyze
from .oracle import inline_exact, kcfa, top_down_ci
from .corpus import GenParams, generate, load_corpus

__version__ = "0.1.0"

__all__ = [
    "Program", "parse", "pretty", "dispatch_targets", "Config", "AnalysisResult",
    "analyze", "inline_exact", "kcfa", "top_down_ci", "GenParams", "generate",
    "load_corpus", "__version__",
]
