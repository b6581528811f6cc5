"""Equality-relation analysis of a small imperative language."""
from importlib import resources
from pathlib import Path

from .api import EqualityAnalyzer, check_program
from .engine import AnalysisResult, Divergence, EngineConfig, analyze
from .eqstate import BOTTOM, TOP, EqState, dump, includes, intersect, knows
from .frontend import ParseError, SourceProgram, build_cfg, desugar, load, parse
from .report import Diagnostic, Rewrite, diagnose, optimize, query


def corpus_path(name: str) -> Path:
    """Path of a bundled example program, e.g. corpus_path("kmp")."""
    if not name.endswith(".imp"):
        name += ".imp"
    return Path(str(resources.files(__package__) / "corpus" / name))


__all__ = [
    "AnalysisResult", "BOTTOM", "Diagnostic", "Divergence", "EngineConfig",
    "EqState", "EqualityAnalyzer", "ParseError", "Rewrite", "SourceProgram", "TOP",
    "analyze", "build_cfg", "check_program", "corpus_path", "desugar", "diagnose",
    "dump", "includes", "intersect", "knows", "load", "optimize", "parse", "query",
]
__version__ = "0.1.0"
