"""Estimator-style front door: fit analyses programs, predict reports their
findings, transform returns optimised source text."""
from __future__ import annotations

from pathlib import Path

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .engine import AnalysisResult, EngineConfig, analyze
from .frontend import CoreProgram, SourceProgram, load
from .report import Diagnostic, diagnose, find_point, optimize, query


def check_program(X) -> list[CoreProgram]:
    """Normalise one program or a sequence of them to core programs.

    Accepts CoreProgram, SourceProgram, a path to an .imp file, or source
    text.  Raises TypeError for anything else and ValueError when empty.
    """
    items = [X] if isinstance(X, (CoreProgram, SourceProgram, Path, str)) else X
    try:
        items = list(items)
    except TypeError:
        raise TypeError("expected a program or a sequence of programs, got %s"
                        % type(X).__name__) from None
    if not items:
        raise ValueError("no programs given")
    out = []
    for item in items:
        if isinstance(item, CoreProgram):
            out.append(item)
        elif isinstance(item, SourceProgram):
            out.append(load(item))
        elif isinstance(item, Path) or (isinstance(item, str) and item.endswith(".imp")
                                        and "\n" not in item):
            out.append(load(SourceProgram.read(item)))
        elif isinstance(item, str):
            out.append(load(SourceProgram("<input>", item)))
        else:
            raise TypeError("cannot read a program from %s" % type(item).__name__)
    return out


class EqualityAnalyzer(TransformerMixin, BaseEstimator):
    """Equality analysis with the engine options as hyper-parameters."""

    def __init__(self, interp_level: int = 2, widening: bool = True,
                 widening_threshold: int | None = None, cap: int = 64,
                 primed: bool = True, strict_indefinite: bool = True, depth: int = 3):
        self.interp_level = interp_level
        self.widening = widening
        self.widening_threshold = widening_threshold
        self.cap = cap
        self.primed = primed
        self.strict_indefinite = strict_indefinite
        self.depth = depth

    def _config(self) -> EngineConfig:
        if self.depth < 1:
            raise ValueError("depth must be at least 1")
        return EngineConfig(level=self.interp_level, widening=self.widening,
                            threshold=self.widening_threshold, cap=self.cap,
                            primed=self.primed, strict=self.strict_indefinite)

    def fit(self, X, y=None):
        config = self._config()
        programs = check_program(X)
        self.results_: list[AnalysisResult] = [analyze(p, config) for p in programs]
        self.diagnostics_: list[list[Diagnostic]] = [diagnose(r) for r in self.results_]
        self.n_programs_ = len(programs)
        return self

    def predict(self, X) -> list[list[Diagnostic]]:
        """Findings for each program."""
        check_is_fitted(self, "results_")
        config = self._config()
        return [diagnose(analyze(p, config)) for p in check_program(X)]

    def transform(self, X) -> list[str]:
        """Optimised source text for each program."""
        check_is_fitted(self, "results_")
        config = self._config()
        return [optimize(p, config).text for p in check_program(X)]

    def query(self, point: str, expr: str, index: int = 0) -> list[str]:
        """Terms equal to expr at a point of the index-th fitted program."""
        check_is_fitted(self, "results_")
        r = self.results_[index]
        ans = query(r, find_point(r, point), expr, self.depth)
        return ["inaccessible"] if ans.inaccessible else ans.terms
