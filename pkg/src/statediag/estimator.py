"""Estimator-style facade over the pipeline.

``fit`` takes a program and builds the instrumentation plan, ``transform``
reduces a trace to its f-slice, ``predict`` returns per-binding verdicts and
``diagnose`` returns the full diagnosis.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .diagnose import Diagnosis, compute_map
from .instrument import InstrumentationPlan, build_plan
from .miniproc import SystemOfProcedures, parse_program
from .monitor import VerdictMap, check
from .runtime import FSlice, IotaTrace, execute, filter_trace, read_trace
from .scfg import build_all
from .specs import Specification, link_spec, parse_spec


def check_system(program) -> SystemOfProcedures:
    """Accept a parsed system or MiniProc source text."""
    if isinstance(program, SystemOfProcedures):
        return program
    if isinstance(program, str):
        return parse_program(program)
    raise TypeError(f"expected SystemOfProcedures or source text, got {type(program).__name__}")


def check_spec(spec, system: SystemOfProcedures) -> Specification:
    if isinstance(spec, Specification):
        link_spec(spec, system)
        return spec
    if isinstance(spec, str):
        return parse_spec(spec, system)
    raise TypeError(f"expected Specification or text, got {type(spec).__name__}")


def check_trace(trace, graphs=None) -> IotaTrace:
    """Accept an ι-trace or the bytes/text of a trace file."""
    if isinstance(trace, IotaTrace):
        return trace
    if isinstance(trace, (bytes, str)):
        return read_trace(trace, graphs)
    raise TypeError(f"expected IotaTrace or trace file contents, got {type(trace).__name__}")


class Diagnoser(TransformerMixin, BaseEstimator):
    """Instrument a program for ``spec`` and diagnose its traces.

    Parameters
    ----------
    spec : Specification or str
        The property to check.
    entry : str, optional
        Procedure run by :meth:`run`.
    """

    def __init__(self, spec=None, entry=None):
        self.spec = spec
        self.entry = entry

    def fit(self, program, y=None):
        system = check_system(program)
        if self.spec is None:
            raise ValueError("Diagnoser needs a specification")
        self.system_ = system
        self.spec_ = check_spec(self.spec, system)
        self.graphs_ = build_all(system)
        self.plan_: InstrumentationPlan = build_plan(self.spec_, system, self.graphs_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "plan_"):
            raise NotFittedError("call fit() with a program first")

    def run(self, args=()) -> IotaTrace:
        """Execute ``entry`` and return the full trace."""
        self._check_fitted()
        if self.entry is None:
            raise ValueError("no entry procedure set")
        return execute(self.system_, self.entry, list(args), graphs=self.graphs_)

    def transform(self, trace) -> FSlice:
        self._check_fitted()
        return filter_trace(check_trace(trace, self.graphs_), self.plan_.union)

    def predict(self, trace) -> VerdictMap:
        self._check_fitted()
        return check(check_trace(trace, self.graphs_), self.spec_)

    def diagnose(self, trace) -> Diagnosis:
        self._check_fitted()
        sliced = self.transform(trace)
        return compute_map(self.spec_, sliced, self.plan_)
