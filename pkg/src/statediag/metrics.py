"""Effectiveness and complexity-reduction metrics for diagnoses."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .miniproc import Call, ProgramPoint, SystemOfProcedures, iter_statements, source_lines

INF = math.inf


@dataclass(frozen=True)
class GroundTruthEntry:
    point: ProgramPoint
    proximity: Union[int, float]


@dataclass(frozen=True)
class LevelScore:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return 1.0 if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return 1.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)


@dataclass
class MetricsReport:
    per_proximity: dict = field(default_factory=dict)  # level -> LevelScore
    cr_sloc: float = None
    cr_func: float = None

    def table(self) -> str:
        rows = [f"{'level':>6} {'tp':>4} {'fp':>4} {'fn':>4} {'precision':>9} {'recall':>6}"]
        for level, s in self.per_proximity.items():
            rows.append(
                f"{format_level(level):>6} {s.tp:>4} {s.fp:>4} {s.fn:>4} "
                f"{s.precision:>9.3f} {s.recall:>6.3f}"
            )
        if self.cr_sloc is not None:
            rows.append(f"CR_SLOC={self.cr_sloc:.4f} CR_func={self.cr_func:.4f}")
        return "\n".join(rows) + "\n"


def format_level(level) -> str:
    return "inf" if level == INF else str(level)


def parse_level(text: str):
    text = text.strip()
    return INF if text in ("inf", "∞") else int(text)


def callers_graph(system: SystemOfProcedures) -> dict:
    """callee -> set of procedures that call it."""
    graph = {name: set() for name in system}
    for name, proc in system.procedures.items():
        for stmt in iter_statements(proc.body):
            if isinstance(stmt, Call):
                graph[stmt.callee].add(name)
    return graph


def proximities(violation_procs, system: SystemOfProcedures) -> dict:
    """Breadth-first caller distance from the violating procedure(s)."""
    if isinstance(violation_procs, str):
        violation_procs = [violation_procs]
    graph = callers_graph(system)
    dist = {p: 0 for p in violation_procs}
    queue = deque(dist)
    while queue:
        callee = queue.popleft()
        for caller in sorted(graph.get(callee, ())):
            if caller not in dist:
                dist[caller] = dist[callee] + 1
                queue.append(caller)
    return dist


def proximity_of(point: ProgramPoint, violation_proc, system: SystemOfProcedures):
    return proximities(violation_proc, system).get(point.procedure, INF)


def score(predicted, ground_truth: Iterable[GroundTruthEntry], level, predicted_proximity=None) -> LevelScore:
    """TP/FP/FN at cumulative proximity ``level``.

    Both sides are cut to points whose proximity is at most ``level``. A
    predicted point takes its proximity from ``predicted_proximity`` (a
    mapping), else from the ground truth; a point known to neither is kept
    at every level.
    """
    gt_prox = {e.point: e.proximity for e in ground_truth}
    gt = {p for p, prox in gt_prox.items() if prox <= level}
    lookup = predicted_proximity or {}
    pred = {
        p for p in predicted if lookup.get(p, gt_prox.get(p, 0)) <= level
    }
    return LevelScore(len(pred & gt), len(pred - gt), len(gt - pred))


def precision_recall(predicted, ground_truth, level, predicted_proximity=None) -> tuple:
    s = score(predicted, ground_truth, level, predicted_proximity)
    return s.precision, s.recall


def cr_ratios(diagnosis_size: int, sloc: int, diagnosis_funcs: int, n_funcs: int) -> tuple:
    """``1 - |points|/SLOC`` and ``1 - |functions hit|/#functions``."""
    if sloc <= 0 or n_funcs <= 0:
        raise ValueError("SLOC and function count must be positive")
    return (
        float(1 - Fraction(diagnosis_size, sloc)),
        float(1 - Fraction(diagnosis_funcs, n_funcs)),
    )


def sloc(system: SystemOfProcedures) -> int:
    """Non-blank lines: ``def`` lines, statements and block markers."""
    return sum(len(source_lines(p)) for p in system.procedures.values())


def complexity_reduction(diagnosis_points, system: SystemOfProcedures) -> tuple:
    points = set(diagnosis_points)
    funcs = {p.procedure for p in points}
    return cr_ratios(len(points), sloc(system), len(funcs), len(system))


def evaluate(
    predicted,
    ground_truth,
    levels,
    predicted_proximity: Mapping = None,
    system: SystemOfProcedures = None,
) -> MetricsReport:
    report = MetricsReport()
    for level in levels:
        report.per_proximity[level] = score(predicted, ground_truth, level, predicted_proximity)
    if system is not None and len(system):
        report.cr_sloc, report.cr_func = complexity_reduction(predicted, system)
    return report


def load_ground_truth(text: str) -> list:
    """Parse ``[{"proc", "line", "proximity": int | "inf"}, ...]``."""
    out = []
    for item in json.loads(text):
        prox = item["proximity"]
        prox = INF if prox in ("inf", "∞") else int(prox)
        out.append(GroundTruthEntry(ProgramPoint(item["proc"], int(item["line"])), prox))
    return out


def dump_ground_truth(entries) -> str:
    data = [
        {
            "proc": e.point.procedure,
            "line": e.point.line,
            "proximity": "inf" if e.proximity == INF else e.proximity,
        }
        for e in entries
    ]
    return json.dumps(data, indent=2) + "\n"
