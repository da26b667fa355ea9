"""Execution of MiniProc programs into ι-traces, trace files, and f-slices.

Every procedure activation opens a dynamic run that starts with its entry
event; each executed statement or block marker then appends one concrete
state to the run of the activation that executed it. A call's own event is
recorded after the callee returns. Timestamps come from a synthetic global
clock that ticks 0.1 per event, so they are strictly increasing across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Mapping, Optional

from .errors import DepthExceeded, FormatError, ProgramError
from .miniproc import (
    INT64_MAX,
    INT64_MIN,
    Assign,
    BinOp,
    Call,
    Const,
    ForIn,
    IfElse,
    SystemOfProcedures,
    Var,
)
from .scfg import ASSIGN, ENTRY, SymbolicState, build_all

DEFAULT_MAX_DEPTH = 10_000


@dataclass(frozen=True, slots=True)
class ConcreteState:
    t: Decimal
    state: SymbolicState
    values: Mapping[str, int]

    def __repr__(self):
        vals = ",".join(f"{k}↦{v}" for k, v in sorted(self.values.items()))
        return f"⟨{self.t}, {self.state!r}, [{vals}]⟩"


@dataclass(frozen=True)
class DynamicRun:
    states: tuple

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]


@dataclass(frozen=True)
class IotaTrace:
    procedures: frozenset
    runs: tuple
    labels: dict  # run index -> procedure name

    def events(self):
        """All ``(run_index, position, state)`` triples in timestamp order."""
        out = [(c.t, i, j, c) for i, run in enumerate(self.runs) for j, c in enumerate(run)]
        out.sort(key=lambda e: e[0])
        return [(i, j, c) for _, i, j, c in out]

    def __len__(self):
        return sum(len(r) for r in self.runs)


@dataclass(frozen=True)
class FSlice(IotaTrace):
    origin: dict = field(default_factory=dict)  # slice run index -> source run index


# -- interpreter -------------------------------------------------------------


class _Frame:
    __slots__ = ("proc", "env", "run", "tasks", "graph")

    def __init__(self, proc, env, run, graph, body):
        self.proc = proc
        self.env = env
        self.run = run
        self.graph = graph
        self.tasks = [("stmts", body, 0)]


def _check_range(value, point):
    if not INT64_MIN <= value <= INT64_MAX:
        raise ProgramError(point, f"integer overflow ({value})")
    return value


def _eval(expr, env, point):
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise ProgramError(point, f"variable {expr.name!r} read before assignment") from None
    assert isinstance(expr, BinOp)
    left = _eval(expr.left, env, point)
    right = _eval(expr.right, env, point)
    op = expr.op
    if op == "+":
        return _check_range(left + right, point)
    if op == "-":
        return _check_range(left - right, point)
    if op == "*":
        return _check_range(left * right, point)
    if op == "<":
        return left < right
    if op == ">":
        return left > right
    return left == right


def _arg_value(arg, env, point):
    if isinstance(arg, int):
        return arg
    return _eval(Var(arg), env, point)


def execute(
    system: SystemOfProcedures,
    entry: str,
    args=(),
    *,
    max_depth: int = DEFAULT_MAX_DEPTH,
    graphs: Optional[dict] = None,
) -> IotaTrace:
    """Run ``entry(*args)`` and return the full ι-trace, markers included."""
    if entry not in system:
        raise ProgramError(entry, f"unknown entry procedure {entry!r}")
    params = system[entry].params
    if len(args) != len(params):
        raise ProgramError(entry, f"{entry!r} takes {len(params)} argument(s), got {len(args)}")
    graphs = graphs if graphs is not None else build_all(system)

    runs = []
    labels = {}
    tick = 0
    frames = []

    def emit(frame, state, values):
        nonlocal tick
        frame.run.append(ConcreteState(Decimal(tick).scaleb(-1), state, values))
        tick += 1

    def activate(name, values, point):
        if len(frames) >= max_depth:
            raise DepthExceeded(point, f"call depth exceeds {max_depth}")
        proc = system[name]
        env = dict(zip(proc.params, values))
        labels[len(runs)] = name
        run = []
        runs.append(run)
        frame = _Frame(name, env, run, graphs[name], proc.body)
        frames.append(frame)
        emit(frame, frame.graph.entry, dict(env))

    activate(entry, [_check_range(int(a), entry) for a in args], entry)

    while frames:
        frame = frames[-1]
        if not frame.tasks:
            frames.pop()
            continue
        task = frame.tasks.pop()
        kind = task[0]

        if kind == "stmts":
            _, body, i = task
            if i >= len(body):
                continue
            frame.tasks.append(("stmts", body, i + 1))
            stmt = body[i]
            point = stmt.point
            state = frame.graph.state_at(point.line)
            if isinstance(stmt, Assign):
                value = _eval(stmt.expr, frame.env, point)
                frame.env[stmt.target] = value
                emit(frame, state, {stmt.target: value})
            elif isinstance(stmt, Call):
                values = [_arg_value(a, frame.env, point) for a in stmt.args]
                frame.tasks.append(("returned", state))
                activate(stmt.callee, values, point)
            elif isinstance(stmt, ForIn):
                frame.tasks.append(("loop", stmt, 0))
            elif isinstance(stmt, IfElse):
                taken = _eval(stmt.cond, frame.env, point)
                emit(frame, state, {})
                frame.tasks.append(("marker", stmt.end_line))
                if taken:
                    frame.tasks.append(("stmts", stmt.then_body, 0))
                elif stmt.else_body is not None:
                    frame.tasks.append(("stmts", stmt.else_body, 0))
                    emit(frame, frame.graph.state_at(stmt.else_line), {})
        elif kind == "loop":
            _, stmt, k = task
            if k < len(stmt.items):
                value = stmt.items[k]
                frame.env[stmt.var] = value
                emit(frame, frame.graph.state_at(stmt.point.line), {stmt.var: value})
                frame.tasks.append(("loop", stmt, k + 1))
                frame.tasks.append(("stmts", stmt.body, 0))
            else:
                emit(frame, frame.graph.state_at(stmt.end_line), {})
        elif kind == "marker":
            emit(frame, frame.graph.state_at(task[1]), {})
        elif kind == "returned":
            emit(frame, task[1], {})

    return IotaTrace(
        frozenset(labels.values()),
        tuple(DynamicRun(tuple(r)) for r in runs),
        labels,
    )


# -- filtering ---------------------------------------------------------------


def filter_trace(trace: IotaTrace, points) -> FSlice:
    """Keep only concrete states whose symbolic state is in ``points``.

    Runs left empty are dropped; the surviving runs are renumbered and
    ``origin`` maps each back to its run in ``trace``.
    """
    keep = points if isinstance(points, (set, frozenset)) else frozenset(points)
    runs = []
    origin = {}
    labels = {}
    for i, run in enumerate(trace.runs):
        kept = tuple(c for c in run.states if c.state in keep)
        if kept:
            origin[len(runs)] = i
            labels[len(runs)] = trace.labels[i]
            runs.append(DynamicRun(kept))
    return FSlice(frozenset(labels.values()), tuple(runs), labels, origin)


# -- trace files -------------------------------------------------------------


def write_trace(trace: IotaTrace) -> bytes:
    """JSON Lines: a header object, then one object per concrete state in
    timestamp order."""
    header = {
        "procedures": sorted(trace.procedures),
        "labels": {str(i): trace.labels[i] for i in sorted(trace.labels)},
    }
    if isinstance(trace, FSlice):
        header["origin"] = {str(i): trace.origin[i] for i in sorted(trace.origin)}
    lines = [json.dumps(header, sort_keys=True)]
    for i, _, c in trace.events():
        lines.append(
            json.dumps(
                {
                    "run": i,
                    "proc": trace.labels[i],
                    "t": str(c.t),
                    "line": None if c.state.kind == ENTRY else c.state.line,
                    "values": {k: c.values[k] for k in sorted(c.values)},
                },
                sort_keys=True,
            )
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def _placeholder(proc, line, values):
    if line is None:
        return SymbolicState(proc, None, ENTRY, frozenset(values), params=tuple(values))
    return SymbolicState(proc, line, ASSIGN, frozenset(values))


def read_trace(data, graphs: Optional[dict] = None) -> IotaTrace:
    """Parse :func:`write_trace` output.

    With ``graphs`` (from :func:`statediag.scfg.build_all`) every event is
    resolved to its SCFG state; otherwise placeholder states are built whose
    written set is the event's value keys.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines()
    if not lines:
        raise FormatError(1, "empty trace file")
    try:
        header = json.loads(lines[0])
        procedures = frozenset(header["procedures"])
        labels = {int(k): v for k, v in header["labels"].items()}
        origin = {int(k): int(v) for k, v in header["origin"].items()} if "origin" in header else None
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise FormatError(1, f"bad header: {exc}") from None
    if sorted(labels) != list(range(len(labels))):
        raise FormatError(1, "run indices must be 0..n-1")
    if not set(labels.values()) <= procedures:
        raise FormatError(1, "labels name procedures missing from 'procedures'")

    runs = [[] for _ in labels]
    seen_t = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            run = obj["run"]
            proc = obj["proc"]
            t = Decimal(obj["t"])
            line = obj["line"]
            values = obj["values"]
            if not isinstance(run, int) or not isinstance(proc, str) or not isinstance(values, dict):
                raise TypeError("wrong field types")
            if line is not None and (not isinstance(line, int) or isinstance(line, bool)):
                raise TypeError("'line' must be an integer or null")
            for k, v in values.items():
                if not isinstance(v, int) or isinstance(v, bool):
                    raise TypeError(f"value of {k!r} is not an integer")
        except (ValueError, KeyError, TypeError, InvalidOperation) as exc:
            raise FormatError(lineno, str(exc) or type(exc).__name__) from None
        if run not in labels:
            raise FormatError(lineno, f"unknown run {run}")
        if labels[run] != proc:
            raise FormatError(lineno, f"run {run} is labeled {labels[run]!r}, not {proc!r}")
        if not t.is_finite() or t < 0:
            raise FormatError(lineno, f"bad timestamp {obj['t']!r}")
        if t in seen_t:
            raise FormatError(lineno, f"duplicate timestamp {t}")
        seen_t.add(t)
        if runs[run] and runs[run][-1].t >= t:
            raise FormatError(lineno, "timestamps must increase within a run")
        if graphs is not None:
            try:
                state = graphs[proc].state_at(line)
            except KeyError:
                raise FormatError(lineno, f"no statement at {proc}:{line}") from None
        else:
            state = _placeholder(proc, line, values)
        runs[run].append(ConcreteState(t, state, values))

    runs_t = tuple(DynamicRun(tuple(r)) for r in runs)
    if origin is not None:
        return FSlice(procedures, runs_t, labels, origin)
    return IotaTrace(procedures, runs_t, labels)
