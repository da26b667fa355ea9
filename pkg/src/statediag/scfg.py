"""Symbolic control-flow graphs annotated with written/read/called sets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .miniproc import (
    Assign,
    Call,
    ForIn,
    IfElse,
    Procedure,
    ProgramPoint,
    SystemOfProcedures,
    expr_vars,
)

ENTRY = "entry"
EXIT = "exit"
ASSIGN = "assign"
CALL = "call"
FOR = "for"
IF = "if"
ELSE = "else"
END_FOR = "endFor"
END_IF = "endIf"

MARKERS = frozenset({ELSE, END_FOR, END_IF})

_EMPTY = frozenset()


@dataclass(frozen=True)
class SymbolicState:
    """A vertex of an SCFG.

    Identity is ``(proc, line)``, unique because every statement, block
    marker and ``def`` sits on its own line (the exit sink has no line).
    Everything else rides along without taking part in equality, so a state
    rebuilt from a trace file compares equal to the one from :func:`build_scfg`.
    """

    proc: str
    line: Optional[int]
    kind: str = field(compare=False)
    written: frozenset = field(default=_EMPTY, compare=False)
    read: frozenset = field(default=_EMPTY, compare=False)
    called: frozenset = field(default=_EMPTY, compare=False)
    params: tuple = field(default=(), compare=False)  # entry states, in order
    args: tuple = field(default=(), compare=False)  # call states, in order

    @property
    def point(self) -> Optional[ProgramPoint]:
        if self.line is None:
            return None
        return ProgramPoint(self.proc, self.line)

    @property
    def is_entry(self):
        return self.kind == ENTRY

    @property
    def is_marker(self):
        return self.kind in MARKERS

    def sort_key(self):
        return (self.proc, float("inf") if self.line is None else self.line, 0)

    @property
    def name(self):
        return "ε" if self.kind == EXIT else f"σ{self.line}"

    def __repr__(self):
        return f"<{self.proc}:{self.name}>"


def _fmt(names):
    return "{" + ",".join(sorted(names)) + "}"


def label(state: SymbolicState) -> str:
    if state.kind == EXIT:
        return "ε"
    return f"{state.name} W={_fmt(state.written)} R={_fmt(state.read)} C={_fmt(state.called)}"


@dataclass(frozen=True)
class Scfg:
    proc: str
    vertices: tuple
    edges: frozenset
    entry: SymbolicState
    exit: SymbolicState
    incoming: dict = field(repr=False, compare=False)

    def state_at(self, line: Optional[int]) -> SymbolicState:
        """The state on source ``line``; ``None`` selects the entry state."""
        if line is None:
            return self.entry
        return self._by_line[line]

    @property
    def _by_line(self):
        cache = self.__dict__.get("_line_cache")
        if cache is None:
            cache = {v.line: v for v in self.vertices if v.kind not in (ENTRY, EXIT)}
            cache.setdefault(self.entry.line, self.entry)
            object.__setattr__(self, "_line_cache", cache)
        return cache

    def successors(self, state):
        return sorted((b for a, b in self.edges if a == state), key=SymbolicState.sort_key)

    def writers_of(self, var: str) -> list:
        """Non-entry states whose written set contains ``var``, in line order."""
        return [v for v in self.vertices if v.kind != ENTRY and var in v.written]


def build_scfg(procedure: Procedure) -> Scfg:
    proc = procedure.name
    vertices = []
    edges = set()
    incoming = {}

    def add(state, pred, *, back=None):
        vertices.append(state)
        edges.add((pred, state))
        incoming[state] = [pred] if back is None else back
        return state

    def block(body, pred):
        for stmt in body:
            pred = statement(stmt, pred)
        return pred

    def statement(stmt, pred):
        line = stmt.point.line
        if isinstance(stmt, Assign):
            s = SymbolicState(proc, line, ASSIGN, frozenset((stmt.target,)), expr_vars(stmt.expr))
            return add(s, pred)
        if isinstance(stmt, Call):
            reads = frozenset(a for a in stmt.args if isinstance(a, str))
            s = SymbolicState(
                proc, line, CALL, _EMPTY, reads, frozenset((stmt.callee,)), args=stmt.args
            )
            return add(s, pred)
        if isinstance(stmt, ForIn):
            header = add(SymbolicState(proc, line, FOR, frozenset((stmt.var,))), pred)
            last = block(stmt.body, header)
            edges.add((last, header))
            end = SymbolicState(proc, stmt.end_line, END_FOR)
            return add(end, last)
        if isinstance(stmt, IfElse):
            header = add(SymbolicState(proc, line, IF, _EMPTY, expr_vars(stmt.cond)), pred)
            then_last = block(stmt.then_body, header)
            else_last = header
            if stmt.else_body is not None:
                marker = add(SymbolicState(proc, stmt.else_line, ELSE), header)
                else_last = block(stmt.else_body, marker)
            end = SymbolicState(proc, stmt.end_line, END_IF)
            joins = [then_last] if then_last == else_last else [then_last, else_last]
            add(end, then_last, back=joins)
            edges.add((else_last, end))
            return end
        raise TypeError(f"unknown statement {stmt!r}")

    entry = SymbolicState(
        proc, procedure.line, ENTRY, frozenset(procedure.params), params=procedure.params
    )
    vertices.append(entry)
    incoming[entry] = []
    last = block(procedure.body, entry)
    exit_state = SymbolicState(proc, None, EXIT)
    vertices.append(exit_state)
    edges.add((last, exit_state))
    incoming[exit_state] = []

    return Scfg(
        proc,
        tuple(sorted(vertices, key=SymbolicState.sort_key)),
        frozenset(edges),
        entry,
        exit_state,
        incoming,
    )


def build_all(system: SystemOfProcedures) -> dict:
    """SCFG of every procedure, keyed by name."""
    return {name: build_scfg(system[name]) for name in system.names()}


def incoming_star(state: SymbolicState, scfg: Scfg) -> list:
    """Backward-traversal predecessors of ``state``.

    A join after ``if`` yields both branch ends; loops are unrolled once
    (the header only sees the state before the loop, the ``endFor`` marker
    only sees the end of the body); entry and exit yield nothing.
    """
    return list(scfg.incoming[state])


def export_dot(scfg: Scfg) -> str:
    ids = {v: f"n{i}" for i, v in enumerate(scfg.vertices)}
    order = {v: i for i, v in enumerate(scfg.vertices)}
    lines = [f'digraph "{scfg.proc}" {{']
    for v in scfg.vertices:
        lines.append(f'  {ids[v]} [label="{label(v)}"];')
    for a, b in sorted(scfg.edges, key=lambda e: (order[e[0]], order[e[1]])):
        lines.append(f"  {ids[a]} -> {ids[b]};")
    lines.append("}")
    return "\n".join(lines) + "\n"
