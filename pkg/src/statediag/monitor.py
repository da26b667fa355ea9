"""Offline trace checking for the state-based fragment."""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field

from .errors import MissingValue
from .runtime import IotaTrace
from .scfg import ENTRY
from .specs import AtomicConstraint, NextChange, Specification, ValueAt, compare, evaluate_formula


class _Unresolved:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNRESOLVED"

    def __bool__(self):
        return False


UNRESOLVED = _Unresolved()


@dataclass(frozen=True)
class Binding:
    """Quantified variable -> ``(run index, position)`` of a concrete state."""

    assignment: tuple  # ((var, (run, pos)), ...) in quantifier order

    def __getitem__(self, var):
        for name, ref in self.assignment:
            if name == var:
                return ref
        raise KeyError(var)

    def state(self, trace: IotaTrace, var: str):
        run, pos = self[var]
        return trace.runs[run][pos]

    def describe(self, trace: IotaTrace) -> str:
        parts = []
        for var, (run, pos) in self.assignment:
            c = trace.runs[run][pos]
            parts.append(f"{var}={trace.labels[run]}:{c.state.line}@{c.t}")
        return " ".join(parts)

    def key(self, trace: IotaTrace) -> tuple:
        """Trace-independent identity: the bound states' timestamps and points."""
        return tuple(
            (var, trace.runs[run][pos].t, trace.labels[run], trace.runs[run][pos].state.line)
            for var, (run, pos) in self.assignment
        )


@dataclass(frozen=True)
class Verdict:
    value: bool
    atom_values: dict  # AtomicConstraint -> bool or UNRESOLVED


@dataclass
class VerdictMap:
    entries: dict = field(default_factory=dict)  # Binding -> Verdict
    trace: IotaTrace = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, binding):
        return self.entries[binding]

    def items(self):
        return self.entries.items()

    def falsified(self) -> list:
        return [b for b, v in self.entries.items() if not v.value]

    @property
    def satisfied(self) -> bool:
        return all(v.value for v in self.entries.values())

    def by_key(self) -> dict:
        return {b.key(self.trace): v.value for b, v in self.entries.items()}


class TraceIndex:
    """Per ``(procedure, variable)`` timestamp-sorted list of writes, for
    answering ``next`` queries by bisection."""

    def __init__(self, trace: IotaTrace):
        self._writes = {}
        for i, run in enumerate(trace.runs):
            proc = trace.labels[i]
            for c in run.states:
                if c.state.kind == ENTRY:
                    continue
                for var in c.state.written:
                    self._writes.setdefault((proc, var), []).append((c.t, c))
        self._times = {}
        for key, entries in self._writes.items():
            entries.sort(key=lambda e: e[0])
            self._times[key] = [t for t, _ in entries]

    def next_write(self, proc, var, after):
        times = self._times.get((proc, var))
        if not times:
            return None
        k = bisect.bisect_right(times, after)
        if k == len(times):
            return None
        return self._writes[(proc, var)][k][1]

    def writes(self, proc, var):
        return [c for _, c in self._writes.get((proc, var), ())]


def enumerate_bindings(trace: IotaTrace, spec: Specification) -> list:
    """Cross product over quantifiers of matching concrete states, each
    quantifier's candidates in timestamp order.

    Entry events bind parameters but are not changes, so they never match.
    """
    per_quantifier = []
    for q in spec.quantifiers:
        candidates = []
        for i, run in enumerate(trace.runs):
            if trace.labels[i] != q.proc:
                continue
            for j, c in enumerate(run.states):
                if q.changed_var in c.state.written and c.state.kind != ENTRY:
                    candidates.append((c.t, (i, j)))
        candidates.sort(key=lambda e: e[0])
        per_quantifier.append([(q.var, ref) for _, ref in candidates])
    return [Binding(tuple(combo)) for combo in itertools.product(*per_quantifier)]


def eval_expr(trace: IotaTrace, binding: Binding, expr, index: TraceIndex = None):
    """Integer value of ``expr`` under ``binding``, or :data:`UNRESOLVED`."""
    bound = binding.state(trace, expr.binding_var)
    if isinstance(expr, ValueAt):
        if expr.program_var not in bound.values:
            raise MissingValue(f"{expr}: no value of {expr.program_var!r} recorded at {bound!r}")
        return bound.values[expr.program_var]
    assert isinstance(expr, NextChange)
    index = index if index is not None else TraceIndex(trace)
    nxt = index.next_write(expr.proc, expr.changed_var, bound.t)
    if nxt is None:
        return UNRESOLVED
    if expr.changed_var not in nxt.values:
        raise MissingValue(f"{expr}: no value of {expr.changed_var!r} recorded at {nxt!r}")
    return nxt.values[expr.changed_var]


def eval_atom(trace, binding, atom: AtomicConstraint, index=None):
    sides = []
    for side in (atom.lhs, atom.rhs):
        if isinstance(side, int):
            sides.append(side)
        else:
            value = eval_expr(trace, binding, side, index)
            if value is UNRESOLVED:
                return UNRESOLVED
            sides.append(value)
    return compare(atom.op, sides[0], sides[1])


def evaluate_binding(trace, binding, spec, index=None) -> Verdict:
    atom_values = {atom: eval_atom(trace, binding, atom, index) for atom in spec.atoms()}
    return Verdict(evaluate_formula(spec.body, lambda a: atom_values[a] is True), atom_values)


def check(trace: IotaTrace, spec: Specification) -> VerdictMap:
    index = TraceIndex(trace)
    entries = {b: evaluate_binding(trace, b, spec, index) for b in enumerate_bindings(trace, spec)}
    return VerdictMap(entries, trace)
