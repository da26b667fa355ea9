"""Instrumentation points: the vanilla set that decides a verdict, and the
diagnostics set reached by a backward, inter-procedural dataflow walk.

The walk (:func:`s_traversal`) starts at a state that changes a specified
variable and follows incoming stars backwards, tracking the set of variables
whose definitions are still unexplained. A predecessor that writes one of them
is appended to the explanation list, its read set joins the tracked set, and
each branch of a join works on its own copy. Reaching a procedure entry with a
tracked parameter continues at every call site, renaming parameters to the
caller's arguments.

The same state can be appended along several paths; the number of times it
appears is its multiplicity.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .errors import LinkError, LiteralArgument, NotAParameter
from .scfg import CALL, ENTRY, Scfg, SymbolicState, build_all, incoming_star
from .specs import Specification, ValueAt, expressions_of


@dataclass(frozen=True)
class MultiplicityMultiset:
    mu: dict = field(default_factory=dict)

    @property
    def support(self) -> frozenset:
        return frozenset(self.mu)

    def __getitem__(self, state):
        return self.mu.get(state, 0)

    def __len__(self):
        return len(self.mu)

    def total(self):
        return sum(self.mu.values())

    def __eq__(self, other):
        if not isinstance(other, MultiplicityMultiset):
            return NotImplemented
        return self.mu == other.mu

    def __hash__(self):
        return hash(frozenset(self.mu.items()))


def to_multiset(acc) -> MultiplicityMultiset:
    return MultiplicityMultiset(dict(Counter(acc)))


def _graphs_for(system, graphs):
    return graphs if graphs is not None else build_all(system)


def vanilla_points(spec: Specification, system, graphs=None) -> dict:
    """Map each ``(atom, expression)`` to the states that fix its value.

    ``q(x)`` needs the change points of ``q``'s quantifier; a ``next`` needs
    every writer of its variable in its procedure.
    """
    graphs = _graphs_for(system, graphs)
    points = {}
    for atom, expr in expressions_of(spec):
        if isinstance(expr, ValueAt):
            q = spec.quantifier(expr.binding_var)
            var, proc = q.changed_var, q.proc
        else:
            var, proc = expr.changed_var, expr.proc
        if proc not in graphs:
            raise LinkError(f"{expr}: unknown procedure {proc!r}")
        points[(atom, expr)] = frozenset(graphs[proc].writers_of(var))
    return points


def get_callers(proc: str, system, graphs=None) -> list:
    """Every ``(caller, call state)`` whose called set contains ``proc``,
    sorted by caller name and line."""
    graphs = _graphs_for(system, graphs)
    callers = []
    for name in sorted(graphs):
        for state in graphs[name].vertices:
            if proc in state.called:
                callers.append((name, state))
    return callers


def get_parameter_index(entry: SymbolicState, param: str) -> int:
    if entry.kind != ENTRY or param not in entry.params:
        raise NotAParameter(f"{param!r} is not a parameter of {entry.proc!r}")
    return entry.params.index(param)


def get_renamed_parameter(caller_scfg: Scfg, call_site: SymbolicState, index: int) -> str:
    """Name of the argument passed at position ``index`` of ``call_site``."""
    state = caller_scfg.state_at(call_site.line)
    if state.kind != CALL or index >= len(state.args):
        raise LinkError(f"{call_site!r} has no argument {index}")
    arg = state.args[index]
    if isinstance(arg, int):
        raise LiteralArgument(f"{call_site!r} passes the literal {arg} at position {index}")
    return arg


def s_traversal(seed, used_vars, acc, proc, system, graphs=None) -> list:
    """Append to ``acc`` every state that explains ``seed`` and return it.

    ``used_vars`` is the set of still-unexplained variables at ``seed``;
    callers normally pass ``seed.read`` and ``acc=[seed]``. A walk that
    revisits a ``(state, used_vars)`` configuration already on its current
    path stops, which only matters for recursive call graphs.
    """
    graphs = _graphs_for(system, graphs)
    callers_cache = {}
    on_path = set()

    def callers_of(name):
        if name not in callers_cache:
            callers_cache[name] = get_callers(name, system, graphs)
        return callers_cache[name]

    def visit(node, used, proc_name):
        config = (node, used)
        if config in on_path:
            return
        on_path.add(config)
        try:
            step(node, used, proc_name)
        finally:
            on_path.discard(config)

    def step(node, used, proc_name):
        scfg = graphs[proc_name]
        for pred in incoming_star(node, scfg):
            remaining = set(used)
            if pred.kind == ENTRY:
                params = [w for w in pred.params if w in remaining]
                if params:
                    _cross_to_callers(pred, params, proc_name)
                continue
            if not remaining & pred.written:
                if remaining:
                    visit(pred, frozenset(remaining), proc_name)
                continue
            acc.append(pred)
            remaining -= pred.written
            if remaining or pred.read:
                visit(pred, frozenset(remaining | pred.read), proc_name)

    def _cross_to_callers(entry, params, proc_name):
        indices = [get_parameter_index(entry, w) for w in params]
        for caller, site in callers_of(proc_name):
            renamed = set()
            for index in indices:
                try:
                    renamed.add(get_renamed_parameter(graphs[caller], site, index))
                except LiteralArgument:
                    pass
            if renamed:
                visit(site, frozenset(renamed), caller)

    visit(seed, frozenset(used_vars), proc)
    return acc


def explain(seed: SymbolicState, system, graphs=None) -> list:
    """The explanation list of a single seed: ``[seed]`` plus the walk."""
    return s_traversal(seed, seed.read, [seed], seed.proc, system, graphs)


@dataclass(frozen=True)
class ExpressionPlan:
    vanilla: frozenset
    explanation: tuple
    multiset: MultiplicityMultiset

    @property
    def points(self) -> frozenset:
        return self.multiset.support


@dataclass(frozen=True)
class InstrumentationPlan:
    """Per-expression multisets plus the change points of every quantifier.

    ``union`` is what a run must record to both check and diagnose: all
    expression supports and all quantifier change points (the latter matter
    when no ``q(x)`` expression already pulls them in).
    """

    per_expression: dict  # (atom, expression) -> ExpressionPlan
    union: frozenset
    quantifier_points: dict = field(default_factory=dict)  # Quantifier -> frozenset

    def for_expression(self, atom, expr) -> ExpressionPlan:
        return self.per_expression[(atom, expr)]

    def to_json(self) -> str:
        out = {}
        for q, points in self.quantifier_points.items():
            ordered = [_point_json(s) for s in sorted(points, key=SymbolicState.sort_key)]
            out[str(q)] = {"vanilla": ordered, "points": [{**p, "multiplicity": 1} for p in ordered]}
        for (_, expr), entry in self.per_expression.items():
            out[str(expr)] = {
                "vanilla": [_point_json(s) for s in sorted(entry.vanilla, key=SymbolicState.sort_key)],
                "points": [
                    {**_point_json(s), "multiplicity": entry.multiset[s]}
                    for s in sorted(entry.points, key=SymbolicState.sort_key)
                ],
            }
        return json.dumps(out, indent=2, ensure_ascii=False) + "\n"


def _point_json(state):
    return {"proc": state.proc, "line": state.line}


def build_plan(spec: Specification, system, graphs=None) -> InstrumentationPlan:
    graphs = _graphs_for(system, graphs)
    per_expression = {}
    cache = {}
    for key, seeds in vanilla_points(spec, system, graphs).items():
        acc = []
        for seed in sorted(seeds, key=SymbolicState.sort_key):
            if seed not in cache:
                cache[seed] = explain(seed, system, graphs)
            acc.extend(cache[seed])
        per_expression[key] = ExpressionPlan(seeds, tuple(acc), to_multiset(acc))
    quantifier_points = {q: frozenset(graphs[q.proc].writers_of(q.changed_var)) for q in spec.quantifiers}
    return InstrumentationPlan(per_expression, _union(per_expression, quantifier_points), quantifier_points)


def _union(per_expression, quantifier_points):
    return frozenset().union(
        *(p.points for p in per_expression.values()), *quantifier_points.values()
    )


def load_plan(text: str, spec: Specification, graphs: dict) -> InstrumentationPlan:
    """Rebuild a plan from :meth:`InstrumentationPlan.to_json` output.

    Expressions are matched to ``spec`` by their printed form; the explanation
    list is reconstructed in support order from the stored multiplicities.
    """
    data = json.loads(text)
    per_expression = {}
    for atom, expr in expressions_of(spec):
        try:
            entry = data[str(expr)]
        except KeyError:
            raise LinkError(f"plan has no entry for expression {expr}") from None
        vanilla = frozenset(graphs[p["proc"]].state_at(p["line"]) for p in entry["vanilla"])
        mu = {graphs[p["proc"]].state_at(p["line"]): int(p["multiplicity"]) for p in entry["points"]}
        acc = tuple(s for s, n in mu.items() for _ in range(n))
        per_expression[(atom, expr)] = ExpressionPlan(vanilla, acc, MultiplicityMultiset(mu))
    quantifier_points = {}
    for q in spec.quantifiers:
        entry = data.get(str(q), {"vanilla": []})
        quantifier_points[q] = frozenset(graphs[p["proc"]].state_at(p["line"]) for p in entry["vanilla"])
    return InstrumentationPlan(per_expression, _union(per_expression, quantifier_points), quantifier_points)


def plan_points(text: str) -> dict:
    """Expression text -> list of ``(proc, line, multiplicity)`` without a spec."""
    data = json.loads(text)
    return {
        expr: [(p["proc"], p["line"], int(p["multiplicity"])) for p in entry["points"]]
        for expr, entry in data.items()
    }
