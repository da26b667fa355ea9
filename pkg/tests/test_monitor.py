from decimal import Decimal

import pytest

from statediag.errors import MissingValue
from statediag.instrument import build_plan
from statediag.monitor import UNRESOLVED, Binding, TraceIndex, check, enumerate_bindings, eval_expr
from statediag.runtime import ConcreteState, DynamicRun, IotaTrace, execute, filter_trace
from statediag.scfg import ASSIGN, ENTRY, SymbolicState
from statediag.specs import NextChange, ValueAt, compare, evaluate_formula, parse_spec

from .conftest import SPEC_NEXT, corpus_with_specs


def _synthetic(events):
    """One run per label, events are ``(label, t, line, values)``."""
    labels = sorted({e[0] for e in events})
    runs = {lab: [ConcreteState(Decimal("0.0") + i * Decimal("0.01"), SymbolicState(lab, None, ENTRY), {})]
                  for i, lab in enumerate(labels)}
    for lab, t, line, values in events:
        runs[lab].append(ConcreteState(Decimal(t), SymbolicState(lab, line, ASSIGN, frozenset(values)), values))
    return IotaTrace(frozenset(labels), tuple(DynamicRun(tuple(runs[lab])) for lab in labels), dict(enumerate(labels)))


def test_single_binding_on_kmg(kmg, spec_y):
    trace = execute(kmg, "k")
    (binding,) = enumerate_bindings(trace, spec_y)
    bound = binding.state(trace, "q")
    assert (trace.labels[binding["q"][0]], bound.state.line) == ("g", 18)
    assert eval_expr(trace, binding, ValueAt("q", "y")) == 33
    verdicts = check(trace, spec_y)
    assert verdicts.falsified() == [binding]
    assert not verdicts.satisfied


def test_no_change_no_binding(kmg):
    spec = parse_spec("forall q in changes(c).during(g) : q(c) < 4")
    trace = execute(kmg, "k")
    assert enumerate_bindings(trace, spec) == []
    verdicts = check(trace, spec)
    assert len(verdicts) == 0 and verdicts.satisfied


def test_entry_events_are_not_changes(kmg):
    # g's entry binds y, but only line 18 changes it
    spec = parse_spec("forall q in changes(y).during(g) : q(y) > 0")
    assert len(enumerate_bindings(execute(kmg, "k"), spec)) == 1


def test_cross_product_count():
    trace = _synthetic(
        [("f", "1.0", 2, {"x": 1}), ("f", "2.0", 3, {"x": 2}), ("h", "1.5", 2, {"y": 1}),
         ("h", "2.5", 3, {"y": 2}), ("h", "3.5", 4, {"y": 3})]
    )
    spec = parse_spec("forall a in changes(x).during(f) : forall b in changes(y).during(h) : a(x) < b(y)")
    bindings = enumerate_bindings(trace, spec)
    assert len(bindings) == 6
    assert len(set(bindings)) == 6


def test_next_change_scan():
    trace = _synthetic(
        [("g", "1.0", 2, {"x": 7}), ("g", "1.5", 3, {"y": 1}), ("g", "2.0", 4, {"x": 9}), ("g", "3.0", 5, {"y": 2})]
    )
    spec = parse_spec(SPEC_NEXT)
    first, last = enumerate_bindings(trace, spec)
    nxt = NextChange("q", "x", "g")
    assert eval_expr(trace, first, nxt) == 9
    assert eval_expr(trace, last, nxt) is UNRESOLVED
    verdicts = check(trace, spec)
    assert verdicts[first].value is True  # 1 < 4 and 9 < 10
    assert verdicts[last].value is False  # nothing changes x after t=3.0
    assert verdicts[last].atom_values[spec.atoms()[1]] is UNRESOLVED


def test_missing_value_is_an_error():
    trace = _synthetic([("g", "1.0", 2, {"y": 1})])
    spec = parse_spec("forall q in changes(y).during(g) : q(k) < 4")
    with pytest.raises(MissingValue):
        check(trace, spec)


def _naive_check(trace, spec):
    """Rescan the whole trace for every atom of every binding."""
    events = trace.events()
    out = {}
    for binding in enumerate_bindings(trace, spec):
        def side(v):
            if isinstance(v, int):
                return v
            run, pos = binding[v.binding_var]
            bound = trace.runs[run][pos]
            if isinstance(v, ValueAt):
                return bound.values[v.program_var]
            for i, _, c in events:
                if (c.t > bound.t and trace.labels[i] == v.proc and not c.state.is_entry
                        and v.changed_var in c.state.written):
                    return c.values[v.changed_var]
            return None

        def atom_true(atom):
            lhs, rhs = side(atom.lhs), side(atom.rhs)
            return lhs is not None and rhs is not None and compare(atom.op, lhs, rhs)

        out[binding.key(trace)] = evaluate_formula(spec.body, atom_true)
    return out


def test_check_matches_naive_rescan():
    for seed, system, spec in corpus_with_specs(200):
        trace = execute(system, "p0")
        assert check(trace, spec).by_key() == _naive_check(trace, spec), seed


def test_verdicts_preserved_on_fslice():
    mismatches = 0
    for _, system, spec in corpus_with_specs(200):
        trace = execute(system, "p0")
        sliced = filter_trace(trace, build_plan(spec, system).union)
        mismatches += check(trace, spec).by_key() != check(sliced, spec).by_key()
    assert mismatches == 0


def test_trace_index_bisect():
    trace = _synthetic([("g", f"{t}.0", 2, {"x": t}) for t in range(1, 50)])
    index = TraceIndex(trace)
    for t in ["0.5", "1.0", "10.5", "48.9", "49.0"]:
        got = index.next_write("g", "x", Decimal(t))
        expected = next((c for c in trace.runs[0] if c.t > Decimal(t) and "x" in c.values), None)
        assert got == expected


def test_binding_describe(kmg, spec_y):
    trace = execute(kmg, "k")
    (binding,) = enumerate_bindings(trace, spec_y)
    assert binding.describe(trace) == "q=g:18@1.6"
    assert isinstance(binding, Binding)
