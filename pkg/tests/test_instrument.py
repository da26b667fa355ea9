import random
import time
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statediag.errors import LinkError, LiteralArgument, NotAParameter
from statediag.instrument import (
    build_plan,
    explain,
    get_callers,
    get_parameter_index,
    get_renamed_parameter,
    load_plan,
    plan_points,
    s_traversal,
    to_multiset,
    vanilla_points,
)
from statediag.miniproc import Call, iter_statements, parse_program
from statediag.scfg import build_all
from statediag.specs import parse_spec
from statediag.testkit import (
    GenConfig,
    gen_program,
    gen_spec_text,
    is_recursive,
    oracle_plan,
    oracle_relevance,
)

from .conftest import SPEC_NEXT, SPEC_Y, corpus, corpus_with_specs

KMG_LIST = [18, 16, 14, 12, 12, 9, 6, 6, 4, 4, 2, 2]
KMG_MU = {18: 1, 16: 1, 14: 1, 12: 2, 9: 1, 6: 2, 4: 2, 2: 2}


def _lines(states):
    return Counter(s.line for s in states)


def test_vanilla_points(kmg, spec_y):
    (key, points), = vanilla_points(spec_y, kmg).items()
    assert {(s.proc, s.line) for s in points} == {("g", 18)}


def test_vanilla_unwritten_variable(kmg):
    with pytest.warns(UserWarning):
        spec = parse_spec("forall q in changes(zz).during(g) : q(zz) < 4", kmg)
    assert all(not v for v in vanilla_points(spec, kmg).values())
    plan = build_plan(spec, kmg)
    assert plan.union == frozenset()


def test_vanilla_next_change_has_every_writer():
    system = parse_program(
        "def g():\n    x = 1\n    y = x\n    if y < 3:\n        x = 2\n    endIf\n    y = 4\n"
    )
    plan_keys = vanilla_points(parse_spec(SPEC_NEXT, system), system)
    (_, v1), (_, v2) = plan_keys.items()
    assert {s.line for s in v1} == {3, 7}
    # oracle: scan the AST for assignments to x
    writers = {s.point.line for s in iter_statements(system["g"].body) if getattr(s, "target", None) == "x"}
    assert {s.line for s in v2} == writers == {2, 5}


def test_kmg_explanation(kmg, kmg_graphs):
    seed = kmg_graphs["g"].state_at(18)
    acc = s_traversal(seed, seed.read, [seed], "g", kmg)
    assert acc[0] == seed
    assert _lines(acc) == Counter(KMG_LIST)
    assert {s.proc for s in acc} == {"k", "m", "g"}


def test_empty_read_set_stops_immediately(kmg, kmg_graphs):
    seed = kmg_graphs["k"].state_at(2)
    assert explain(seed, kmg) == [seed]


def test_multiplicities(kmg, spec_y):
    plan = build_plan(spec_y, kmg)
    (key,) = plan.per_expression
    mu = plan.for_expression(*key).multiset
    assert {s.line: n for s, n in mu.mu.items()} == KMG_MU
    assert {(s.proc, s.line) for s in plan.union} == {
        ("g", 18), ("g", 16), ("g", 14), ("g", 12), ("m", 9), ("k", 6), ("k", 4), ("k", 2)
    }


def test_to_multiset_counting_identity():
    assert to_multiset([]).support == frozenset()
    rng = random.Random(5)
    for _ in range(200):
        items = [rng.randint(0, 6) for _ in range(rng.randint(0, 30))]
        ms = to_multiset(items)
        assert ms.total() == len(items)
        assert all(ms[x] == items.count(x) for x in range(8))


def test_callers(kmg):
    callers = get_callers("g", kmg)
    assert [(name, s.line) for name, s in callers] == [("m", 10)]
    assert get_callers("k", kmg) == []


def test_callers_match_ast_scan():
    for system in corpus(100):
        graphs = build_all(system)
        for name in system:
            expected = sorted(
                (caller, stmt.point.line)
                for caller, proc in system.procedures.items()
                for stmt in iter_statements(proc.body)
                if isinstance(stmt, Call) and stmt.callee == name
            )
            assert [(c, s.line) for c, s in get_callers(name, system, graphs)] == expected


def test_parameter_index_and_renaming(kmg_graphs):
    entry = kmg_graphs["g"].entry
    assert get_parameter_index(entry, "y") == 1
    assert get_parameter_index(entry, "b") == 0
    with pytest.raises(NotAParameter):
        get_parameter_index(entry, "l")
    m = kmg_graphs["m"]
    site = m.state_at(10)
    assert get_renamed_parameter(m, site, 1) == "a"
    assert get_renamed_parameter(m, site, 0) == "c"


def test_parameter_index_matches_ast():
    for system in corpus(100):
        graphs = build_all(system)
        for name, proc in system.procedures.items():
            for i, p in enumerate(proc.params):
                assert get_parameter_index(graphs[name].entry, p) == i


def test_literal_argument():
    system = parse_program("def f():\n    a = 1\n    g(5,a)\ndef g(b,y):\n    z = b + y\n")
    graphs = build_all(system)
    site = graphs["f"].state_at(3)
    with pytest.raises(LiteralArgument):
        get_renamed_parameter(graphs["f"], site, 0)
    assert get_renamed_parameter(graphs["f"], site, 1) == "a"
    # the literal ends that branch of the walk; ``a`` is still followed
    seed = graphs["g"].state_at(5)
    assert _lines(explain(seed, system)) == Counter({5: 1, 2: 1})


def test_kill_semantics():
    system = parse_program("def f():\n    x = 1\n    x = 2\n    y = x\n")
    seed = build_all(system)["f"].state_at(4)
    assert _lines(explain(seed, system)) == Counter({4: 1, 3: 1})
    oracle = oracle_relevance(seed, system)
    assert {s.line: n for s, n in oracle.mu.items()} == {4: 1, 3: 1}


def test_oracle_agrees_on_kmg(kmg, kmg_graphs, spec_y):
    seed = kmg_graphs["g"].state_at(18)
    assert oracle_relevance(seed, kmg) == to_multiset(explain(seed, kmg))
    plan = build_plan(spec_y, kmg)
    for key, ms in oracle_plan(spec_y, kmg).items():
        assert plan.for_expression(*key).multiset == ms


def test_oracle_equivalence_200_systems():
    mismatches = 0
    for _, system, spec in corpus_with_specs(200):
        plan = build_plan(spec, system)
        for key, ms in oracle_plan(spec, system).items():
            mismatches += plan.for_expression(*key).multiset != ms
    assert mismatches == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31))
def test_oracle_equivalence_per_seed(seed):
    system = gen_program(GenConfig(seed=seed, allow_recursion=seed % 2 == 1))
    graphs = build_all(system)
    for graph in graphs.values():
        for state in graph.vertices:
            if state.is_entry or state.kind == "exit":
                continue
            assert to_multiset(explain(state, system, graphs)) == oracle_relevance(state, system)


def test_union_is_union_of_supports():
    for _, system, spec in corpus_with_specs(100):
        plan = build_plan(spec, system)
        expected = set()
        for p in plan.per_expression.values():
            expected |= p.points
        for pts in plan.quantifier_points.values():
            expected |= pts
        assert plan.union == expected


def test_recursion_terminates():
    system = parse_program(
        "def f(a,n):\n"
        "    b = a + n\n"
        "    if n > 0:\n"
        "        g(b,n)\n"
        "    endIf\n"
        "    y = b + a\n"
        "def g(c,n):\n"
        "    d = n - 1\n"
        "    f(c,d)\n"
        "    y = c\n"
    )
    assert is_recursive(system)
    spec = parse_spec("forall q in changes(y).during(f) : q(y) < 0", system)
    t0 = time.perf_counter()
    plan = build_plan(spec, system)
    assert time.perf_counter() - t0 < 1.0
    (key,) = plan.per_expression
    assert plan.for_expression(*key).multiset == oracle_plan(spec, system)[key]


def test_recursive_corpus_terminates():
    found = 0
    for seed in range(100):
        system = gen_program(GenConfig(seed=seed, allow_recursion=True))
        if not is_recursive(system):
            continue
        found += 1
        text = gen_spec_text(system, random.Random(seed))
        if text:
            build_plan(parse_spec(text, system), system)
    assert found >= 1


def test_plan_json_round_trip(kmg, kmg_graphs, spec_y):
    plan = build_plan(spec_y, kmg)
    text = plan.to_json()
    again = load_plan(text, spec_y, kmg_graphs)
    assert again.union == plan.union
    assert again.per_expression.keys() == plan.per_expression.keys()
    for key in plan.per_expression:
        assert again.for_expression(*key).multiset == plan.for_expression(*key).multiset
    points = plan_points(text)["q(y)"]
    assert points == sorted(points)
    assert again.to_json() == text


def test_load_plan_missing_expression(kmg, kmg_graphs):
    spec = parse_spec("forall q in changes(y).during(g) : q(y) < 4 and q(k) > 0", kmg)
    with pytest.raises(LinkError):
        load_plan(build_plan(parse_spec(SPEC_Y, kmg), kmg).to_json(), spec, kmg_graphs)
