"""Random MiniProc programs and specifications, plus independent oracles.

The relevance oracle re-derives predecessor relations and dataflow sets
straight from the AST and enumerates backward paths explicitly, counting one
contribution per distinct path prefix that ends at a state writing a tracked
variable. It shares no code with :mod:`statediag.scfg` or
:mod:`statediag.instrument`.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass

from .errors import ProgramError
from .instrument import MultiplicityMultiset
from .miniproc import (
    Assign,
    BinOp,
    Call,
    ForIn,
    IfElse,
    SystemOfProcedures,
    Var,
    parse_program,
)
from .scfg import SymbolicState

VAR_POOL = ("a", "b", "c", "d", "x", "y", "z")


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_procs: int = 5
    max_stmts_per_proc: int = 30
    max_call_depth: int = 3
    loop_max: int = 3
    max_nesting: int = 3
    allow_recursion: bool = False


class _ProgramWriter:
    def __init__(self, rng: random.Random, config: GenConfig, n_procs: int, params: dict):
        self.rng = rng
        self.config = config
        self.n_procs = n_procs
        self.params = params
        self.lines = []

    def expr(self, defined, depth=0):
        rng = self.rng
        if depth >= 2 or rng.random() < 0.4:
            if defined and rng.random() < 0.7:
                return rng.choice(sorted(defined))
            return str(rng.randint(-3, 9))
        op = rng.choice(("+", "+", "-", "*"))
        left = self.expr(defined, depth + 1)
        right = self.expr(defined, depth + 1)
        if op == "*":
            right = str(rng.randint(0, 2))
        return f"{left} {op} {right}"

    def callees(self, index, depth):
        if depth >= self.config.max_call_depth:
            return []
        out = list(range(index + 1, self.n_procs))
        if self.config.allow_recursion:
            out += list(range(0, index + 1))
        return out

    def body(self, index, defined, budget, depth, nesting, indent):
        """Emit statements; returns (variables surely defined after, stmts used)."""
        rng = self.rng
        used = 0
        target_len = rng.randint(1, max(1, budget))
        while used < target_len:
            roll = rng.random()
            pad = "    " * indent
            callees = self.callees(index, depth)
            if roll < 0.12 and nesting < self.config.max_nesting and budget - used >= 3:
                cond = f"{self.expr(defined)} {rng.choice(('<', '>', '=='))} {self.expr(defined)}"
                self.lines.append(f"{pad}if {cond}:")
                then_def, n1 = self.body(index, set(defined), (budget - used - 1) // 2, depth, nesting + 1, indent + 1)
                used += 1 + n1
                if rng.random() < 0.6:
                    self.lines.append(f"{pad}else:")
                    else_def, n2 = self.body(index, set(defined), max(0, budget - used), depth, nesting + 1, indent + 1)
                    used += n2
                else:
                    else_def = set(defined)
                self.lines.append(f"{pad}endIf")
                defined = then_def & else_def
            elif roll < 0.22 and nesting < self.config.max_nesting and budget - used >= 2:
                var = rng.choice(VAR_POOL)
                items = ", ".join(str(rng.randint(-2, 5)) for _ in range(rng.randint(1, self.config.loop_max)))
                self.lines.append(f"{pad}for {var} in [{items}]:")
                inner = set(defined) | {var}
                inner, n = self.body(index, inner, (budget - used - 1) // 2, depth, nesting + 1, indent + 1)
                used += 1 + n
                self.lines.append(f"{pad}endFor")
                defined = inner
            elif roll < 0.38 and callees:
                callee = rng.choice(callees)
                args = []
                for _ in self.params[callee]:
                    if defined and rng.random() < 0.8:
                        args.append(rng.choice(sorted(defined)))
                    else:
                        args.append(str(rng.randint(0, 5)))
                self.lines.append(f"{pad}p{callee}({','.join(args)})")
                used += 1
            else:
                var = rng.choice(VAR_POOL)
                self.lines.append(f"{pad}{var} = {self.expr(defined)}")
                defined = set(defined) | {var}
                used += 1
        return defined, used


def gen_source(config: GenConfig) -> str:
    rng = random.Random(config.seed)
    n_procs = rng.randint(1, config.max_procs)
    params = {0: []}
    for i in range(1, n_procs):
        params[i] = rng.sample(VAR_POOL, rng.randint(0, 3))
    writer = _ProgramWriter(rng, config, n_procs, params)
    for i in range(n_procs):
        writer.lines.append(f"def p{i}({','.join(params[i])}):")
        if rng.random() < 0.05:
            continue
        writer.body(i, set(params[i]), config.max_stmts_per_proc, 0 if i == 0 else 1, 0, 1)
    return "\n".join(writer.lines) + "\n"


def gen_program(config: GenConfig = GenConfig()) -> SystemOfProcedures:
    """A parseable, linked system whose entry procedure is ``p0``.

    Without recursion the program is also run once; seeds whose run would
    overflow are skipped deterministically.
    """
    from .runtime import execute

    attempt = 0
    while True:
        cfg = GenConfig(**{**config.__dict__, "seed": config.seed * 7919 + attempt})
        system = parse_program(gen_source(cfg))
        if config.allow_recursion:
            return system
        try:
            execute(system, "p0", [])
            return system
        except ProgramError:
            attempt += 1


def is_recursive(system: SystemOfProcedures) -> bool:
    graph = {}
    for name, proc in system.procedures.items():
        graph[name] = {s.callee for s in _walk(proc.body) if isinstance(s, Call)}
    state = {}

    def dfs(n):
        state[n] = 1
        for m in graph[n]:
            if state.get(m) == 1 or (m not in state and dfs(m)):
                return True
        state[n] = 2
        return False

    return any(n not in state and dfs(n) for n in graph)


def gen_spec_text(system: SystemOfProcedures, rng: random.Random):
    """A random specification over ``system``, or ``None`` if nothing is written."""
    writes = {}
    for name, proc in system.procedures.items():
        for s in _walk(proc.body):
            if isinstance(s, Assign):
                writes.setdefault(name, set()).add(s.target)
            elif isinstance(s, ForIn):
                writes.setdefault(name, set()).add(s.var)
    if not writes:
        return None
    procs = sorted(writes)
    quants = []
    for qi in range(1 if rng.random() < 0.85 else 2):
        proc = rng.choice(procs)
        quants.append((f"q{qi}", rng.choice(sorted(writes[proc])), proc))

    def atom():
        qvar, var, proc = rng.choice(quants)
        op = rng.choice(("<", "<=", ">", ">=", "==", "!="))
        const = rng.randint(-5, 15)
        if rng.random() < 0.6:
            expr = f"{qvar}({var})"
        else:
            p2 = rng.choice(procs)
            expr = f"{qvar}.next(changes({rng.choice(sorted(writes[p2]))}).during({p2}))"
        return f"{expr} {op} {const}" if rng.random() < 0.8 else f"{const} {op} {expr}"

    def formula(depth=0):
        roll = rng.random()
        if depth >= 2 or roll < 0.4:
            return atom()
        if roll < 0.55:
            return f"not {formula(depth + 1)}" if rng.random() < 0.5 else f"not ({formula(depth + 1)})"
        joiner = " and " if roll < 0.8 else " or "
        return "(" + joiner.join(formula(depth + 1) for _ in range(rng.randint(2, 3))) + ")"

    head = " : ".join(f"forall {q} in changes({v}).during({p})" for q, v, p in quants)
    return f"{head} : {formula()}"


def _walk(body):
    for s in body:
        yield s
        if isinstance(s, ForIn):
            yield from _walk(s.body)
        elif isinstance(s, IfElse):
            yield from _walk(s.then_body)
            yield from _walk(s.else_body or ())


# -- relevance oracle --------------------------------------------------------


def _names(expr):
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, BinOp):
        return _names(expr.left) | _names(expr.right)
    return set()


@dataclass
class _Node:
    proc: str
    line: int
    writes: frozenset
    reads: frozenset
    preds: list
    params: tuple = ()
    args: tuple = ()
    callee: str = None
    is_entry: bool = False


def _nodes_of(system: SystemOfProcedures) -> dict:
    nodes = {}
    for name, proc in system.procedures.items():
        def put(line, writes=(), reads=(), pred=None, **extra):
            nodes[(name, line)] = _Node(name, line, frozenset(writes), frozenset(reads), [pred], **extra)

        def seq(body, before):
            for s in body:
                line = s.point.line
                if isinstance(s, Assign):
                    put(line, {s.target}, _names(s.expr), before)
                    before = line
                elif isinstance(s, Call):
                    put(line, (), {a for a in s.args if isinstance(a, str)}, before, args=s.args, callee=s.callee)
                    before = line
                elif isinstance(s, ForIn):
                    put(line, {s.var}, (), before)
                    tail = seq(s.body, line)
                    put(s.end_line, (), (), tail)
                    before = s.end_line
                else:
                    put(line, (), _names(s.cond), before)
                    then_tail = seq(s.then_body, line)
                    else_tail = line
                    if s.else_body is not None:
                        put(s.else_line, (), (), line)
                        else_tail = seq(s.else_body, s.else_line)
                    put(s.end_line, (), (), then_tail)
                    if else_tail != then_tail:
                        nodes[(name, s.end_line)].preds.append(else_tail)
                    before = s.end_line
            return before

        nodes[(name, proc.line)] = _Node(
            name, proc.line, frozenset(proc.params), frozenset(), [], params=proc.params, is_entry=True
        )
        seq(proc.body, proc.line)
    return nodes


def _call_sites(nodes, callee):
    return sorted((n.proc, n.line) for n in nodes.values() if n.callee == callee)


def oracle_relevance(seed_state, system: SystemOfProcedures, nodes=None) -> MultiplicityMultiset:
    """Multiplicity of every state relevant to ``seed_state``, path by path."""
    nodes = nodes if nodes is not None else _nodes_of(system)
    seed = nodes[(seed_state.proc, seed_state.line)]
    contributions = set()  # distinct path prefixes ending at a relevant state
    # stack items: (current key, tracked vars, path of keys, configs on path)
    start = (seed.proc, seed.line)
    stack = [(start, frozenset(seed.reads), (start,), frozenset({(start, frozenset(seed.reads))}))]
    while stack:
        key, tracked, path, configs = stack.pop()
        node = nodes[key]
        for pred_line in node.preds:
            pkey = (node.proc, pred_line)
            pred = nodes[pkey]
            if pred.is_entry:
                carried = [pred.params.index(v) for v in pred.params if v in tracked]
                if not carried:
                    continue
                for site_key in _call_sites(nodes, node.proc):
                    site = nodes[site_key]
                    renamed = frozenset(site.args[i] for i in carried if isinstance(site.args[i], str))
                    if renamed and (site_key, renamed) not in configs:
                        stack.append((site_key, renamed, path + (pkey, site_key), configs | {(site_key, renamed)}))
                continue
            if tracked & pred.writes:
                contributions.add(path + (pkey,))
                after = (tracked - pred.writes) | pred.reads
            else:
                after = tracked
            if after and (pkey, after) not in configs:
                stack.append((pkey, after, path + (pkey,), configs | {(pkey, after)}))
    counts = Counter({start: 1})
    for prefix in contributions:
        counts[prefix[-1]] += 1
    return MultiplicityMultiset(
        {SymbolicState(proc, line, "oracle"): n for (proc, line), n in counts.items()}
    )


def oracle_plan(spec, system: SystemOfProcedures) -> dict:
    """``(atom, expression) -> multiset`` computed from the AST alone."""
    from .specs import ValueAt, expressions_of

    nodes = _nodes_of(system)
    out = {}
    for atom, expr in expressions_of(spec):
        if isinstance(expr, ValueAt):
            q = spec.quantifier(expr.binding_var)
            var, proc = q.changed_var, q.proc
        else:
            var, proc = expr.changed_var, expr.proc
        total = Counter()
        for n in nodes.values():
            if n.proc == proc and not n.is_entry and var in n.writes:
                total.update(oracle_relevance(SymbolicState(n.proc, n.line, "oracle"), system, nodes).mu)
        out[(atom, expr)] = MultiplicityMultiset(dict(total))
    return out


# -- reference evaluator -----------------------------------------------------


def reference_run(system: SystemOfProcedures, entry: str, args=()) -> list:
    """Final variable environment of every activation, in activation order.

    A plain recursive AST walker, kept separate from the interpreter in
    :mod:`statediag.runtime`.
    """
    from .miniproc import Const

    finals = []

    def value(expr, env):
        if isinstance(expr, Const):
            return expr.value
        if isinstance(expr, Var):
            return env[expr.name]
        left, right = value(expr.left, env), value(expr.right, env)
        return {
            "+": lambda: left + right,
            "-": lambda: left - right,
            "*": lambda: left * right,
            "<": lambda: left < right,
            ">": lambda: left > right,
            "==": lambda: left == right,
        }[expr.op]()

    def block(body, env):
        for s in body:
            if isinstance(s, Assign):
                env[s.target] = value(s.expr, env)
            elif isinstance(s, Call):
                activate(s.callee, [a if isinstance(a, int) else env[a] for a in s.args])
            elif isinstance(s, ForIn):
                for item in s.items:
                    env[s.var] = item
                    block(s.body, env)
            elif value(s.cond, env):
                block(s.then_body, env)
            elif s.else_body is not None:
                block(s.else_body, env)

    def activate(name, values):
        proc = system[name]
        env = dict(zip(proc.params, values))
        slot = len(finals)
        finals.append(None)
        block(proc.body, env)
        finals[slot] = env

    activate(entry, list(args))
    return finals
