"""State-based iCFTL fragment: prenex ``forall`` quantifiers over variable
changes and a Boolean body of comparisons between expressions and integers.

Surface syntax::

    forall q in changes(y).during(g) : q(y) < 4 and q.next(changes(x).during(g)) < 10

Several quantifiers are chained, each ending in ``:``. The body uses
``and``/``or``/``not`` and parentheses; comparators are ``< <= > >= == !=``.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Union

from .errors import LinkError, ParseError, ScopeError

COMPARATORS = ("<", "<=", ">", ">=", "==", "!=")
_KEYWORDS = frozenset({"forall", "in", "and", "or", "not", "changes", "during", "next"})


@dataclass(frozen=True)
class Quantifier:
    var: str
    changed_var: str
    proc: str

    def __str__(self):
        return f"forall {self.var} in changes({self.changed_var}).during({self.proc})"


@dataclass(frozen=True)
class ValueAt:
    binding_var: str
    program_var: str

    def __str__(self):
        return f"{self.binding_var}({self.program_var})"


@dataclass(frozen=True)
class NextChange:
    binding_var: str
    changed_var: str
    proc: str

    def __str__(self):
        return f"{self.binding_var}.next(changes({self.changed_var}).during({self.proc}))"


Expression = Union[ValueAt, NextChange]


@dataclass(frozen=True)
class AtomicConstraint:
    lhs: Union[Expression, int]
    op: str
    rhs: Union[Expression, int]
    index: int  # source position; keeps textually equal atoms distinct

    def __str__(self):
        return f"{self.lhs} {self.op} {self.rhs}"

    @property
    def expressions(self):
        return [side for side in (self.lhs, self.rhs) if not isinstance(side, int)]


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: "BoolFormula"


BoolFormula = Union[AtomicConstraint, And, Or, Not]


@dataclass(frozen=True)
class Specification:
    quantifiers: tuple
    body: BoolFormula

    def __str__(self):
        return print_spec(self)

    def quantifier(self, var) -> Quantifier:
        for q in self.quantifiers:
            if q.var == var:
                return q
        raise KeyError(var)

    def atoms(self) -> list:
        return _atoms(self.body)


def _atoms(formula):
    if isinstance(formula, AtomicConstraint):
        return [formula]
    if isinstance(formula, Not):
        return _atoms(formula.arg)
    out = []
    for arg in formula.args:
        out.extend(_atoms(arg))
    return out


def compare(op: str, left: int, right: int) -> bool:
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    if op == "==":
        return left == right
    if op == "!=":
        return left != right
    raise ValueError(op)


def evaluate_formula(formula: BoolFormula, atom_values) -> bool:
    """Fold ``formula`` given a mapping (or callable) from atoms to booleans."""
    lookup = atom_values if callable(atom_values) else atom_values.__getitem__
    if isinstance(formula, AtomicConstraint):
        return bool(lookup(formula))
    if isinstance(formula, Not):
        return not evaluate_formula(formula.arg, lookup)
    if isinstance(formula, And):
        return all(evaluate_formula(a, lookup) for a in formula.args)
    return any(evaluate_formula(a, lookup) for a in formula.args)


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op><=|>=|==|!=|[<>().:,-]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line = text.count("\n", 0, pos) + 1
            raise ParseError(line, f"unexpected character {text[pos:].lstrip()[:1]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), text.count("\n", 0, m.start(kind)) + 1))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0
        self.atom_count = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i][1]
        return None

    def line(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i][2]
        return self.tokens[-1][2] if self.tokens else 1

    def next(self):
        if self.i >= len(self.tokens):
            raise ParseError(self.line(), "unexpected end of specification")
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        line = self.line()
        _, text, _ = self.next()
        if text != value:
            raise ParseError(line, f"expected {value!r}, got {text!r}")

    def name(self):
        line = self.line()
        kind, text, _ = self.next()
        if kind != "name" or text in _KEYWORDS:
            raise ParseError(line, f"expected a name, got {text!r}")
        return text

    def changes_during(self):
        self.expect("changes")
        self.expect("(")
        var = self.name()
        self.expect(")")
        self.expect(".")
        self.expect("during")
        self.expect("(")
        proc = self.name()
        self.expect(")")
        return var, proc

    def spec(self):
        quantifiers = []
        while self.peek() == "forall":
            self.next()
            var = self.name()
            self.expect("in")
            changed, proc = self.changes_during()
            self.expect(":")
            quantifiers.append(Quantifier(var, changed, proc))
        if not quantifiers:
            raise ParseError(self.line(), "specification must start with 'forall'")
        body = self.disjunction()
        if self.i != len(self.tokens):
            raise ParseError(self.line(), f"unexpected {self.peek()!r}")
        return Specification(tuple(quantifiers), body)

    def disjunction(self):
        args = [self.conjunction()]
        while self.peek() == "or":
            self.next()
            args.append(self.conjunction())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conjunction(self):
        args = [self.negation()]
        while self.peek() == "and":
            self.next()
            args.append(self.negation())
        return args[0] if len(args) == 1 else And(tuple(args))

    def negation(self):
        if self.peek() == "not":
            self.next()
            return Not(self.negation())
        if self.peek() == "(":
            self.next()
            inner = self.disjunction()
            self.expect(")")
            return inner
        return self.atom()

    def atom(self):
        line = self.line()
        lhs = self.operand()
        op = self.peek()
        if op not in COMPARATORS:
            raise ParseError(self.line(), f"expected a comparator, got {op!r}")
        self.next()
        rhs = self.operand()
        if isinstance(lhs, int) and isinstance(rhs, int):
            raise ParseError(line, "an atomic constraint needs at least one expression")
        atom = AtomicConstraint(lhs, op, rhs, self.atom_count)
        self.atom_count += 1
        return atom

    def operand(self):
        line = self.line()
        kind, text, _ = self.next()
        if text == "-":
            kind, text, _ = self.next()
            if kind != "int":
                raise ParseError(line, "expected an integer after '-'")
            return -int(text)
        if kind == "int":
            return int(text)
        if kind != "name" or text in _KEYWORDS:
            raise ParseError(line, f"expected an expression, got {text!r}")
        if self.peek() == "(":
            self.next()
            var = self.name()
            self.expect(")")
            return ValueAt(text, var)
        if self.peek() == ".":
            self.next()
            self.expect("next")
            self.expect("(")
            var, proc = self.changes_during()
            self.expect(")")
            return NextChange(text, var, proc)
        raise ParseError(line, f"{text!r} is not an expression")


def parse_spec(text: str, system=None) -> Specification:
    """Parse a specification; when ``system`` is given, also link it."""
    spec = _Parser(text).spec()
    bound = [q.var for q in spec.quantifiers]
    if len(set(bound)) != len(bound):
        raise ScopeError("a binding variable is quantified twice")
    for atom in spec.atoms():
        for expr in atom.expressions:
            if expr.binding_var not in bound:
                raise ScopeError(f"{expr}: {expr.binding_var!r} is not bound by a quantifier")
    if system is not None:
        link_spec(spec, system)
    return spec


def link_spec(spec: Specification, system) -> None:
    """Raise :class:`LinkError` for unknown procedures; warn on variables
    that the named procedure never writes (the spec is then vacuous)."""
    from .scfg import build_scfg

    def check(var, proc, what):
        if proc not in system:
            raise LinkError(f"{what}: unknown procedure {proc!r}")
        if not build_scfg(system[proc]).writers_of(var):
            warnings.warn(f"{what}: {var!r} is never written in {proc!r}", stacklevel=3)

    for q in spec.quantifiers:
        check(q.changed_var, q.proc, str(q))
    for _, expr in expressions_of(spec):
        if isinstance(expr, NextChange):
            check(expr.changed_var, expr.proc, str(expr))


def expressions_of(spec: Specification) -> list:
    """Every ``(atom, expression)`` pair in source order."""
    return [(atom, expr) for atom in spec.atoms() for expr in atom.expressions]


# -- printing ----------------------------------------------------------------


def _print_formula(f, parent=None):
    if isinstance(f, AtomicConstraint):
        return str(f)
    if isinstance(f, Not):
        inner = _print_formula(f.arg, Not)
        return f"not {inner}"
    joiner = " and " if isinstance(f, And) else " or "
    text = joiner.join(_print_formula(a, type(f)) for a in f.args)
    if parent is not None:
        text = f"({text})"
    return text


def print_spec(spec: Specification) -> str:
    head = " : ".join(str(q) for q in spec.quantifiers)
    return f"{head} : {_print_formula(spec.body)}"
