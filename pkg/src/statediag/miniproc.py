"""MiniProc: a tiny imperative language with integer variables, procedures,
``for``/``if`` blocks closed by explicit ``endFor``/``endIf`` keywords, and
call statements whose arguments are names or integer literals.

One statement per line. Every statement carries the :class:`ProgramPoint`
of the source line it starts on, and block markers (``else:``, ``endIf``,
``endFor``) keep their own line numbers so they can show up in traces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union

from .errors import LinkError, ParseError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

KEYWORDS = frozenset({"def", "for", "in", "if", "else", "endFor", "endIf"})
ARITH_OPS = ("+", "-", "*")
COMPARE_OPS = ("<", ">", "==")

_PRECEDENCE = {"<": 0, ">": 0, "==": 0, "+": 1, "-": 1, "*": 2}


@dataclass(frozen=True, order=True)
class ProgramPoint:
    procedure: str
    line: int
    ordinal: int = 0

    def __str__(self):
        return f"{self.procedure}:{self.line}"


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, BinOp]


def expr_vars(expr: Expr) -> frozenset:
    """Names of all variables referenced by ``expr``."""
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    if isinstance(expr, BinOp):
        return expr_vars(expr.left) | expr_vars(expr.right)
    return frozenset()


# -- statements --------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    point: ProgramPoint
    target: str
    expr: Expr


@dataclass(frozen=True)
class ForIn:
    point: ProgramPoint
    var: str
    items: tuple
    body: tuple
    end_line: int


@dataclass(frozen=True)
class IfElse:
    point: ProgramPoint
    cond: Expr
    then_body: tuple
    else_body: Optional[tuple]
    else_line: Optional[int]
    end_line: int


@dataclass(frozen=True)
class Call:
    point: ProgramPoint
    callee: str
    args: tuple  # of str (variable) or int (literal)


Statement = Union[Assign, ForIn, IfElse, Call]


@dataclass(frozen=True)
class Procedure:
    name: str
    params: tuple
    body: tuple
    line: int


@dataclass(frozen=True)
class SystemOfProcedures:
    procedures: Mapping[str, Procedure]

    def __getitem__(self, name):
        return self.procedures[name]

    def __contains__(self, name):
        return name in self.procedures

    def __iter__(self):
        return iter(self.procedures)

    def __len__(self):
        return len(self.procedures)

    def __eq__(self, other):
        if not isinstance(other, SystemOfProcedures):
            return NotImplemented
        return dict(self.procedures) == dict(other.procedures)

    def __hash__(self):
        return hash(tuple(self.procedures.values()))

    def names(self):
        return sorted(self.procedures)


def iter_statements(body) -> Iterator[Statement]:
    """Pre-order walk over a statement list, descending into blocks."""
    for stmt in body:
        yield stmt
        if isinstance(stmt, ForIn):
            yield from iter_statements(stmt.body)
        elif isinstance(stmt, IfElse):
            yield from iter_statements(stmt.then_body)
            if stmt.else_body is not None:
                yield from iter_statements(stmt.else_body)


def source_lines(proc: Procedure) -> list:
    """Every line occupied by ``proc``: the def, statements and block markers."""
    lines = [proc.line]
    for stmt in iter_statements(proc.body):
        lines.append(stmt.point.line)
        if isinstance(stmt, ForIn):
            lines.append(stmt.end_line)
        elif isinstance(stmt, IfElse):
            if stmt.else_line is not None:
                lines.append(stmt.else_line)
            lines.append(stmt.end_line)
    return sorted(lines)


# -- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>==|[-+*<>=(),:\[\]]))"
)


def _tokenize(text, lineno):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(lineno, f"unexpected character {text[pos:].strip()[:1]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


class _Cursor:
    def __init__(self, tokens, lineno):
        self.tokens = tokens
        self.i = 0
        self.lineno = lineno

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def next(self):
        tok = self.peek()
        if tok[0] is None:
            raise ParseError(self.lineno, "unexpected end of line")
        self.i += 1
        return tok

    def expect(self, value):
        kind, text = self.next()
        if text != value:
            raise ParseError(self.lineno, f"expected {value!r}, got {text!r}")

    def name(self):
        kind, text = self.next()
        if kind != "name" or text in KEYWORDS:
            raise ParseError(self.lineno, f"expected a name, got {text!r}")
        return text

    def integer(self):
        negative = False
        if self.peek()[1] == "-":
            self.next()
            negative = True
        kind, text = self.next()
        if kind != "int":
            raise ParseError(self.lineno, f"expected an integer, got {text!r}")
        value = -int(text) if negative else int(text)
        if not INT64_MIN <= value <= INT64_MAX:
            raise ParseError(self.lineno, f"integer literal {value} out of 64-bit range")
        return value

    def done(self):
        if self.i != len(self.tokens):
            raise ParseError(self.lineno, f"unexpected {self.tokens[self.i][1]!r}")

    # expression grammar: comparison < additive < multiplicative < primary
    def expr(self):
        left = self.additive()
        if self.peek()[1] in COMPARE_OPS:
            op = self.next()[1]
            left = BinOp(op, left, self.additive())
        return left

    def additive(self):
        left = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.primary()
        while self.peek()[1] == "*":
            self.next()
            left = BinOp("*", left, self.primary())
        return left

    def primary(self):
        kind, text = self.peek()
        if text == "(":
            self.next()
            inner = self.additive()
            self.expect(")")
            return inner
        if kind == "int" or text == "-":
            return Const(self.integer())
        return Var(self.name())


def _is_comparison(expr):
    return isinstance(expr, BinOp) and expr.op in COMPARE_OPS


# -- parser ------------------------------------------------------------------


class _Block:
    def __init__(self, kind, lineno, **info):
        self.kind = kind
        self.lineno = lineno
        self.info = info
        self.body = []
        self.else_body = None
        self.else_line = None


def parse_program(source: str) -> SystemOfProcedures:
    """Parse MiniProc source into a linked :class:`SystemOfProcedures`.

    Raises :class:`ParseError` on malformed text and :class:`LinkError` when a
    call names an unknown procedure or passes the wrong number of arguments.
    """
    procedures = {}
    proc_block = None
    stack = []
    current = None  # name of the procedure being parsed

    def finish_procedure(lineno):
        if stack:
            opener = stack[-1]
            raise ParseError(opener.lineno, f"unclosed {opener.kind!r} block")
        if proc_block is not None:
            procedures[current] = Procedure(
                current, proc_block.info["params"], tuple(proc_block.body), proc_block.lineno
            )

    lines = source.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        tokens = _tokenize(raw, lineno)
        if not tokens:
            continue
        cur = _Cursor(tokens, lineno)
        head = tokens[0][1]

        if head == "def":
            finish_procedure(lineno)
            cur.next()
            name = cur.name()
            if name in procedures or name == current:
                raise LinkError(f"line {lineno}: procedure {name!r} defined twice")
            cur.expect("(")
            params = []
            if cur.peek()[1] != ")":
                params.append(cur.name())
                while cur.peek()[1] == ",":
                    cur.next()
                    params.append(cur.name())
            cur.expect(")")
            cur.expect(":")
            cur.done()
            if len(set(params)) != len(params):
                raise ParseError(lineno, f"duplicate parameter in {name!r}")
            current = name
            proc_block = _Block("def", lineno, params=tuple(params))
            continue

        if proc_block is None:
            raise ParseError(lineno, "statement outside of a procedure")
        point = ProgramPoint(current, lineno)
        target = stack[-1] if stack else proc_block
        body = target.else_body if target.else_body is not None else target.body

        if head == "for":
            cur.next()
            var = cur.name()
            cur.expect("in")
            cur.expect("[")
            items = [cur.integer()]
            while cur.peek()[1] == ",":
                cur.next()
                items.append(cur.integer())
            cur.expect("]")
            cur.expect(":")
            cur.done()
            stack.append(_Block("for", lineno, var=var, items=tuple(items), point=point))
        elif head == "if":
            cur.next()
            cond = cur.expr()
            cur.expect(":")
            cur.done()
            if not _is_comparison(cond):
                raise ParseError(lineno, "if condition must be a comparison")
            stack.append(_Block("if", lineno, cond=cond, point=point))
        elif head == "else":
            cur.next()
            cur.expect(":")
            cur.done()
            if not stack or stack[-1].kind != "if" or stack[-1].else_body is not None:
                raise ParseError(lineno, "'else' without matching 'if'")
            stack[-1].else_body = []
            stack[-1].else_line = lineno
        elif head == "endFor":
            cur.next()
            cur.done()
            if not stack or stack[-1].kind != "for":
                raise ParseError(lineno, "'endFor' without matching 'for'")
            blk = stack.pop()
            stmt = ForIn(blk.info["point"], blk.info["var"], blk.info["items"], tuple(blk.body), lineno)
            _append(stack, proc_block, stmt)
        elif head == "endIf":
            cur.next()
            cur.done()
            if not stack or stack[-1].kind != "if":
                raise ParseError(lineno, "'endIf' without matching 'if'")
            blk = stack.pop()
            stmt = IfElse(
                blk.info["point"],
                blk.info["cond"],
                tuple(blk.body),
                None if blk.else_body is None else tuple(blk.else_body),
                blk.else_line,
                lineno,
            )
            _append(stack, proc_block, stmt)
        elif tokens[0][0] == "name" and head not in KEYWORDS and len(tokens) > 1 and tokens[1][1] == "=":
            name = cur.name()
            cur.expect("=")
            expr = cur.expr()
            cur.done()
            if _is_comparison(expr):
                raise ParseError(lineno, "comparisons are only allowed in if conditions")
            body.append(Assign(point, name, expr))
        elif tokens[0][0] == "name" and head not in KEYWORDS and len(tokens) > 1 and tokens[1][1] == "(":
            callee = cur.name()
            cur.expect("(")
            args = []
            if cur.peek()[1] != ")":
                args.append(_call_arg(cur))
                while cur.peek()[1] == ",":
                    cur.next()
                    args.append(_call_arg(cur))
            cur.expect(")")
            cur.done()
            body.append(Call(point, callee, tuple(args)))
        else:
            raise ParseError(lineno, f"cannot parse statement starting with {head!r}")

    finish_procedure(len(lines) + 1)
    system = SystemOfProcedures(procedures)
    link(system)
    return system


def _append(stack, proc_block, stmt):
    target = stack[-1] if stack else proc_block
    (target.else_body if target.else_body is not None else target.body).append(stmt)


def _call_arg(cur):
    kind, text = cur.peek()
    if kind == "int" or text == "-":
        return cur.integer()
    return cur.name()


def link(system: SystemOfProcedures) -> None:
    """Check that every call names a known procedure with matching arity."""
    for proc in system.procedures.values():
        for stmt in iter_statements(proc.body):
            if not isinstance(stmt, Call):
                continue
            if stmt.callee not in system.procedures:
                raise LinkError(f"{stmt.point}: call to unknown procedure {stmt.callee!r}")
            arity = len(system.procedures[stmt.callee].params)
            if len(stmt.args) != arity:
                raise LinkError(
                    f"{stmt.point}: {stmt.callee!r} takes {arity} argument(s), got {len(stmt.args)}"
                )


# -- pretty printer ----------------------------------------------------------


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Const):
        return str(expr.value)
    if isinstance(expr, Var):
        return expr.name
    prec = _PRECEDENCE[expr.op]
    left = format_expr(expr.left)
    right = format_expr(expr.right)
    if isinstance(expr.left, BinOp) and _PRECEDENCE[expr.left.op] < prec:
        left = f"({left})"
    if isinstance(expr.right, BinOp) and _PRECEDENCE[expr.right.op] <= prec:
        right = f"({right})"
    return f"{left} {expr.op} {right}"


def _format_body(body, depth, out):
    pad = "    " * depth
    for stmt in body:
        if isinstance(stmt, Assign):
            out.append(f"{pad}{stmt.target} = {format_expr(stmt.expr)}")
        elif isinstance(stmt, Call):
            out.append(f"{pad}{stmt.callee}({','.join(str(a) for a in stmt.args)})")
        elif isinstance(stmt, ForIn):
            items = ", ".join(str(i) for i in stmt.items)
            out.append(f"{pad}for {stmt.var} in [{items}]:")
            _format_body(stmt.body, depth + 1, out)
            out.append(f"{pad}endFor")
        elif isinstance(stmt, IfElse):
            out.append(f"{pad}if {format_expr(stmt.cond)}:")
            _format_body(stmt.then_body, depth + 1, out)
            if stmt.else_body is not None:
                out.append(f"{pad}else:")
                _format_body(stmt.else_body, depth + 1, out)
            out.append(f"{pad}endIf")


def pretty_print(system: SystemOfProcedures) -> str:
    """Canonical MiniProc text; procedures in definition-line order."""
    out = []
    for proc in sorted(system.procedures.values(), key=lambda p: p.line):
        out.append(f"def {proc.name}({','.join(proc.params)}):")
        _format_body(proc.body, 1, out)
    return "\n".join(out) + "\n" if out else ""
