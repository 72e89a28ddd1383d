"""Kernel expressions: abstract syntax, parser and printer.

Kernels are the user functions that parameterize operators. Surface syntax::

    \\l. list-map (\\w. (w, 1)) (split l)
    \\x y. (pi1 x, pi2 x + pi2 y)
    \\d. if pi2 d >= 0.05 then [d] else []
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from ..lexer import PicoSyntaxError, TokenStream, describe, tokenize
from ..values import PRIMS, UNIT, DataType, ListT, TupleT, format_value, value_equal

Loc = Optional[tuple]


@dataclass(frozen=True)
class KExpr:
    loc: Loc = field(default=None, compare=False, kw_only=True, repr=False)


@dataclass(frozen=True, eq=False)
class Lit(KExpr):
    value: Any

    def __eq__(self, other):
        return isinstance(other, Lit) and value_equal(self.value, other.value)

    def __hash__(self):
        return hash((Lit, type(self.value), self.value))


@dataclass(frozen=True)
class Var(KExpr):
    name: str


@dataclass(frozen=True)
class Builtin(KExpr):
    name: str


@dataclass(frozen=True)
class Param:
    name: str
    annot: Optional[DataType] = None


@dataclass(frozen=True)
class Lam(KExpr):
    params: tuple
    body: KExpr


@dataclass(frozen=True)
class App(KExpr):
    fn: KExpr
    args: tuple


@dataclass(frozen=True)
class TupleE(KExpr):
    items: tuple


@dataclass(frozen=True)
class ListE(KExpr):
    items: tuple


@dataclass(frozen=True)
class BinOp(KExpr):
    op: str
    left: KExpr
    right: KExpr


@dataclass(frozen=True)
class UnOp(KExpr):
    op: str
    operand: KExpr


@dataclass(frozen=True)
class If(KExpr):
    cond: KExpr
    then: KExpr
    else_: KExpr


# -- builtins -------------------------------------------------------------------

BUILTIN_ARITY = {
    "min": 2,
    "max": 2,
    "split": 1,
    "list-map": 2,
    "list-filter": 2,
    "concat": 2,
    "length": 1,
    "member": 2,
    "set-fluctuation": 1,
    "to-float": 1,
    "to-int": 1,
}

_PROJ = re.compile(r"pi([1-9][0-9]*)$")


def builtin_arity(name: str) -> int | None:
    if name in BUILTIN_ARITY:
        return BUILTIN_ARITY[name]
    if _PROJ.match(name):
        return 1
    return None


def projection_index(name: str) -> int | None:
    m = _PROJ.match(name)
    return int(m.group(1)) if m else None


# -- parser ---------------------------------------------------------------------

# Words that end an expression so kernels can sit inside operator syntax.
STOP_WORDS = frozenset(
    {"by", "win", "as", "of", "new", "to", "pair", "main", "then", "else"}
)
_KEYWORDS = STOP_WORDS | {"if", "and", "or", "not", "true", "false", "unit"}
_CMP = {"=": "=", "==": "=", "!=": "!=", "<": "<", "<=": "<=", "≤": "<=", ">": ">", ">=": ">=", "≥": ">="}


def parse_dtype(ts: TokenStream) -> DataType:
    tok = ts.peek()
    if tok.kind == "NAME" and tok.text in PRIMS:
        ts.next()
        return PRIMS[tok.text]
    if ts.accept("("):
        items = [parse_dtype(ts)]
        while ts.accept(","):
            items.append(parse_dtype(ts))
        ts.expect(")")
        return items[0] if len(items) == 1 else TupleT(tuple(items))
    if ts.accept("["):
        elem = parse_dtype(ts)
        ts.expect("]")
        return ListT(elem)
    raise ts.error("expected a data type, found %s" % describe(tok))


class KernelParser:
    """Recursive-descent parser producing unresolved kernel ASTs.

    Free names are left as :class:`Var`; :func:`resolve` later binds them to
    declared kernels or builtins.
    """

    def __init__(self, ts: TokenStream):
        self.ts = ts

    def expr(self) -> KExpr:
        tok = self.ts.peek()
        if self.ts.at("\\", "λ"):
            return self.lam()
        if self.ts.at("if"):
            self.ts.next()
            cond = self.expr()
            self.ts.expect("then")
            then = self.expr()
            self.ts.expect("else")
            else_ = self.expr()
            return If(cond, then, else_, loc=tok.loc)
        return self.or_expr()

    def lam(self) -> KExpr:
        tok = self.ts.next()
        params = []
        while not self.ts.at("."):
            name = self.ts.expect_kind("NAME", "a parameter name")
            if name.text in _KEYWORDS:
                raise self.ts.error("reserved word %r used as parameter" % name.text, name)
            annot = None
            if self.ts.accept(":"):
                annot = parse_dtype(self.ts)
            params.append(Param(name.text, annot))
        if not params:
            raise self.ts.error("lambda needs at least one parameter", tok)
        if len({p.name for p in params}) != len(params):
            raise self.ts.error("duplicate lambda parameter", tok)
        self.ts.expect(".")
        return Lam(tuple(params), self.expr(), loc=tok.loc)

    def _binary(self, ops, sub, assoc=True):
        left = sub()
        while True:
            tok = self.ts.peek()
            if tok.kind in ("OP", "NAME") and tok.text in ops:
                self.ts.next()
                right = sub()
                left = BinOp(ops[tok.text], left, right, loc=tok.loc)
                if not assoc:
                    return left
            else:
                return left

    def or_expr(self):
        return self._binary({"or": "or"}, self.and_expr)

    def and_expr(self):
        return self._binary({"and": "and"}, self.not_expr)

    def not_expr(self):
        tok = self.ts.peek()
        if self.ts.accept("not"):
            return UnOp("not", self.not_expr(), loc=tok.loc)
        return self.cmp_expr()

    def cmp_expr(self):
        return self._binary(_CMP, self.add_expr, assoc=False)

    def add_expr(self):
        return self._binary({"+": "+", "-": "-", "++": "++"}, self.mul_expr)

    def mul_expr(self):
        return self._binary({"*": "*", "/": "/"}, self.neg_expr)

    def neg_expr(self):
        tok = self.ts.peek()
        if self.ts.accept("-"):
            operand = self.neg_expr()
            if isinstance(operand, Lit) and type(operand.value) in (int, float):
                return Lit(-operand.value, loc=tok.loc)
            return UnOp("-", operand, loc=tok.loc)
        return self.app_expr()

    def app_expr(self):
        head = self.atom()
        args = []
        while self._starts_atom():
            args.append(self.atom())
        if args:
            return App(head, tuple(args), loc=head.loc)
        return head

    def _starts_atom(self) -> bool:
        tok = self.ts.peek()
        if tok.kind in ("INT", "FLOAT", "STRING"):
            return True
        if tok.kind == "NAME":
            return tok.text not in _KEYWORDS or tok.text in ("true", "false", "unit")
        return tok.kind == "OP" and tok.text in ("(", "[", "\\", "λ")

    def atom(self) -> KExpr:
        tok = self.ts.peek()
        if tok.kind == "INT":
            self.ts.next()
            return Lit(int(tok.text), loc=tok.loc)
        if tok.kind == "FLOAT":
            self.ts.next()
            return Lit(float(tok.text), loc=tok.loc)
        if tok.kind == "STRING":
            self.ts.next()
            try:
                return Lit(json.loads(tok.text, strict=False), loc=tok.loc)
            except json.JSONDecodeError:
                raise self.ts.error("malformed string literal %s" % tok.text, tok) from None
        if tok.kind == "NAME":
            if tok.text in ("true", "false"):
                self.ts.next()
                return Lit(tok.text == "true", loc=tok.loc)
            if tok.text == "unit":
                self.ts.next()
                return Lit(UNIT, loc=tok.loc)
            if tok.text in _KEYWORDS:
                raise self.ts.error("unexpected %s in kernel" % describe(tok), tok)
            self.ts.next()
            return Var(tok.text, loc=tok.loc)
        if self.ts.at("\\", "λ"):
            return self.lam()
        if self.ts.accept("("):
            items = [self.expr()]
            while self.ts.accept(","):
                items.append(self.expr())
            self.ts.expect(")")
            if len(items) == 1:
                return items[0]
            return TupleE(tuple(items), loc=tok.loc)
        if self.ts.accept("["):
            items = []
            if not self.ts.at("]"):
                items.append(self.expr())
                while self.ts.accept(","):
                    items.append(self.expr())
            self.ts.expect("]")
            return ListE(tuple(items), loc=tok.loc)
        raise self.ts.error("expected a kernel expression, found %s" % describe(tok), tok)


class UnresolvedName(PicoSyntaxError):
    pass


def resolve(e: KExpr, kernels: dict | None = None, filename: str = "<input>") -> KExpr:
    """Bind free names: declared kernels are inlined, the rest must be builtins."""
    kernels = kernels or {}

    def go(e, bound):
        if isinstance(e, Var):
            if e.name in bound:
                return e
            if e.name in kernels:
                return kernels[e.name]
            if builtin_arity(e.name) is not None:
                return Builtin(e.name, loc=e.loc)
            line, col = e.loc or (0, 0)
            raise UnresolvedName("unresolved name %r" % e.name, line, col, filename)
        if isinstance(e, (Lit, Builtin)):
            return e
        if isinstance(e, Lam):
            inner = bound | {p.name for p in e.params}
            return Lam(e.params, go(e.body, inner), loc=e.loc)
        if isinstance(e, App):
            return App(go(e.fn, bound), tuple(go(a, bound) for a in e.args), loc=e.loc)
        if isinstance(e, TupleE):
            return TupleE(tuple(go(a, bound) for a in e.items), loc=e.loc)
        if isinstance(e, ListE):
            return ListE(tuple(go(a, bound) for a in e.items), loc=e.loc)
        if isinstance(e, BinOp):
            return BinOp(e.op, go(e.left, bound), go(e.right, bound), loc=e.loc)
        if isinstance(e, UnOp):
            return UnOp(e.op, go(e.operand, bound), loc=e.loc)
        if isinstance(e, If):
            return If(go(e.cond, bound), go(e.then, bound), go(e.else_, bound), loc=e.loc)
        raise TypeError(e)

    return go(e, frozenset())


def free_names(e: KExpr) -> set:
    """Names a raw (unresolved) kernel refers to outside its own binders."""
    out: set = set()

    def go(e, bound):
        if isinstance(e, Var):
            if e.name not in bound:
                out.add(e.name)
        elif isinstance(e, Lam):
            go(e.body, bound | {p.name for p in e.params})
        elif isinstance(e, App):
            go(e.fn, bound)
            for a in e.args:
                go(a, bound)
        elif isinstance(e, (TupleE, ListE)):
            for a in e.items:
                go(a, bound)
        elif isinstance(e, BinOp):
            go(e.left, bound)
            go(e.right, bound)
        elif isinstance(e, UnOp):
            go(e.operand, bound)
        elif isinstance(e, If):
            go(e.cond, bound)
            go(e.then, bound)
            go(e.else_, bound)

    go(e, frozenset())
    return out


def parse_kernel(src: str, kernels: dict | None = None, filename: str = "<input>") -> KExpr:
    ts = TokenStream(tokenize(src, filename), filename)
    e = KernelParser(ts).expr()
    if ts.peek().kind != "EOF":
        raise ts.error("unexpected %s after kernel" % describe(ts.peek()))
    return resolve(e, kernels, filename)


def as_function(e: KExpr, arity: int) -> KExpr:
    """Eta-expand a bare builtin (``min``, ``pi1``) into a lambda of ``arity``."""
    if isinstance(e, Builtin) and builtin_arity(e.name) == arity:
        names = ["x"] if arity == 1 else ["x%d" % (i + 1) for i in range(arity)]
        return Lam(
            tuple(Param(n) for n in names),
            App(e, tuple(Var(n, loc=e.loc) for n in names), loc=e.loc),
            loc=e.loc,
        )
    return e


# -- printer ----------------------------------------------------------------------

_PREC = {"or": 1, "and": 2, "=": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
         "+": 5, "-": 5, "++": 5, "*": 6, "/": 6}


def _prec(e: KExpr) -> int:
    if isinstance(e, (Lam, If)):
        return 0
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, UnOp):
        return 3 if e.op == "not" else 7
    if isinstance(e, App):
        return 8
    if isinstance(e, Lit) and type(e.value) in (int, float) and e.value < 0:
        return 7
    return 9


def _wrap(e: KExpr, need: int) -> str:
    s = show_kernel(e)
    return s if _prec(e) >= need else "(" + s + ")"


def show_kernel(e: KExpr) -> str:
    if isinstance(e, Lit):
        return format_value(e.value)
    if isinstance(e, (Var, Builtin)):
        return e.name
    if isinstance(e, Lam):
        ps = " ".join(p.name if p.annot is None else "%s:%s" % (p.name, p.annot) for p in e.params)
        return "\\%s. %s" % (ps, show_kernel(e.body))
    if isinstance(e, If):
        return "if %s then %s else %s" % (show_kernel(e.cond), show_kernel(e.then), show_kernel(e.else_))
    if isinstance(e, App):
        return " ".join([_wrap(e.fn, 9)] + [_wrap(a, 9) for a in e.args])
    if isinstance(e, TupleE):
        return "(" + ", ".join(show_kernel(a) for a in e.items) + ")"
    if isinstance(e, ListE):
        return "[" + ", ".join(show_kernel(a) for a in e.items) + "]"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        if p == 4:
            return "%s %s %s" % (_wrap(e.left, p + 1), e.op, _wrap(e.right, p + 1))
        return "%s %s %s" % (_wrap(e.left, p), e.op, _wrap(e.right, p + 1))
    if isinstance(e, UnOp):
        if e.op == "not":
            return "not " + _wrap(e.operand, 3)
        return "-" + _wrap(e.operand, 8)
    raise TypeError(e)


def show_atom(e: KExpr) -> str:
    """Print ``e`` so it parses back as a single operator argument."""
    return _wrap(e, 9)
