"""Monomorphic type inference for kernels.

Inference is unification-based. Constraints that cannot be decided on the spot
(numeric operands, tuple projections, concatenation) are queued on the
:class:`Solver` and settled once enough of the types are known; numeric type
variables still open at the very end default to ``int``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

from ..values import (
    BOOL,
    BOTTOM,
    FLOAT,
    INT,
    STR,
    Bottom,
    DataType,
    ListT,
    Prim,
    TupleT,
    type_of,
)
from .syntax import (
    App,
    BinOp,
    Builtin,
    If,
    KExpr,
    Lam,
    ListE,
    Lit,
    TupleE,
    UnOp,
    Var,
    projection_index,
)


class KernelTypeError(Exception):
    def __init__(self, message: str, loc=None, ctx=None):
        super().__init__(message)
        self.message = message
        self.loc = loc
        self.ctx = ctx


@dataclass(frozen=True)
class TVar(DataType):
    id: int

    def __str__(self):
        return "'t%d" % self.id


@dataclass(frozen=True)
class FnT(DataType):
    params: tuple
    result: DataType

    def __str__(self):
        return "(%s -> %s)" % (" * ".join(str(p) for p in self.params), self.result)


@dataclass(frozen=True)
class KernelType:
    params: tuple
    result: DataType

    @property
    def arity(self) -> int:
        return len(self.params)

    def __str__(self):
        if not self.params:
            return str(self.result)
        return "%s -> %s" % (" * ".join(str(p) for p in self.params), self.result)


@dataclass
class _Pending:
    kind: str  # "numeric" | "concat" | "field"
    t: DataType
    loc: object
    ctx: object
    index: int = 0
    result: Optional[DataType] = None


class Solver:
    """Substitution plus deferred constraints, shareable across many kernels."""

    def __init__(self):
        self.subst: dict[int, DataType] = {}
        self._ids = itertools.count(1)
        self.pending: list[_Pending] = []
        self.ctx = None

    def fresh(self) -> TVar:
        return TVar(next(self._ids))

    def resolve(self, t: DataType) -> DataType:
        while isinstance(t, TVar) and t.id in self.subst:
            t = self.subst[t.id]
        return t

    def zonk(self, t: DataType) -> DataType:
        t = self.resolve(t)
        if isinstance(t, TupleT):
            return TupleT(tuple(self.zonk(x) for x in t.items))
        if isinstance(t, ListT):
            return ListT(self.zonk(t.elem))
        if isinstance(t, FnT):
            return FnT(tuple(self.zonk(x) for x in t.params), self.zonk(t.result))
        return t

    def _occurs(self, v: TVar, t: DataType) -> bool:
        t = self.resolve(t)
        if t == v:
            return True
        if isinstance(t, TupleT):
            return any(self._occurs(v, x) for x in t.items)
        if isinstance(t, ListT):
            return self._occurs(v, t.elem)
        if isinstance(t, FnT):
            return any(self._occurs(v, x) for x in t.params) or self._occurs(v, t.result)
        return False

    def unify(self, a: DataType, b: DataType, loc=None) -> None:
        a, b = self.resolve(a), self.resolve(b)
        if a == b or isinstance(a, Bottom) or isinstance(b, Bottom):
            return
        if isinstance(a, TVar) or isinstance(b, TVar):
            v, t = (a, b) if isinstance(a, TVar) else (b, a)
            if self._occurs(v, t):
                raise self.error("infinite type %s = %s" % (v, self.zonk(t)), loc)
            self.subst[v.id] = t
            return
        if isinstance(a, TupleT) and isinstance(b, TupleT) and len(a.items) == len(b.items):
            for x, y in zip(a.items, b.items):
                self.unify(x, y, loc)
            return
        if isinstance(a, ListT) and isinstance(b, ListT):
            self.unify(a.elem, b.elem, loc)
            return
        if isinstance(a, FnT) and isinstance(b, FnT):
            if len(a.params) != len(b.params):
                raise self.error(
                    "function of %d argument(s) used with %d" % (len(a.params), len(b.params)), loc
                )
            for x, y in zip(a.params, b.params):
                self.unify(x, y, loc)
            self.unify(a.result, b.result, loc)
            return
        raise self.error("type mismatch: %s vs %s" % (self.zonk(a), self.zonk(b)), loc)

    def error(self, message: str, loc=None) -> KernelTypeError:
        return KernelTypeError(message, loc, self.ctx)

    def require(self, kind: str, t: DataType, loc, index: int = 0, result=None) -> None:
        self.pending.append(_Pending(kind, t, loc, self.ctx, index, result))

    def settle(self, final: bool = False) -> None:
        progress = True
        while progress:
            progress = False
            for c in list(self.pending):
                if self._try(c):
                    self.pending.remove(c)
                    progress = True
        if not final:
            return
        for c in list(self.pending):
            if c.kind == "numeric":
                self.unify(c.t, INT, c.loc)
        self.settle()
        for c in self.pending:
            if c.kind == "field":
                raise KernelTypeError(
                    "cannot infer the tuple type projected by pi%d; annotate the parameter" % c.index,
                    c.loc,
                    c.ctx,
                )
            raise KernelTypeError("cannot infer the operand type of concat", c.loc, c.ctx)

    def _try(self, c: _Pending) -> bool:
        t = self.resolve(c.t)
        if isinstance(t, TVar):
            return False
        if c.kind == "numeric":
            if t in (INT, FLOAT):
                return True
            raise KernelTypeError("arithmetic needs int or float, got %s" % self.zonk(t), c.loc, c.ctx)
        if c.kind == "concat":
            if t == STR or isinstance(t, ListT):
                return True
            raise KernelTypeError("concat needs str or a list, got %s" % self.zonk(t), c.loc, c.ctx)
        if not isinstance(t, TupleT):
            raise KernelTypeError("pi%d applied to non-tuple %s" % (c.index, self.zonk(t)), c.loc, c.ctx)
        if c.index > len(t.items):
            raise KernelTypeError(
                "pi%d out of range for %s" % (c.index, self.zonk(t)), c.loc, c.ctx
            )
        self.unify(t.items[c.index - 1], c.result, c.loc)
        return True


def _builtin_sig(name: str, s: Solver, loc) -> FnT:
    n = projection_index(name)
    if n is not None:
        a, r = s.fresh(), s.fresh()
        s.require("field", a, loc, n, r)
        return FnT((a,), r)
    a, b = s.fresh(), s.fresh()
    if name in ("min", "max"):
        return FnT((a, a), a)
    if name == "split":
        return FnT((STR,), ListT(STR))
    if name == "list-map":
        return FnT((FnT((a,), b), ListT(a)), ListT(b))
    if name == "list-filter":
        return FnT((FnT((a,), BOOL), ListT(a)), ListT(a))
    if name == "concat":
        s.require("concat", a, loc)
        return FnT((a, a), a)
    if name == "length":
        return FnT((ListT(a),), INT)
    if name == "member":
        return FnT((a, ListT(a)), BOOL)
    if name == "set-fluctuation":
        return FnT((ListT(FLOAT),), FLOAT)
    if name == "to-float":
        s.require("numeric", a, loc)
        return FnT((a,), FLOAT)
    if name == "to-int":
        s.require("numeric", a, loc)
        return FnT((a,), INT)
    raise s.error("unknown builtin %r" % name, loc)


def infer_expr(e: KExpr, env: dict, s: Solver) -> DataType:
    if isinstance(e, Lit):
        return type_of(e.value)
    if isinstance(e, Var):
        if e.name not in env:
            raise s.error("unbound variable %r" % e.name, e.loc)
        return env[e.name]
    if isinstance(e, Builtin):
        return _builtin_sig(e.name, s, e.loc)
    if isinstance(e, Lam):
        params = tuple(p.annot if p.annot is not None else s.fresh() for p in e.params)
        inner = dict(env)
        inner.update(zip((p.name for p in e.params), params))
        return FnT(params, infer_expr(e.body, inner, s))
    if isinstance(e, App):
        fn = infer_expr(e.fn, env, s)
        args = tuple(infer_expr(a, env, s) for a in e.args)
        fn_r = s.resolve(fn)
        if isinstance(fn_r, FnT) and len(fn_r.params) != len(args):
            raise s.error(
                "%s expects %d argument(s), got %d" % (_fn_name(e.fn), len(fn_r.params), len(args)),
                e.loc,
            )
        result = s.fresh()
        s.unify(fn, FnT(args, result), e.loc)
        return result
    if isinstance(e, TupleE):
        return TupleT(tuple(infer_expr(a, env, s) for a in e.items))
    if isinstance(e, ListE):
        elem = s.fresh()
        for item in e.items:
            s.unify(elem, infer_expr(item, env, s), item.loc)
        return ListT(elem)
    if isinstance(e, BinOp):
        left = infer_expr(e.left, env, s)
        right = infer_expr(e.right, env, s)
        if e.op in ("and", "or"):
            s.unify(left, BOOL, e.left.loc)
            s.unify(right, BOOL, e.right.loc)
            return BOOL
        s.unify(left, right, e.loc)
        if e.op in ("+", "-", "*", "/"):
            s.require("numeric", left, e.loc)
            return left
        if e.op == "++":
            s.require("concat", left, e.loc)
            return left
        return BOOL
    if isinstance(e, UnOp):
        t = infer_expr(e.operand, env, s)
        if e.op == "not":
            s.unify(t, BOOL, e.loc)
            return BOOL
        s.require("numeric", t, e.loc)
        return t
    if isinstance(e, If):
        s.unify(infer_expr(e.cond, env, s), BOOL, e.cond.loc)
        then = infer_expr(e.then, env, s)
        s.unify(then, infer_expr(e.else_, env, s), e.loc)
        return then
    raise TypeError(e)


def _fn_name(e: KExpr) -> str:
    if isinstance(e, Builtin):
        return e.name
    return "function"


def _contains_fn(t: DataType) -> bool:
    if isinstance(t, FnT):
        return True
    if isinstance(t, TupleT):
        return any(_contains_fn(x) for x in t.items)
    if isinstance(t, ListT):
        return _contains_fn(t.elem)
    return False


def infer_in(
    s: Solver, e: KExpr, param_types: Sequence[Optional[DataType]]
) -> DataType:
    """Type ``e`` as a function of ``param_types`` inside solver ``s``.

    Returns the (unzonked) result type. ``None`` entries become fresh variables.
    A non-lambda ``e`` with no parameters is typed as a constant.
    """
    params = [p if p is not None else s.fresh() for p in param_types]
    if isinstance(e, Lam):
        if len(e.params) != len(params):
            raise s.error(
                "kernel takes %d argument(s), operator supplies %d" % (len(e.params), len(params)),
                e.loc,
            )
        env = {}
        for p, t in zip(e.params, params):
            if p.annot is not None:
                s.unify(p.annot, t, e.loc)
            env[p.name] = t
        result = infer_expr(e.body, env, s)
    elif params:
        fn = infer_expr(e, {}, s)
        result = s.fresh()
        s.unify(fn, FnT(tuple(params), result), e.loc)
    else:
        result = infer_expr(e, {}, s)
    if _contains_fn(s.zonk(result)):
        raise s.error("kernel result must be data, not a function", e.loc)
    return result


def infer_kernel_type(e: KExpr, param_types: Sequence[Optional[DataType]] = ()) -> KernelType:
    s = Solver()
    params = [p if p is not None else s.fresh() for p in param_types]
    result = infer_in(s, e, params)
    s.settle(final=True)
    return KernelType(tuple(s.zonk(p) for p in params), s.zonk(result))


__all__ = [
    "BOTTOM",
    "FnT",
    "KernelType",
    "KernelTypeError",
    "Prim",
    "Solver",
    "TVar",
    "infer_expr",
    "infer_in",
    "infer_kernel_type",
]
