"""Kernel evaluation.

Kernels are compiled once into nested Python closures; the executor calls the
result per element, so the interpretive overhead is paid only at compile time.
"""

from __future__ import annotations

import math
import re
from functools import lru_cache
from typing import Any, Callable

from ..values import PList
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


class KernelError(Exception):
    pass


class DivisionByZero(KernelError):
    pass


def divide(a, b):
    if type(a) is int and type(b) is int:
        if b == 0:
            raise DivisionByZero("integer division by zero")
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b > 0) else -q
    a, b = float(a), float(b)
    if b == 0.0:
        if a == 0.0 or math.isnan(a):
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


_WORDS = re.compile(r"[^ \t\n\r\f\v]+")


def _split(s):
    return PList(_WORDS.findall(s))


def _fluctuation(xs):
    if not xs:
        raise KernelError("set-fluctuation of an empty list")
    lo, hi = min(xs), max(xs)
    return divide(hi - lo, lo)


def _to_int(x):
    try:
        return int(x)
    except (OverflowError, ValueError) as e:
        raise KernelError("to-int: %s" % e) from None


BUILTINS: dict[str, Callable] = {
    "min": min,
    "max": max,
    "split": _split,
    "list-map": lambda f, xs: PList(map(f, xs)),
    "list-filter": lambda f, xs: PList(x for x in xs if f(x)),
    "concat": lambda a, b: a + b,
    "length": len,
    "member": lambda x, xs: x in xs,
    "set-fluctuation": _fluctuation,
    "to-float": float,
    "to-int": _to_int,
}


def builtin_impl(name: str) -> Callable:
    n = projection_index(name)
    if n is not None:
        i = n - 1
        return lambda t: t[i]
    return BUILTINS[name]


_ARITH = {
    "+": lambda a, b: a + b,
    "++": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": divide,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}

Env = tuple
Code = Callable[[Env], Any]


def _compile(e: KExpr, scope: dict, width: int) -> Code:
    if isinstance(e, Lit):
        v = e.value
        return lambda env: v
    if isinstance(e, Var):
        if e.name not in scope:
            raise KernelError("unbound variable %r" % e.name)
        i = scope[e.name]
        return lambda env: env[i]
    if isinstance(e, Builtin):
        f = builtin_impl(e.name)
        return lambda env: f
    if isinstance(e, Lam):
        inner = dict(scope)
        for j, p in enumerate(e.params):
            inner[p.name] = width + j
        arity = len(e.params)
        body = _compile(e.body, inner, width + arity)

        def make(env):
            outer = env[:width]

            def fn(*args):
                if len(args) != arity:
                    raise KernelError("arity mismatch: expected %d, got %d" % (arity, len(args)))
                return body(outer + args)

            return fn

        return make
    if isinstance(e, App):
        args = [_compile(a, scope, width) for a in e.args]
        if isinstance(e.fn, Builtin):
            f = builtin_impl(e.fn.name)
            if len(args) == 1:
                (a0,) = args
                return lambda env: f(a0(env))
            if len(args) == 2:
                a0, a1 = args
                return lambda env: f(a0(env), a1(env))
            return lambda env: f(*[a(env) for a in args])
        head = _compile(e.fn, scope, width)
        return lambda env: head(env)(*[a(env) for a in args])
    if isinstance(e, TupleE):
        items = [_compile(a, scope, width) for a in e.items]
        if len(items) == 2:
            i0, i1 = items
            return lambda env: (i0(env), i1(env))
        return lambda env: tuple(i(env) for i in items)
    if isinstance(e, ListE):
        items = [_compile(a, scope, width) for a in e.items]
        return lambda env: PList(i(env) for i in items)
    if isinstance(e, BinOp):
        left, right = _compile(e.left, scope, width), _compile(e.right, scope, width)
        if e.op == "and":
            return lambda env: left(env) and right(env)
        if e.op == "or":
            return lambda env: left(env) or right(env)
        op = _ARITH[e.op]
        return lambda env: op(left(env), right(env))
    if isinstance(e, UnOp):
        operand = _compile(e.operand, scope, width)
        if e.op == "not":
            return lambda env: not operand(env)
        return lambda env: -operand(env)
    if isinstance(e, If):
        c = _compile(e.cond, scope, width)
        t = _compile(e.then, scope, width)
        f = _compile(e.else_, scope, width)
        return lambda env: t(env) if c(env) else f(env)
    raise TypeError(e)


_HOST_ERRORS = (TypeError, IndexError, ValueError, OverflowError, RecursionError)


@lru_cache(maxsize=1024)
def compile_kernel(e: KExpr) -> Callable:
    """Turn a closed kernel into a Python callable.

    A lambda becomes a function of its parameters; any other closed term is
    a constant (such as a fold's initial value) and takes no arguments.
    """
    if isinstance(e, Lam):
        arity = len(e.params)
        code = _compile(e.body, {p.name: j for j, p in enumerate(e.params)}, arity)
    else:
        arity = 0
        code = _compile(e, {}, 0)

    def run(*args):
        if len(args) != arity:
            raise KernelError("arity mismatch: expected %d, got %d" % (arity, len(args)))
        try:
            return code(args)
        except KernelError:
            raise
        except _HOST_ERRORS as exc:
            raise KernelError(str(exc)) from None

    return run


def eval_kernel(e: KExpr, args=()) -> Any:
    return compile_kernel(e)(*args)
