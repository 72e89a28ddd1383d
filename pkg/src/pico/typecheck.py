"""Operator and pipeline typing.

Data types are inferred forward with the kernel solver: every open input gets
a type variable, emitters pin concrete types, and composition unifies. All
collections in one pipeline share a single structure type, so structure
polymorphism is tracked as one admissible set that each operator narrows.
An empty set means some operator cannot accept what flows into it; the error
names that operator's rule and the earlier constraint it clashes with.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ast import (
    BCombine,
    BMap,
    Collect,
    Emit,
    FlatMap,
    FoldReduce,
    Map,
    Merge,
    New,
    Operator,
    Pair,
    Pipeline,
    Reduce,
    To,
)
from .collections import SIGMA, SIGMA_B, SIGMA_O, show_sigma_set
from .kernel.infer import FnT, KernelTypeError, Solver, TVar, infer_in
from .values import DataType, ListT, TupleT


class PicoTypeError(Exception):
    def __init__(self, rule: str, message: str, loc=None, filename: str = "<input>"):
        super().__init__(message)
        self.rule = rule
        self.message = message
        self.loc = loc
        self.filename = filename

    def __str__(self):
        line, col = self.loc or (0, 0)
        return "%s:%d:%d: rule %s: %s" % (self.filename, line, col, self.rule, self.message)


class NotTopLevel(PicoTypeError):
    def __init__(self, actual: "PipelineType", loc=None, filename: str = "<input>"):
        super().__init__(
            "top-level", "entry pipeline has type %s, expected ∅ → ∅" % actual, loc, filename
        )
        self.actual = actual


# -- types ---------------------------------------------------------------------------------


def _rename(types, mapping: dict) -> list:
    def go(t):
        if isinstance(t, TVar):
            if t.id not in mapping:
                mapping[t.id] = TVar(len(mapping) + 1)
            return mapping[t.id]
        if isinstance(t, TupleT):
            return TupleT(tuple(go(x) for x in t.items))
        if isinstance(t, ListT):
            return ListT(go(t.elem))
        if isinstance(t, FnT):
            return FnT(tuple(go(x) for x in t.params), go(t.result))
        return t

    return [None if t is None else go(t) for t in types]


def show_dtype(t: DataType) -> str:
    """Print a data type, naming type variables 'a, 'b, ... by their number."""
    if isinstance(t, TVar):
        n = t.id - 1
        return "'" + (chr(ord("a") + n) if n < 26 else "t%d" % t.id)
    if isinstance(t, TupleT):
        return "(" + ", ".join(show_dtype(x) for x in t.items) + ")"
    if isinstance(t, ListT):
        return "[%s]" % show_dtype(t.elem)
    return str(t)


def _side(t: Optional[DataType], sigma: frozenset) -> str:
    if t is None:
        return "∅"
    s = str(next(iter(sigma))) if len(sigma) == 1 else "σ"
    return "<%s, %s>" % (show_dtype(t), s)


def _quantifier(sigma: frozenset, sides) -> str:
    if len(sigma) > 1 and any(t is not None for t in sides):
        return ", ∀σ ∈ %s" % show_sigma_set(sigma)
    return ""


@dataclass(frozen=True)
class PipelineType:
    """``input → output`` with the admissible structure types.

    Type variables are numbered in order of appearance, so two types are
    equal exactly when they are alpha-equivalent.
    """

    input: Optional[DataType]
    output: Optional[DataType]
    sigma: frozenset

    def __str__(self):
        return "%s → %s%s" % (
            _side(self.input, self.sigma),
            _side(self.output, self.sigma),
            _quantifier(self.sigma, (self.input, self.output)),
        )

    @property
    def structure(self):
        """The structure type when it is fixed, else None."""
        return next(iter(self.sigma)) if len(self.sigma) == 1 else None

    @property
    def is_toplevel(self) -> bool:
        return self.input is None and self.output is None


@dataclass(frozen=True)
class OperatorType:
    rule: str
    inputs: tuple  # data types; empty for emitters
    output: Optional[DataType]
    sigma: frozenset

    def __str__(self):
        left = " × ".join(_side(t, self.sigma) for t in self.inputs) or "∅"
        return "%s → %s%s" % (
            left,
            _side(self.output, self.sigma),
            _quantifier(self.sigma, self.inputs + (self.output,)),
        )


# -- structure constraints -----------------------------------------------------------------


@dataclass(frozen=True)
class _Constraint:
    allowed: frozenset
    rule: str
    loc: object
    what: str


def _describe_set(s: frozenset) -> str:
    if len(s) == 1:
        return str(next(iter(s)))
    return "%s (%s)" % (show_sigma_set(s), ", ".join(sorted(str(x) for x in s)))


def _rule_for(op: Operator) -> str:
    c = op.core
    if isinstance(c, Emit):
        return "emit"
    if isinstance(c, Collect):
        return "collect"
    if isinstance(c, (Map, FlatMap)):
        return "map"
    family = "combine" if isinstance(c, (Reduce, FoldReduce)) else (
        "b-map" if isinstance(c, BMap) else "b-combine"
    )
    return "%s-%s" % (op.modifier, family) if op.modifier else family


def _allowed(op: Operator) -> frozenset:
    c = op.core
    if isinstance(c, (Emit, Collect)):
        return frozenset({c.ctype.structure})
    if isinstance(c, (Map, FlatMap)):
        return SIGMA
    if op.window is not None:
        base = SIGMA_O
    elif isinstance(c, (Reduce, FoldReduce)) and op.key is not None:
        # Keyed aggregation is structure-polymorphic (see the word-count typing).
        base = SIGMA
    else:
        base = SIGMA_B
    return base


_DECLARED = ("emit", "collect")


class _Checker:
    def __init__(self, filename: str = "<input>"):
        self.s = Solver()
        self.filename = filename
        self.sigma = SIGMA
        self.constraints: list[_Constraint] = []

    def fail(self, rule: str, message: str, loc=None) -> PicoTypeError:
        return PicoTypeError(rule, message, loc, self.filename)

    def narrow(self, allowed: frozenset, rule: str, loc, what: str) -> None:
        new = self.sigma & allowed
        if new:
            self.sigma = new
            self.constraints.append(_Constraint(allowed, rule, loc, what))
            return
        mine = _Constraint(allowed, rule, loc, what)
        clash = next((c for c in self.constraints if not (c.allowed & allowed)), None)
        if clash is None:
            raise self.fail(
                rule,
                "%s needs a structure in %s, but the rest of the pipeline admits only %s"
                % (what, _describe_set(allowed), _describe_set(self.sigma)),
                loc,
            )
        # Sources and sinks state their structure outright; when one meets an
        # operator, the operator is the one used out of place.
        if rule in _DECLARED and clash.rule not in _DECLARED:
            mine, clash = clash, mine
        raise self.fail(
            mine.rule,
            "%s needs a structure in %s, but %s at %d:%d admits only %s"
            % (
                mine.what,
                _describe_set(mine.allowed),
                clash.what,
                clash.loc[0] if clash.loc else 0,
                clash.loc[1] if clash.loc else 0,
                _describe_set(clash.allowed),
            ),
            mine.loc,
        )

    def unify(self, a, b, rule: str, loc, what: str) -> None:
        try:
            self.s.unify(a, b, loc)
        except KernelTypeError:
            raise self.fail(
                rule,
                "%s: %s vs %s" % (what, show_dtype(self.s.zonk(a)), show_dtype(self.s.zonk(b))),
                loc,
            ) from None

    def kernel(self, e, params, rule: str, loc):
        self.s.ctx = (rule, loc)
        try:
            return infer_in(self.s, e, params)
        except KernelTypeError as exc:
            raise self._from_kernel(exc) from None

    def _from_kernel(self, exc: KernelTypeError) -> PicoTypeError:
        rule, loc = exc.ctx if exc.ctx else ("kernel", None)
        return self.fail(rule, exc.message, exc.loc or loc)

    def settle(self, final: bool = False) -> None:
        try:
            self.s.settle(final)
        except KernelTypeError as exc:
            raise self._from_kernel(exc) from None

    # -- operators --

    def operator(self, op: Operator, inputs=None) -> tuple:
        """Type ``op``; returns ``(rule, input types, output type)``."""
        rule = _rule_for(op)
        loc = op.loc
        what = "%s %r" % (op.core.keyword, op.label) if op.name else op.core.keyword
        c = op.core
        self.narrow(_allowed(op), rule, loc, what)
        if isinstance(c, Emit):
            return rule, (), c.ctype.data
        arity = 2 if op.binary else 1
        ins = list(inputs) if inputs is not None else [self.s.fresh() for _ in range(arity)]
        if isinstance(c, Collect):
            self.unify(ins[0], c.ctype.data, rule, loc, "collector declares a different data type")
            return rule, tuple(ins), None
        if op.key is not None and op.decomposable:
            keys = [self.kernel(op.key, [t], rule, loc) for t in ins]
            if len(keys) == 2:
                self.unify(keys[0], keys[1], rule, loc, "partitioning keys differ between inputs")
        if isinstance(c, BMap):
            if c.pairing == "zip":
                self.narrow(SIGMA_O, "zip", loc, "zip pairing")
            r = self.kernel(c.f, ins, rule, loc)
            out = r
            if c.flat:
                out = self.s.fresh()
                self.unify(r, ListT(out), rule, loc, "flatmap kernel must return a list")
            return rule, tuple(ins), out
        if isinstance(c, BCombine):
            if c.pairing == "zip":
                self.narrow(SIGMA_O, "zip", loc, "zip pairing")
            out = self._combine(c.inner, TupleT(tuple(ins)), rule, loc)
            return rule, tuple(ins), out
        if isinstance(c, Map):
            return rule, tuple(ins), self.kernel(c.f, ins, rule, loc)
        if isinstance(c, FlatMap):
            r = self.kernel(c.f, ins, rule, loc)
            out = self.s.fresh()
            self.unify(r, ListT(out), rule, loc, "flatmap kernel must return a list")
            return rule, tuple(ins), out
        return rule, tuple(ins), self._combine(c, ins[0], rule, loc)

    def _combine(self, c, t, rule, loc):
        if isinstance(c, Reduce):
            r = self.kernel(c.op, [t, t], rule, loc)
            self.unify(r, t, rule, loc, "reduce kernel must return its argument type")
            return t
        acc = self.kernel(c.z, [], rule, loc)
        r1 = self.kernel(c.fold, [acc, t], rule, loc)
        self.unify(r1, acc, rule, loc, "folding kernel must return the accumulator type")
        r2 = self.kernel(c.combine, [acc, acc], rule, loc)
        self.unify(r2, acc, rule, loc, "combining kernel must return the accumulator type")
        return acc

    # -- pipelines --

    def pipeline(self, p: Pipeline) -> tuple:
        """Returns ``(input, output)`` data types, None for void."""
        if isinstance(p, New):
            _, ins, out = self.operator(p.op)
            return (ins[0] if ins else None), out
        if isinstance(p, To):
            return self._to(p)
        if isinstance(p, Pair):
            return self._pair(p)
        if isinstance(p, Merge):
            return self._merge(p)
        raise TypeError(p)

    def _to(self, p: To):
        t_in, u = self.pipeline(p.src)
        if u is None:
            raise self.fail("to", "source of 'to' has no output to feed its destinations", p.loc)
        outputs = []
        for d in p.dests:
            if not has_input(d):
                raise self.fail("to", "destination %s has no input" % _brief(d), p.loc)
            d_in, d_out = self.pipeline(d)
            self.unify(u, d_in, "to", p.loc, "destination input differs from source output")
            if d_out is not None:
                outputs.append(d_out)
        if not outputs:
            return t_in, None
        for other in outputs[1:]:
            self.unify(outputs[0], other, "to", p.loc, "destinations produce different output types")
        return t_in, outputs[0]

    def _pair(self, p: Pair):
        left_in, right_in = has_input(p.left), has_input(p.right)
        if left_in and right_in:
            raise self.fail(
                "pair", "pair needs at least one void input path, but both inputs are open", p.loc
            )
        rule = "pair" if not right_in else "pair'"
        t1, u1 = self.pipeline(p.left)
        t2, u2 = self.pipeline(p.right)
        if u1 is None or u2 is None:
            raise self.fail(rule, "both paired pipelines must produce output", p.loc)
        _, ins, out = self.operator(p.op, [u1, u2])
        return (t1 if left_in else t2), out

    def _merge(self, p: Merge):
        if has_input(p.left) and has_input(p.right):
            raise self.fail(
                "merge", "merge needs at least one void input path, but both inputs are open", p.loc
            )
        t1, u1 = self.pipeline(p.left)
        t2, u2 = self.pipeline(p.right)
        if u1 is None or u2 is None:
            raise self.fail("merge", "both merged pipelines must produce output", p.loc)
        self.unify(u1, u2, "merge", p.loc, "merged pipelines produce different types")
        return (t1 if t1 is not None else t2), u1


def _brief(p: Pipeline) -> str:
    from .ast import show_pipeline

    s = show_pipeline(p)
    return repr(s if len(s) <= 40 else s[:37] + "...")


def has_input(p: Pipeline) -> bool:
    if isinstance(p, New):
        return not isinstance(p.op.core, Emit)
    if isinstance(p, To):
        return has_input(p.src)
    return has_input(p.left) or has_input(p.right)


def has_output(p: Pipeline) -> bool:
    if isinstance(p, New):
        return not isinstance(p.op.core, Collect)
    if isinstance(p, To):
        return any(has_output(d) for d in p.dests)
    return True


# -- entry points ----------------------------------------------------------------------------


def type_operator(op: Operator, inputs=None, filename: str = "<input>") -> OperatorType:
    """Type one operator, optionally fixing its input data types."""
    ck = _Checker(filename)
    rule, ins, out = ck.operator(op, inputs)
    ck.settle(final=True)
    types = _rename([ck.s.zonk(t) for t in ins] + [None if out is None else ck.s.zonk(out)], {})
    return OperatorType(rule, tuple(types[:-1]), types[-1], ck.sigma)


def type_pipeline(p: Pipeline, filename: str = "<input>") -> PipelineType:
    ck = _Checker(filename)
    t_in, t_out = ck.pipeline(p)
    ck.settle(final=True)
    zonk = ck.s.zonk
    t_in, t_out = _rename([None if t_in is None else zonk(t_in), None if t_out is None else zonk(t_out)], {})
    return PipelineType(t_in, t_out, ck.sigma)


def check_toplevel(prog) -> PipelineType:
    """Type the program's entry pipeline and require it to be ∅ → ∅."""
    p = prog.entry
    t = type_pipeline(p, prog.filename)
    if not t.is_toplevel:
        raise NotTopLevel(t, getattr(p, "loc", None), prog.filename)
    return t
