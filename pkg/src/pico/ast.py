"""Operators and pipelines as immutable trees, plus structural normalization.

Pretty-printed text uses the same surface syntax the parser accepts, so
``parse(show(p))`` rebuilds ``p``. Declaration names ride along on operators
for graph labels but never take part in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .collections import CollectionType, WindowingPolicy
from .kernel.syntax import KExpr, show_atom
from .values import format_value

Loc = Optional[tuple]


# -- core operators ----------------------------------------------------------------


@dataclass(frozen=True)
class Map:
    f: KExpr
    keyword = "map"


@dataclass(frozen=True)
class FlatMap:
    f: KExpr
    keyword = "flatmap"


@dataclass(frozen=True)
class Reduce:
    op: KExpr
    keyword = "reduce"


@dataclass(frozen=True)
class FoldReduce:
    fold: KExpr
    z: KExpr
    combine: KExpr
    keyword = "fold-reduce"


Combine = Union[Reduce, FoldReduce]


@dataclass(frozen=True)
class BMap:
    pairing: str  # "zip" | "join"
    f: KExpr
    flat: bool = False

    @property
    def keyword(self) -> str:
        return "%s-%s" % (self.pairing, "flatmap" if self.flat else "map")


@dataclass(frozen=True)
class BCombine:
    pairing: str
    inner: Combine

    @property
    def keyword(self) -> str:
        return "%s-%s" % (self.pairing, self.inner.keyword)


@dataclass(frozen=True)
class Endpoint:
    """A path literal (``named=False``) or a name bound when the program runs."""

    value: str
    named: bool = False

    def __str__(self):
        return self.value if self.named else format_value(self.value)


@dataclass(frozen=True)
class Emit:
    kind: str  # "file" | "socket" | "replay"
    endpoint: Endpoint
    ctype: CollectionType

    @property
    def keyword(self) -> str:
        return "from-" + self.kind


@dataclass(frozen=True)
class Collect:
    kind: str  # "file" | "socket" | "replay" | "stdout"
    endpoint: Optional[Endpoint]
    ctype: CollectionType

    @property
    def keyword(self) -> str:
        return "to-" + self.kind


Core = Union[Map, FlatMap, Reduce, FoldReduce, BMap, BCombine, Emit, Collect]

DECOMPOSABLE = (Reduce, FoldReduce, BMap, BCombine)
BINARY = (BMap, BCombine)


@dataclass(frozen=True)
class Operator:
    core: Core
    window: Optional[WindowingPolicy] = None
    key: Optional[KExpr] = None
    name: Optional[str] = field(default=None, compare=False)
    # Modifier prefix written where a named operator is used, e.g. "wp" in "wp min".
    use_site: str = field(default="", compare=False)
    loc: Loc = field(default=None, compare=False, repr=False)

    @property
    def modifier(self) -> str:
        return ("w" if self.window else "") + ("p" if self.key is not None else "")

    @property
    def decomposable(self) -> bool:
        return isinstance(self.core, DECOMPOSABLE)

    @property
    def binary(self) -> bool:
        return isinstance(self.core, BINARY)

    @property
    def label(self) -> str:
        if self.name is None:
            return self.core.keyword
        if self.use_site and self.decomposable:
            return "%s(%s)" % (self.use_site, self.name)
        return self.name


# -- pipelines -----------------------------------------------------------------------


@dataclass(frozen=True)
class New:
    op: Operator
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class To:
    src: "Pipeline"
    dests: tuple
    loc: Loc = field(default=None, compare=False, repr=False)

    @property
    def linear(self) -> bool:
        return len(self.dests) == 1


@dataclass(frozen=True)
class Pair:
    left: "Pipeline"
    right: "Pipeline"
    op: Operator
    loc: Loc = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Merge:
    left: "Pipeline"
    right: "Pipeline"
    loc: Loc = field(default=None, compare=False, repr=False)


Pipeline = Union[New, To, Pair, Merge]


def operators(p: Pipeline) -> list:
    """Every operator occurrence in ``p``, left to right."""
    if isinstance(p, New):
        return [p.op]
    if isinstance(p, To):
        out = operators(p.src)
        for d in p.dests:
            out += operators(d)
        return out
    if isinstance(p, Pair):
        return operators(p.left) + operators(p.right) + [p.op]
    return operators(p.left) + operators(p.right)


# -- printing --------------------------------------------------------------------------


def show_operator(op: Operator) -> str:
    c = op.core
    if isinstance(c, (Map, FlatMap)):
        body = "%s %s" % (c.keyword, show_atom(c.f))
    elif isinstance(c, Reduce):
        body = "reduce %s" % show_atom(c.op)
    elif isinstance(c, FoldReduce):
        body = "fold-reduce %s %s %s" % (show_atom(c.fold), show_atom(c.z), show_atom(c.combine))
    elif isinstance(c, BMap):
        body = "%s %s" % (c.keyword, show_atom(c.f))
    elif isinstance(c, BCombine):
        inner = show_operator(Operator(c.inner))
        body = "%s-%s" % (c.pairing, inner)
    elif isinstance(c, Emit):
        body = "%s %s as %s of %s" % (c.keyword, c.endpoint, c.ctype.structure, c.ctype.data)
    elif isinstance(c, Collect):
        target = "" if c.endpoint is None else " %s" % c.endpoint
        body = "%s%s as %s of %s" % (c.keyword, target, c.ctype.structure, c.ctype.data)
    else:
        raise TypeError(c)
    parts = [body]
    if op.modifier:
        parts.insert(0, op.modifier)
    if op.key is not None:
        parts.append("by " + show_atom(op.key))
    if op.window is not None:
        parts.append("win " + str(op.window))
    return " ".join(parts)


def show_pipeline(p: Pipeline) -> str:
    if isinstance(p, New):
        return "new " + show_operator(p.op)
    if isinstance(p, To):
        if p.linear:
            left = show_pipeline(p.src)
            if isinstance(p.src, To) and p.src.linear:
                left = "(%s)" % left
            return "%s | %s" % (left, show_pipeline(p.dests[0]))
        return "to(%s; %s)" % (show_pipeline(p.src), ", ".join(show_pipeline(d) for d in p.dests))
    if isinstance(p, Pair):
        return "pair(%s, %s, %s)" % (show_pipeline(p.left), show_pipeline(p.right), show_operator(p.op))
    if isinstance(p, Merge):
        return "%s + %s" % (_merge_operand(p.left, True), _merge_operand(p.right, False))
    raise TypeError(p)


def _merge_operand(p: Pipeline, left: bool) -> str:
    s = show_pipeline(p)
    if (isinstance(p, To) and p.linear) or (left and isinstance(p, Merge)):
        return "(%s)" % s
    return s


# -- normalization ------------------------------------------------------------------------


def _erase(op: Operator) -> Operator:
    if op.decomposable or (op.window is None and op.key is None and not op.use_site):
        return op
    return replace(op, window=None, key=None, use_site="")


def _linear_chain(p: Pipeline) -> list:
    if isinstance(p, To) and p.linear:
        return _linear_chain(p.src) + _linear_chain(p.dests[0])
    return [p]


def _merge_operands(p: Pipeline) -> list:
    if isinstance(p, Merge):
        return _merge_operands(p.left) + _merge_operands(p.right)
    return [p]


def _right_fold(items: list, make) -> Pipeline:
    acc = items[-1]
    for x in reversed(items[:-1]):
        acc = make(x, acc)
    return acc


def normalize(p: Pipeline) -> Pipeline:
    """Canonical representative of ``p``'s structural-equivalence class."""
    if isinstance(p, New):
        return New(_erase(p.op), loc=p.loc)
    if isinstance(p, To):
        if p.linear:
            chain = [normalize(x) for x in _linear_chain(p)]
            # Normalizing a link never yields a linear To at top level unless the
            # link itself was one; flatten again to stay right-associated.
            flat = []
            for x in chain:
                flat.extend(_linear_chain(x))
            return _right_fold(flat, lambda a, b: To(a, (b,), loc=p.loc))
        dests = sorted((normalize(d) for d in p.dests), key=show_pipeline)
        return To(normalize(p.src), tuple(dests), loc=p.loc)
    if isinstance(p, Pair):
        return Pair(normalize(p.left), normalize(p.right), _erase(p.op), loc=p.loc)
    if isinstance(p, Merge):
        items = []
        for x in _merge_operands(p):
            items.extend(_merge_operands(normalize(x)))
        items.sort(key=show_pipeline)
        return _right_fold(items, lambda a, b: Merge(a, b, loc=p.loc))
    raise TypeError(p)


def structurally_equal(p: Pipeline, q: Pipeline) -> bool:
    return normalize(p) == normalize(q)
