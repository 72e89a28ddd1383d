"""Element universe: runtime values, their data types, and the literal syntax.

Values are plain Python objects:

=========  ==========================
int        ``int`` (never ``bool``)
float      ``float``
str        ``str``
bool       ``bool``
tuple      ``tuple`` of arity >= 2
list       :class:`PList` (an immutable, tuple-backed list)
unit       :data:`UNIT`
=========  ==========================
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any, Union


class MalformedValue(ValueError):
    pass


class Unit:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "unit"

    def __lt__(self, other):
        if isinstance(other, Unit):
            return False
        return NotImplemented

    def __le__(self, other):
        if isinstance(other, Unit):
            return True
        return NotImplemented

    __gt__ = __lt__
    __ge__ = __le__

    def __reduce__(self):
        return (Unit, ())


UNIT = Unit()


class PList(tuple):
    """List value. Distinct from tuples under equality."""

    __slots__ = ()

    def __eq__(self, other):
        return isinstance(other, PList) and tuple.__eq__(self, other)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash(("list", tuple(self)))

    def __repr__(self):
        return "PList(%s)" % list.__repr__(list(self))

    def __add__(self, other):
        return PList(tuple.__add__(self, other))


Value = Union[int, float, str, bool, tuple, PList, Unit]


# -- data types -------------------------------------------------------------


class DataType:
    __slots__ = ()


@dataclass(frozen=True)
class Prim(DataType):
    name: str

    def __str__(self):
        return self.name


INT = Prim("int")
FLOAT = Prim("float")
STR = Prim("str")
BOOL = Prim("bool")
UNIT_T = Prim("unit")

PRIMS = {p.name: p for p in (INT, FLOAT, STR, BOOL, UNIT_T)}


@dataclass(frozen=True)
class TupleT(DataType):
    items: tuple

    def __post_init__(self):
        if len(self.items) < 2:
            raise MalformedValue("tuple types need at least two components")

    def __str__(self):
        return "(" + ", ".join(str(t) for t in self.items) + ")"


@dataclass(frozen=True)
class ListT(DataType):
    elem: DataType

    def __str__(self):
        return "[%s]" % self.elem


@dataclass(frozen=True)
class Bottom(DataType):
    """Element type of the empty list; compatible with every type."""

    def __str__(self):
        return "_"


BOTTOM = Bottom()


def join_types(a: DataType, b: DataType) -> DataType | None:
    """Least common type of ``a`` and ``b`` treating ``Bottom`` as a wildcard."""
    if a == b:
        return a
    if isinstance(a, Bottom):
        return b
    if isinstance(b, Bottom):
        return a
    if isinstance(a, ListT) and isinstance(b, ListT):
        e = join_types(a.elem, b.elem)
        return None if e is None else ListT(e)
    if isinstance(a, TupleT) and isinstance(b, TupleT) and len(a.items) == len(b.items):
        items = []
        for x, y in zip(a.items, b.items):
            j = join_types(x, y)
            if j is None:
                return None
            items.append(j)
        return TupleT(tuple(items))
    return None


def conforms(actual: DataType, declared: DataType) -> bool:
    return join_types(actual, declared) == declared


def type_of(v: Any) -> DataType:
    if isinstance(v, bool):
        return BOOL
    if isinstance(v, int):
        return INT
    if isinstance(v, float):
        return FLOAT
    if isinstance(v, str):
        return STR
    if isinstance(v, Unit):
        return UNIT_T
    if isinstance(v, PList):
        t: DataType = BOTTOM
        for x in v:
            j = join_types(t, type_of(x))
            if j is None:
                raise MalformedValue("heterogeneous list: %s" % format_value(v))
            t = j
        return ListT(t)
    if isinstance(v, tuple):
        if len(v) < 2:
            raise MalformedValue("tuple of arity %d" % len(v))
        return TupleT(tuple(type_of(x) for x in v))
    raise MalformedValue("not a value: %r" % (v,))


def value_equal(a: Any, b: Any) -> bool:
    """Structural equality that also distinguishes ``1``, ``1.0`` and ``True``."""
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, PList) or isinstance(b, PList):
        return (
            isinstance(a, PList)
            and isinstance(b, PList)
            and len(a) == len(b)
            and all(value_equal(x, y) for x, y in zip(a, b))
        )
    if isinstance(a, tuple) or isinstance(b, tuple):
        return (
            isinstance(a, tuple)
            and isinstance(b, tuple)
            and len(a) == len(b)
            and all(value_equal(x, y) for x, y in zip(a, b))
        )
    if type(a) is not type(b):
        return False
    return a == b


# -- literal syntax -----------------------------------------------------------


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    if isinstance(v, Unit):
        return "unit"
    if isinstance(v, PList):
        return "[" + ",".join(format_value(x) for x in v) + "]"
    if isinstance(v, tuple):
        return "(" + ",".join(format_value(x) for x in v) + ")"
    raise MalformedValue("not a value: %r" % (v,))


_LITERAL_TOKEN = re.compile(
    r"""\s*(?:
        (?P<str>"(?:[^"\\]|\\.)*")
      | (?P<num>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
      | (?P<word>-?[A-Za-z_]+)
      | (?P<punct>[()\[\],])
    )""",
    re.VERBOSE,
)

_WORDS = {
    "true": True,
    "false": False,
    "unit": UNIT,
    "inf": math.inf,
    "-inf": -math.inf,
    "nan": math.nan,
}


def parse_value(text: str) -> Any:
    """Parse one value literal, e.g. ``("a",1)`` or ``[1.5,2.0]``."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _LITERAL_TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise MalformedValue("bad literal at offset %d: %r" % (pos, text))
        tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    value, i = _parse_tokens(tokens, 0, text)
    if i != len(tokens):
        raise MalformedValue("trailing input in literal %r" % text)
    type_of(value)
    return value


def _parse_tokens(tokens, i, text):
    if i >= len(tokens):
        raise MalformedValue("unexpected end of literal %r" % text)
    kind, tok, _ = tokens[i]
    if kind == "str":
        try:
            return json.loads(tok), i + 1
        except json.JSONDecodeError as e:
            raise MalformedValue("bad string literal %s" % tok) from e
    if kind == "num":
        if "." in tok or "e" in tok or "E" in tok:
            return float(tok), i + 1
        return int(tok), i + 1
    if kind == "word":
        if tok not in _WORDS:
            raise MalformedValue("unknown literal word %r" % tok)
        return _WORDS[tok], i + 1
    if tok in "([":
        close = ")" if tok == "(" else "]"
        items = []
        i += 1
        if i < len(tokens) and tokens[i][1] == close:
            if tok == "(":
                raise MalformedValue("empty tuple in %r" % text)
            return PList(), i + 1
        while True:
            item, i = _parse_tokens(tokens, i, text)
            items.append(item)
            if i >= len(tokens):
                raise MalformedValue("unterminated literal %r" % text)
            if tokens[i][1] == ",":
                i += 1
                continue
            if tokens[i][1] == close:
                i += 1
                break
            raise MalformedValue("expected ',' or %r in %r" % (close, text))
        if tok == "[":
            return PList(items), i
        if len(items) == 1:
            return items[0], i
        return tuple(items), i
    raise MalformedValue("unexpected %r in literal %r" % (tok, text))

