"""Parser for ``.pico`` programs.

A program is a list of declarations, one per line (indented lines continue
the previous one)::

    f = \\l. list-map (\\w. (w, 1)) (split l)
    tokenize = flatmap f
    keyed-sum = p reduce (\\x y. (pi1 x, pi2 x + pi2 y)) by pi1
    word-count = new tokenize | new keyed-sum
    omega = (10, 5, count)
    main word-count

Parsing runs in two phases. Each declaration is first cut into its tokens and
scanned for references; declarations are then parsed in dependency order, so
the kind of every referenced name (kernel, operator, pipeline or window) is
known when a right-hand side is read.
"""

from __future__ import annotations

import graphlib
import json
from dataclasses import dataclass, field, replace
from typing import Optional

from .ast import (
    BCombine,
    BMap,
    Collect,
    Emit,
    Endpoint,
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
from .collections import CollectionType, StructureType, WindowingPolicy
from .kernel.syntax import KernelParser, UnresolvedName, as_function, parse_dtype, resolve
from .lexer import PicoSyntaxError, Token, TokenStream, describe, tokenize


class DuplicateName(PicoSyntaxError):
    pass


class CyclicDefinition(PicoSyntaxError):
    pass


KERNEL, OPERATOR, PIPELINE, WINDOW = "kernel", "operator", "pipeline", "window"

_UNARY_FAMILIES = ("map", "flatmap", "reduce", "fold-reduce")
_FAMILIES = frozenset(
    _UNARY_FAMILIES + tuple("%s-%s" % (b, f) for b in ("zip", "join") for f in _UNARY_FAMILIES)
)

_SOURCES = {"from-file": "file", "from-socket": "socket", "from-replay": "replay"}
_SINKS = {"to-file": "file", "to-socket": "socket", "to-replay": "replay", "to-stdout": "stdout"}
_PREFIXES = {"w": "w", "p": "p", "wp": "wp"}
_PIPELINE_STARTS = {"new", "pair"}


@dataclass
class Program:
    decls: dict = field(default_factory=dict)  # name -> (kind, value)
    main: Optional[str] = None
    filename: str = "<input>"

    def of_kind(self, kind: str) -> dict:
        return {n: v for n, (k, v) in self.decls.items() if k == kind}

    @property
    def pipelines(self) -> dict:
        return self.of_kind(PIPELINE)

    @property
    def operators(self) -> dict:
        return self.of_kind(OPERATOR)

    @property
    def kernels(self) -> dict:
        return self.of_kind(KERNEL)

    @property
    def entry(self) -> Pipeline:
        return self.decls[self.main][1]


@dataclass
class _RawDecl:
    name: str
    name_tok: Token
    body: list
    refs: set


def _split_decls(tokens: list) -> list:
    decls, cur = [], []
    for tok in tokens:
        if tok.kind in ("NEWLINE", "EOF"):
            if cur:
                decls.append(cur)
            cur = []
        else:
            cur.append(tok)
    return decls


def _references(body: list, declared: set, own: str) -> set:
    """Declared names mentioned in ``body``, skipping lambda binders and endpoints.

    A declaration never refers to itself: ``min = reduce (\\x y. min x y)`` uses
    the builtin ``min``.
    """
    refs, binders = set(), set()
    i = 0
    while i < len(body):
        tok = body[i]
        if tok.kind == "OP" and tok.text in ("\\", "λ"):
            i += 1
            while i < len(body) and not (body[i].kind == "OP" and body[i].text == "."):
                if body[i].kind == "NAME":
                    binders.add(body[i].text)
                i += 1
            continue
        if tok.kind == "NAME" and (tok.text in _SOURCES or tok.text in _SINKS):
            i += 2
            continue
        if tok.kind == "NAME" and tok.text in _PREFIXES and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt.text == "(" or nxt.kind == "NAME":
                # A modifier keyword, even when a declaration shares its name.
                i += 1
                continue
        if tok.kind == "NAME" and tok.text in declared and tok.text not in binders and tok.text != own:
            refs.add(tok.text)
        i += 1
    return refs


def parse_program(src: str, filename: str = "<input>") -> Program:
    tokens = tokenize(src, filename, layout=True)
    raw: dict[str, _RawDecl] = {}
    main_tok = None
    for toks in _split_decls(tokens):
        head = toks[0]
        if head.kind == "NAME" and head.text == "main":
            if len(toks) != 2 or toks[1].kind != "NAME":
                raise PicoSyntaxError("expected 'main NAME'", head.line, head.col, filename)
            if main_tok is not None:
                raise DuplicateName("second 'main' declaration", head.line, head.col, filename)
            main_tok = toks[1]
            continue
        if head.kind != "NAME" or len(toks) < 2 or toks[1].text != "=":
            bad = head if head.kind != "NAME" else (toks[1] if len(toks) > 1 else head)
            raise PicoSyntaxError(
                "expected a declaration 'name = ...', found %s" % describe(bad),
                bad.line,
                bad.col,
                filename,
            )
        if head.text in raw:
            prev = raw[head.text].name_tok
            raise DuplicateName(
                "%r already declared at line %d" % (head.text, prev.line), head.line, head.col, filename
            )
        if len(toks) == 2:
            raise PicoSyntaxError("empty declaration", head.line, head.col, filename)
        raw[head.text] = _RawDecl(head.text, head, toks[2:], set())

    declared = set(raw)
    for d in raw.values():
        d.refs = _references(d.body, declared, d.name)

    sorter = graphlib.TopologicalSorter({n: d.refs for n, d in raw.items()})
    try:
        order = list(sorter.static_order())
    except graphlib.CycleError as e:
        cycle = e.args[1]
        tok = raw[cycle[0]].name_tok
        raise CyclicDefinition(
            "cyclic definition: %s" % " -> ".join(cycle), tok.line, tok.col, filename
        ) from None

    prog = Program(filename=filename)
    for name in order:
        d = raw[name]
        eof = Token("EOF", "", d.body[-1].line, d.body[-1].col + len(d.body[-1].text))
        ts = TokenStream(d.body + [eof], filename)
        prog.decls[name] = _DeclParser(ts, prog).declaration(name)
    # Keep source order for stable listings.
    prog.decls = {n: prog.decls[n] for n in raw}

    if main_tok is not None:
        kind = prog.decls.get(main_tok.text, (None,))[0]
        if kind is None:
            raise UnresolvedName(
                "unresolved name %r" % main_tok.text, main_tok.line, main_tok.col, filename
            )
        if kind != PIPELINE:
            raise PicoSyntaxError(
                "main must name a pipeline, %r is a %s" % (main_tok.text, kind),
                main_tok.line,
                main_tok.col,
                filename,
            )
        prog.main = main_tok.text
    else:
        names = [n for n, (k, _) in prog.decls.items() if k == PIPELINE]
        if not names:
            line = tokens[-1].line
            raise PicoSyntaxError("program declares no pipeline", line, 1, filename)
        prog.main = names[-1]
    return prog


def parse_pipeline(src: str, context: Program | None = None, filename: str = "<input>") -> Pipeline:
    """Parse a single pipeline expression, resolving names against ``context``."""
    prog = context or Program(filename=filename)
    ts = TokenStream(tokenize(src, filename), filename)
    p = _DeclParser(ts, prog).pipeline()
    if ts.peek().kind != "EOF":
        raise ts.error("unexpected %s after pipeline" % describe(ts.peek()))
    return p


def parse_operator(src: str, context: Program | None = None, filename: str = "<input>") -> Operator:
    prog = context or Program(filename=filename)
    ts = TokenStream(tokenize(src, filename), filename)
    op = _DeclParser(ts, prog).operator()
    if ts.peek().kind != "EOF":
        raise ts.error("unexpected %s after operator" % describe(ts.peek()))
    return op


class _DeclParser:
    def __init__(self, ts: TokenStream, prog: Program):
        self.ts = ts
        self.prog = prog

    # -- classification --

    def kind_of(self, name: str) -> Optional[str]:
        entry = self.prog.decls.get(name)
        return entry[0] if entry else None

    def _first_non_paren(self) -> Token:
        k = 0
        while self.ts.peek(k).kind == "OP" and self.ts.peek(k).text == "(":
            k += 1
        return self.ts.peek(k)

    def _looks_like_window(self) -> bool:
        p = self.ts.peek
        return (
            p(0).text == "("
            and p(1).kind == "INT"
            and p(2).text == ","
            and p(3).kind == "INT"
            and p(4).text == ","
            and p(5).text in ("count", "time")
            and p(6).text == ")"
        )

    def _starts_operator(self, tok: Token, k: int) -> bool:
        if tok.kind != "NAME":
            return False
        if tok.text in _FAMILIES or tok.text in _SOURCES or tok.text in _SINKS:
            return True
        if self.kind_of(tok.text) == OPERATOR:
            return True
        if tok.text in _PREFIXES:
            nxt = self.ts.peek(k + 1)
            if nxt.kind == "NAME" and nxt.text in _PREFIXES:
                nxt = self.ts.peek(k + 2)
            return nxt.text == "(" or self._starts_operator(nxt, k + 1)
        return False

    def declaration(self, name: str):
        if self._looks_like_window() and self.ts.peek(7).kind == "EOF":
            return WINDOW, self.window_literal()
        if self.ts.at("win"):
            self.ts.next()
            w = self.window()
            self._end()
            return WINDOW, w
        k = 0
        while self.ts.peek(k).text == "(":
            k += 1
        tok = self.ts.peek(k)
        if tok.kind == "NAME" and tok.text in _PREFIXES and self._starts_operator(tok, k):
            op = self.operator()
            self._end()
            return OPERATOR, replace(op, name=name, use_site="")
        if tok.kind == "NAME" and (
            tok.text in _PIPELINE_STARTS
            or (tok.text == "to" and self.ts.peek(k + 1).text == "(")
            or self.kind_of(tok.text) == PIPELINE
        ):
            p = self.pipeline()
            self._end()
            return PIPELINE, p
        if self._starts_operator(tok, k):
            op = self.operator()
            self._end()
            return OPERATOR, replace(op, name=name, use_site="")
        if tok.kind == "NAME" and self.kind_of(tok.text) == WINDOW and self.ts.peek(1).kind == "EOF":
            self.ts.next()
            return WINDOW, self.prog.decls[tok.text][1]
        e = KernelParser(self.ts).expr()
        self._end()
        return KERNEL, resolve(e, self.prog.kernels, self.ts.filename)

    def _end(self):
        tok = self.ts.peek()
        if tok.kind != "EOF":
            raise self.ts.error("unexpected %s" % describe(tok), tok)

    # -- windows --

    def window_literal(self) -> WindowingPolicy:
        start = self.ts.expect("(")
        size = int(self.ts.expect_kind("INT", "a window size").text)
        self.ts.expect(",")
        slide = int(self.ts.expect_kind("INT", "a window slide").text)
        self.ts.expect(",")
        basis = self.ts.next()
        if basis.text not in ("count", "time"):
            raise self.ts.error("window basis must be 'count' or 'time'", basis)
        self.ts.expect(")")
        if size < 1 or slide < 1:
            raise self.ts.error("window size and slide must be positive", start)
        return WindowingPolicy(size, slide, basis.text)

    def window(self) -> WindowingPolicy:
        if self.ts.at("("):
            return self.window_literal()
        tok = self.ts.expect_kind("NAME", "a window")
        kind = self.kind_of(tok.text)
        if kind is None:
            raise UnresolvedName("unresolved name %r" % tok.text, tok.line, tok.col, self.ts.filename)
        if kind != WINDOW:
            raise self.ts.error("%r is a %s, not a window" % (tok.text, kind), tok)
        return self.prog.decls[tok.text][1]

    # -- kernels --

    def kernel_atom(self):
        e = KernelParser(self.ts).atom()
        return resolve(e, self.prog.kernels, self.ts.filename)

    # -- operators --

    def operator(self) -> Operator:
        start = self.ts.peek()
        prefix = ""
        if start.kind == "NAME" and start.text in _PREFIXES and self._prefix_applies():
            self.ts.next()
            prefix = start.text
            if prefix == "w" and self.ts.at("p") and self._prefix_applies():
                self.ts.next()
                prefix = "wp"
        base = self.operator_base()
        key = window = None
        if self.ts.at("by"):
            by = self.ts.next()
            if "p" not in prefix:
                raise self.ts.error("'by' needs the p modifier", by)
            key = as_function(self.kernel_atom(), 1)
        if self.ts.at("win"):
            win = self.ts.next()
            if "w" not in prefix:
                raise self.ts.error("'win' needs the w modifier", win)
            window = self.window()
        if "p" in prefix and key is None:
            raise self.ts.error("the p modifier needs a 'by' clause", start)
        if "w" in prefix and window is None:
            raise self.ts.error("the w modifier needs a 'win' clause", start)
        if not prefix:
            return base
        if (key is not None and base.key is not None) or (window is not None and base.window is not None):
            raise self.ts.error("operator already carries this modifier", start)
        return replace(
            base,
            key=key if key is not None else base.key,
            window=window if window is not None else base.window,
            use_site=prefix if base.name is not None else "",
            loc=start.loc,
        )

    def _prefix_applies(self) -> bool:
        nxt = self.ts.peek(1)
        return nxt.text == "(" or self._starts_operator(nxt, 1)

    def operator_base(self) -> Operator:
        tok = self.ts.peek()
        if self.ts.accept("("):
            op = self.operator()
            self.ts.expect(")")
            return op
        if tok.kind != "NAME":
            raise self.ts.error("expected an operator, found %s" % describe(tok), tok)
        self.ts.next()
        if tok.text in _FAMILIES:
            return Operator(self.family(tok.text), loc=tok.loc)
        if tok.text in _SOURCES:
            endpoint = self.endpoint()
            return Operator(Emit(_SOURCES[tok.text], endpoint, self.ctype()), loc=tok.loc)
        if tok.text in _SINKS:
            kind = _SINKS[tok.text]
            endpoint = None if kind == "stdout" else self.endpoint()
            return Operator(Collect(kind, endpoint, self.ctype()), loc=tok.loc)
        kind = self.kind_of(tok.text)
        if kind == OPERATOR:
            op = self.prog.decls[tok.text][1]
            return replace(op, name=tok.text, loc=tok.loc)
        if kind is None:
            raise UnresolvedName("unresolved name %r" % tok.text, tok.line, tok.col, self.ts.filename)
        raise self.ts.error("%r is a %s, not an operator" % (tok.text, kind), tok)

    def family(self, keyword: str):
        pairing = None
        fam = keyword
        if keyword.startswith(("zip-", "join-")):
            pairing, fam = keyword.split("-", 1)
        if fam in ("map", "flatmap"):
            f = as_function(self.kernel_atom(), 2 if pairing else 1)
            if pairing:
                return BMap(pairing, f, flat=fam == "flatmap")
            return Map(f) if fam == "map" else FlatMap(f)
        if fam == "reduce":
            inner = Reduce(as_function(self.kernel_atom(), 2))
        else:
            fold = as_function(self.kernel_atom(), 2)
            z = self.kernel_atom()
            combine = as_function(self.kernel_atom(), 2)
            inner = FoldReduce(fold, z, combine)
        return BCombine(pairing, inner) if pairing else inner

    def endpoint(self) -> Endpoint:
        tok = self.ts.peek()
        if tok.kind == "STRING":
            self.ts.next()
            return Endpoint(json.loads(tok.text))
        if tok.kind == "NAME" and tok.text != "as":
            self.ts.next()
            return Endpoint(tok.text, named=True)
        raise self.ts.error("expected an endpoint path or name, found %s" % describe(tok), tok)

    def ctype(self) -> CollectionType:
        self.ts.expect("as")
        tok = self.ts.expect_kind("NAME", "a structure type")
        try:
            structure = StructureType(tok.text)
        except ValueError:
            raise self.ts.error("unknown structure type %r (bag, list or stream)" % tok.text, tok) from None
        self.ts.expect("of")
        return CollectionType(parse_dtype(self.ts), structure)

    # -- pipelines --

    def pipeline(self) -> Pipeline:
        left = self.merge()
        tok = self.ts.peek()
        if self.ts.accept("|"):
            return To(left, (self.pipeline(),), loc=tok.loc)
        return left

    def merge(self) -> Pipeline:
        left = self.pipeline_atom()
        tok = self.ts.peek()
        if self.ts.accept("+"):
            return Merge(left, self.merge(), loc=tok.loc)
        return left

    def pipeline_atom(self) -> Pipeline:
        tok = self.ts.peek()
        if self.ts.accept("new"):
            return New(self.operator(), loc=tok.loc)
        if self.ts.accept("("):
            p = self.pipeline()
            self.ts.expect(")")
            return p
        if tok.text == "to" and self.ts.peek(1).text == "(":
            self.ts.next()
            self.ts.expect("(")
            src = self.pipeline()
            self.ts.expect(";")
            dests = [self.pipeline()]
            while self.ts.accept(","):
                dests.append(self.pipeline())
            self.ts.expect(")")
            return To(src, tuple(dests), loc=tok.loc)
        if self.ts.accept("pair"):
            self.ts.expect("(")
            left = self.pipeline()
            self.ts.expect(",")
            right = self.pipeline()
            self.ts.expect(",")
            op = self.operator()
            self.ts.expect(")")
            return Pair(left, right, op, loc=tok.loc)
        if tok.kind == "NAME":
            kind = self.kind_of(tok.text)
            if kind == PIPELINE:
                self.ts.next()
                return self.prog.decls[tok.text][1]
            if kind is None:
                raise UnresolvedName(
                    "unresolved name %r" % tok.text, tok.line, tok.col, self.ts.filename
                )
            raise self.ts.error(
                "%r is a %s, not a pipeline (write 'new %s')" % (tok.text, kind, tok.text), tok
            )
        raise self.ts.error("expected a pipeline, found %s" % describe(tok), tok)
