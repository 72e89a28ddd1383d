"""Lowering pipelines to dataflow graphs.

Vertices are operators or merge nodes (μ). Vertex ids are operator labels,
made unique with ``#2``, ``#3`` suffixes; merge nodes are ``μ1``, ``μ2``, ...

Two simplifications keep graphs of structurally equal pipelines isomorphic.
A ``to`` whose destinations include just one producing branch connects that
branch directly instead of through a one-input μ, and a μ feeding only
another μ is folded into it, so nested merges become one n-ary merge.
"""

from __future__ import annotations

import graphlib
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .ast import Collect, Emit, Merge, New, Operator, Pair, Pipeline, To, normalize, show_operator
from .typecheck import has_input

MU = "μ"


@dataclass
class Vertex:
    id: str
    label: str
    op: Optional[Operator] = None  # None for merge nodes

    @property
    def is_merge(self) -> bool:
        return self.op is None


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    dst: str
    port: int = 0


@dataclass
class DataflowGraph:
    vertices: dict = field(default_factory=dict)  # id -> Vertex
    edges: list = field(default_factory=list)
    input: Optional[str] = None
    output: Optional[str] = None

    def preds(self, v: str) -> list:
        return sorted((e for e in self.edges if e.dst == v), key=lambda e: (e.port, e.src))

    def succs(self, v: str) -> list:
        return sorted(e for e in self.edges if e.src == v)

    def labels(self) -> set:
        return {v.label for v in self.vertices.values()}

    def edge_labels(self) -> set:
        return {(self.vertices[e.src].label, self.vertices[e.dst].label) for e in self.edges}

    def topological_order(self) -> list:
        ts = graphlib.TopologicalSorter({v: set() for v in sorted(self.vertices)})
        for e in self.edges:
            ts.add(e.dst, e.src)
        return list(ts.static_order())


class _Builder:
    def __init__(self):
        self.g = DataflowGraph()
        self._mu = 0

    def vertex(self, label: str, op: Optional[Operator]) -> str:
        vid = label
        n = 1
        while vid in self.g.vertices:
            n += 1
            vid = "%s#%d" % (label, n)
        self.g.vertices[vid] = Vertex(vid, label, op)
        return vid

    def merge_node(self) -> str:
        self._mu += 1
        vid = "μ_%d" % self._mu
        self.g.vertices[vid] = Vertex(vid, MU)
        return vid

    def edge(self, src: str, dst: str, port: int = 0):
        self.g.edges.append(Edge(src, dst, port))

    def build(self, p: Pipeline) -> tuple:
        """Add ``p``'s subgraph; returns its (input, output) vertices."""
        if isinstance(p, New):
            v = self.vertex(p.op.label, p.op)
            inp = None if isinstance(p.op.core, Emit) else v
            out = None if isinstance(p.op.core, Collect) else v
            return inp, out
        if isinstance(p, To):
            inp, out = self.build(p.src)
            assert out is not None, "to-source without output"
            producing = []
            for d in p.dests:
                d_in, d_out = self.build(d)
                assert d_in is not None, "to-destination without input"
                self.edge(out, d_in)
                if d_out is not None:
                    producing.append(d_out)
            if not producing:
                return inp, None
            if len(producing) == 1:
                return inp, producing[0]
            mu = self.merge_node()
            for i, o in enumerate(producing):
                self.edge(o, mu, i)
            return inp, mu
        if isinstance(p, Pair):
            l_in, l_out = self.build(p.left)
            r_in, r_out = self.build(p.right)
            v = self.vertex(p.op.label, p.op)
            self.edge(l_out, v, 0)
            self.edge(r_out, v, 1)
            return (l_in if has_input(p.left) else r_in), v
        if isinstance(p, Merge):
            l_in, l_out = self.build(p.left)
            r_in, r_out = self.build(p.right)
            mu = self.merge_node()
            self.edge(l_out, mu, 0)
            self.edge(r_out, mu, 1)
            return (l_in if has_input(p.left) else r_in), mu
        raise TypeError(p)

    def fuse_merges(self):
        g = self.g
        changed = True
        while changed:
            changed = False
            for vid in sorted(g.vertices):
                v = g.vertices[vid]
                if not v.is_merge:
                    continue
                outs = [e for e in g.edges if e.src == vid]
                if len(outs) == 1 and g.vertices[outs[0].dst].is_merge:
                    target = outs[0].dst
                    g.edges.remove(outs[0])
                    g.edges = [Edge(e.src, target, e.port) if e.dst == vid else e for e in g.edges]
                    del g.vertices[vid]
                    if g.output == vid:
                        g.output = target
                    changed = True
                    break
        self._renumber_merges()

    def _renumber_merges(self):
        g = self.g
        order = [v for v in g.topological_order() if g.vertices[v].is_merge]
        names = {old: "μ%d" % (i + 1) for i, old in enumerate(order)}

        def rn(x):
            return names.get(x, x)

        g.vertices = {rn(k): Vertex(rn(k), v.label, v.op) for k, v in g.vertices.items()}
        edges = [Edge(rn(e.src), rn(e.dst), e.port) for e in g.edges]
        # Merge ports carry no meaning; renumber them by source for stability.
        fixed = []
        for vid, v in g.vertices.items():
            ins = sorted(e for e in edges if e.dst == vid)
            if v.is_merge:
                ins = [Edge(e.src, e.dst, i) for i, e in enumerate(sorted(ins, key=lambda e: e.src))]
            fixed.extend(ins)
        g.edges = sorted(fixed)
        g.input, g.output = rn(g.input) if g.input else None, rn(g.output) if g.output else None


def build_graph(p: Pipeline) -> DataflowGraph:
    b = _Builder()
    b.g.input, b.g.output = b.build(p)
    b.fuse_merges()
    return b.g


# -- export & comparison --------------------------------------------------------------------


def _quote(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def export_dot(g: DataflowGraph, name: str = "pipeline") -> str:
    lines = ["digraph %s {" % _quote(name), "  rankdir=LR;"]
    for vid in sorted(g.vertices):
        v = g.vertices[vid]
        if v.is_merge:
            lines.append("  %s [shape=point, xlabel=%s];" % (_quote(vid), _quote(MU)))
        else:
            lines.append("  %s [label=%s, shape=box];" % (_quote(vid), _quote(v.label)))
    for e in sorted(g.edges):
        attr = ""
        dst = g.vertices[e.dst]
        if dst.op is not None and dst.op.binary:
            attr = " [label=%s]" % _quote(str(e.port))
        lines.append("  %s -> %s%s;" % (_quote(e.src), _quote(e.dst), attr))
    lines.append("}")
    return "\n".join(lines) + "\n"


def vertex_content(v: Vertex) -> str:
    """What a vertex computes, independent of its id and label."""
    if v.is_merge:
        return MU
    return show_operator(normalize(New(v.op)).op)


def _digest(*parts) -> str:
    return hashlib.sha256("\x00".join(parts).encode()).hexdigest()[:16]


def canonical_form(g: DataflowGraph) -> tuple:
    """An isomorphism-invariant fingerprint of ``g``.

    Each vertex is hashed from its content plus the hashes of its
    predecessors (upward) and, separately, its successors (downward); the
    graph is the sorted multiset of vertex and edge signatures.
    """
    order = g.topological_order()
    down, up = {}, {}
    for vid in order:
        v = g.vertices[vid]
        ins = g.preds(vid)
        parts = [_digest(str(e.port) if not v.is_merge else "", down[e.src]) for e in ins]
        if v.is_merge:
            parts.sort()
        down[vid] = _digest(vertex_content(v), *parts)
    for vid in reversed(order):
        outs = sorted(
            _digest(str(e.port) if not g.vertices[e.dst].is_merge else "", up[e.dst])
            for e in g.edges
            if e.src == vid
        )
        up[vid] = _digest(vertex_content(g.vertices[vid]), *outs)
    sig = {vid: (down[vid], up[vid]) for vid in g.vertices}
    vertices = tuple(sorted(sig.values()))
    edges = tuple(
        sorted(
            (sig[e.src], sig[e.dst], e.port if not g.vertices[e.dst].is_merge else 0)
            for e in g.edges
        )
    )
    ends = (sig[g.input] if g.input else None, sig[g.output] if g.output else None)
    return vertices, edges, ends
