import os
import random
import subprocess
import sys

import networkx as nx
from hypothesis import given
from hypothesis import strategies as st

from conftest import PROGRAMS, ROOT
from pico.ast import Collect, Emit, normalize, operators
from pico.dataflow import MU, build_graph, canonical_form, export_dot, vertex_content
from pico.parser import parse_pipeline, parse_program
from pipelines import any_pipelines, rewrite, toplevel_pipelines

WORD_COUNT_DOT = """\
digraph "file-word-count" {
  rankdir=LR;
  "file-read" [label="file-read", shape=box];
  "file-write" [label="file-write", shape=box];
  "keyed-sum" [label="keyed-sum", shape=box];
  "tokenize" [label="tokenize", shape=box];
  "file-read" -> "tokenize";
  "keyed-sum" -> "file-write";
  "tokenize" -> "keyed-sum";
}
"""


def to_nx(g):
    h = nx.MultiDiGraph()
    for vid, v in g.vertices.items():
        h.add_node(vid, content=vertex_content(v))
    for e in g.edges:
        port = None if g.vertices[e.dst].is_merge else e.port
        h.add_edge(e.src, e.dst, port=port)
    return h


def isomorphic(g1, g2):
    return nx.is_isomorphic(
        to_nx(g1),
        to_nx(g2),
        node_match=lambda a, b: a["content"] == b["content"],
        edge_match=lambda a, b: sorted(d["port"] or 0 for d in a.values())
        == sorted(d["port"] or 0 for d in b.values()),
    )


def test_word_count_graph(word_count_src):
    prog = parse_program(word_count_src)
    g = build_graph(prog.pipelines["word-count"])
    assert g.labels() == {"tokenize", "keyed-sum"}
    assert g.edge_labels() == {("tokenize", "keyed-sum")}
    assert (g.input, g.output) == ("tokenize", "keyed-sum")

    g = build_graph(prog.pipelines["file-word-count"])
    assert g.labels() == {"file-read", "tokenize", "keyed-sum", "file-write"}
    assert g.edge_labels() == {("file-read", "tokenize"), ("tokenize", "keyed-sum"), ("keyed-sum", "file-write")}
    assert g.input is None and g.output is None


def test_word_count_dot_is_golden(word_count_src):
    prog = parse_program(word_count_src)
    assert export_dot(build_graph(prog.entry), "file-word-count") == WORD_COUNT_DOT


def test_dot_is_stable_across_processes():
    code = (
        "import sys; from pico.parser import parse_program; from pico.dataflow import build_graph, export_dot;"
        "p = parse_program(open(sys.argv[1]).read());"
        "sys.stdout.write(export_dot(build_graph(p.entry), p.main))"
    )
    outs = set()
    for seed in ("0", "1", "12345"):
        env = dict(os.environ, PYTHONHASHSEED=seed, PYTHONPATH=str(ROOT / "src"))
        r = subprocess.run(
            [sys.executable, "-c", code, str(PROGRAMS / "stock_stats.pico")],
            env=env, capture_output=True, check=True,
        )
        outs.add(r.stdout)
    assert len(outs) == 1


def test_stock_stats_merges_three_branches():
    prog = parse_program((PROGRAMS / "stock_stats.pico").read_text(encoding="utf-8"))
    g = build_graph(prog.pipelines["stock-stats"])
    merges = [v for v in g.vertices if g.vertices[v].is_merge]
    # One μ for the two price feeds and one joining the three statistics.
    assert len(merges) == 2
    assert g.output in merges
    assert len(g.preds(g.output)) == 3
    assert g.labels() == {"prices-a", "prices-b", MU, "wp(min)", "wp(max)", "wp(sum-count)", "normalize"}


def test_single_producing_destination_skips_the_merge():
    p = parse_pipeline(r'to(new map (\x. x); new to-stdout as list of int, new map (\x. x + 1))')
    g = build_graph(p)
    assert not any(v.is_merge for v in g.vertices.values())
    assert g.vertices[g.output].op.core.keyword == "map"


def test_nested_merges_fuse():
    p = parse_pipeline('new from-file "a" as list of int + (new from-file "b" as list of int + new from-file "c" as list of int)')
    g = build_graph(p)
    assert [v for v in g.vertices if g.vertices[v].is_merge] == ["μ1"]
    assert len(g.preds("μ1")) == 3


def test_binary_operator_ports():
    p = parse_pipeline(r'pair(new from-file "a" as list of int, new map (\x. x), zip-map (\a b. a - b))')
    g = build_graph(p)
    ports = {(e.src, e.port) for e in g.preds("zip-map")}
    assert ports == {("from-file", 0), ("map", 1)}
    assert '[label="1"]' in export_dot(g)


@given(any_pipelines)
def test_graph_invariants(p):
    g = build_graph(p)
    n_merge = sum(v.is_merge for v in g.vertices.values())
    assert len(g.vertices) == len(operators(p)) + n_merge
    for e in g.edges:
        assert e.src in g.vertices and e.dst in g.vertices
    assert nx.is_directed_acyclic_graph(to_nx(g))
    for vid, v in g.vertices.items():
        if v.is_merge:
            assert len(g.preds(vid)) >= 2
        elif v.op.binary:
            assert sorted(e.port for e in g.preds(vid)) == [0, 1]


@given(toplevel_pipelines(2))
def test_toplevel_graphs_are_closed(p):
    g = build_graph(p)
    assert g.input is None and g.output is None
    for vid, v in g.vertices.items():
        if not g.preds(vid):
            assert isinstance(v.op.core, Emit)
        if not g.succs(vid):
            assert isinstance(v.op.core, Collect)


@given(any_pipelines, st.randoms(use_true_random=False))
def test_equivalent_pipelines_give_isomorphic_graphs(p, rng):
    q = rewrite(p, random.Random(rng.random()))
    g1, g2 = build_graph(p), build_graph(q)
    assert isomorphic(g1, g2)
    assert canonical_form(g1) == canonical_form(g2)
    assert canonical_form(build_graph(normalize(p))) == canonical_form(g1)


def test_canonical_form_separates_different_graphs():
    a = build_graph(parse_pipeline(r"new map (\x. x) | new map (\x. x + 1)"))
    b = build_graph(parse_pipeline(r"new map (\x. x + 1) | new map (\x. x)"))
    assert canonical_form(a) != canonical_form(b)
    assert not isomorphic(a, b)
