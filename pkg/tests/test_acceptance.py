"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines are printed even under
capture) or directly with ``python tests/test_acceptance.py``.
"""

import ast
import itertools
import math
import os
import random
import subprocess
import sys
import tempfile
import time
from collections import Counter
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import networkx as nx  # noqa: E402
import pytest  # noqa: E402
from hypothesis import given, settings  # noqa: E402
from hypothesis import strategies as st  # noqa: E402

import oracles  # noqa: E402
from pico.ast import normalize  # noqa: E402
from pico.collections import Multiset, Sequence, WindowingPolicy, indexed_windows, is_time_ordered  # noqa: E402
from pico.dataflow import build_graph, canonical_form, vertex_content  # noqa: E402
from pico.executor import (  # noqa: E402
    ExecConfig,
    exec_flatmap,
    exec_map,
    exec_merge,
    exec_reduce,
    exec_weak_map,
    fold_partitions,
    run_program,
)
from pico.kernel import compile_kernel, parse_kernel  # noqa: E402
from pico.parser import parse_pipeline, parse_program  # noqa: E402
from pico.typecheck import NotTopLevel, PicoTypeError, check_toplevel, type_operator, type_pipeline  # noqa: E402
from pico.values import INT, STR, TupleT  # noqa: E402
from pipelines import any_pipelines, rewrite  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"
FIXTURES = PROGRAMS / "fixtures"
CASES = 500


def k(src):
    return compile_kernel(parse_kernel(src))


def load(name):
    path = PROGRAMS / name
    return parse_program(path.read_text(encoding="utf-8"), str(path))


# -- 1 ---------------------------------------------------------------------------------------

GOLDEN_TYPES = {
    "tokenize": "<str, σ> → <(str, int), σ>, ∀σ ∈ Σ",
    "keyed-sum": "<(str, int), σ> → <(str, int), σ>, ∀σ ∈ Σ",
    "file-read": "∅ → <str, bag>",
    "file-write": "<(str, int), bag> → ∅",
    "word-count": "<str, σ> → <(str, int), σ>, ∀σ ∈ Σ",
    "file-word-count": "∅ → ∅",
}
GOLDEN_FRAGMENT = (
    "word_count_fragment.pico:9:27: rule top-level: entry pipeline has type "
    "<str, σ> → <(str, int), σ>, ∀σ ∈ Σ, expected ∅ → ∅"
)


def criterion_1():
    start = time.perf_counter()
    prog = load("word_count.pico")
    ops = prog.operators
    got = {
        "tokenize": str(type_operator(ops["tokenize"])),
        "keyed-sum": str(type_operator(ops["keyed-sum"], [TupleT((STR, INT))])),
        "file-read": str(type_operator(ops["file-read"])),
        "file-write": str(type_operator(ops["file-write"])),
        "word-count": str(type_pipeline(prog.pipelines["word-count"])),
        "file-word-count": str(type_pipeline(prog.pipelines["file-word-count"])),
    }
    top = check_toplevel(prog)
    frag = parse_program((PROGRAMS / "word_count_fragment.pico").read_text(encoding="utf-8"), "word_count_fragment.pico")
    try:
        check_toplevel(frag)
        diag = None
    except NotTopLevel as e:
        diag = str(e)
    elapsed = time.perf_counter() - start
    ok = got == GOLDEN_TYPES and top.is_toplevel and diag == GOLDEN_FRAGMENT and elapsed < 1.0
    bad = [n for n in GOLDEN_TYPES if got[n] != GOLDEN_TYPES[n]]
    return ok, "6 golden types%s, fragment diagnostic %s, %.3fs < 1s" % (
        "" if not bad else " (mismatch: %s)" % ", ".join(bad),
        "matches" if diag == GOLDEN_FRAGMENT else "differs: %r" % diag,
        elapsed,
    )


# -- 2 ---------------------------------------------------------------------------------------


def criterion_2():
    paths = sorted((PROGRAMS / "negative").glob("*.pico"))
    wrong = []
    rules = Counter()
    for path in paths:
        want = path.read_text(encoding="utf-8").split("\n", 1)[0].removeprefix("# expect: ").strip()
        rules[want] += 1
        try:
            check_toplevel(parse_program(path.read_text(encoding="utf-8"), str(path)))
            wrong.append("%s accepted" % path.stem)
        except PicoTypeError as e:
            if e.rule != want:
                wrong.append("%s: %s instead of %s" % (path.stem, e.rule, want))
    required = {"combine", "pair", "to", "zip"}
    ok = len(paths) >= 12 and not wrong and required <= set(rules)
    detail = "%d programs rejected with the expected rule (%s)" % (
        len(paths) - len(wrong),
        ", ".join("%s×%d" % kv for kv in sorted(rules.items())),
    )
    if wrong:
        detail += "; wrong: " + "; ".join(wrong)
    return ok, detail


# -- 3 ---------------------------------------------------------------------------------------


def criterion_3():
    prog = load("word_count.pico")
    wc = build_graph(prog.pipelines["word-count"])
    fwc = build_graph(prog.pipelines["file-word-count"])
    ok_wc = wc.labels() == {"tokenize", "keyed-sum"} and wc.edge_labels() == {("tokenize", "keyed-sum")}
    ok_fwc = fwc.labels() == {"file-read", "tokenize", "keyed-sum", "file-write"} and fwc.edge_labels() == {
        ("file-read", "tokenize"),
        ("tokenize", "keyed-sum"),
        ("keyed-sum", "file-write"),
    }
    code = (
        "import sys; from pico.parser import parse_program; from pico.dataflow import build_graph, export_dot;"
        "p = parse_program(open(sys.argv[1]).read()); sys.stdout.write(export_dot(build_graph(p.entry), p.main))"
    )
    dots = set()
    for seed in ("0", "1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=seed, PYTHONPATH=str(ROOT / "src"))
        for name in ("word_count.pico", "stock_stats.pico"):
            r = subprocess.run([sys.executable, "-c", code, str(PROGRAMS / name)], env=env, capture_output=True, check=True)
            dots.add((name, r.stdout))
    ok = ok_wc and ok_fwc and len(dots) == 2
    return ok, "word-count V/E %s, file-word-count V/E %s (%d vertices, %d edges), DOT %s" % (
        "exact" if ok_wc else "WRONG",
        "exact" if ok_fwc else "WRONG",
        len(fwc.vertices),
        len(fwc.edges),
        "byte-stable across 3 hash seeds" if len(dots) == 2 else "unstable",
    )


# -- 4 ---------------------------------------------------------------------------------------


def synthetic_corpus(size=1_000_000, seed=4):
    rng = random.Random(seed)
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    vocab = ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 10))) for _ in range(5000)]
    cum = list(itertools.accumulate(1 / (i + 1) for i in range(len(vocab))))
    lines, n = [], 0
    while n < size:
        line = " ".join(rng.choices(vocab, cum_weights=cum, k=rng.randint(0, 14)))
        lines.append(line)
        n += len(line) + 1
    return "\n".join(lines) + "\n"


def criterion_4():
    text = synthetic_corpus()
    with tempfile.TemporaryDirectory() as d:
        src, out = Path(d) / "corpus.txt", Path(d) / "counts.txt"
        src.write_text(text, encoding="utf-8")
        start = time.perf_counter()
        run_program(load("word_count.pico"), ExecConfig(bindings={"in": src, "out": out}))
        elapsed = time.perf_counter() - start
        got = dict(ast.literal_eval(line) for line in out.read_text(encoding="utf-8").splitlines())
    want = oracles.word_count(text)
    ok = got == want and elapsed < 5.0
    return ok, "%d bytes, %d distinct words, %s oracle, %.2fs < 5s" % (
        len(text.encode()), len(want), "equals" if got == want else "DIFFERS FROM", elapsed)


# -- 5 ---------------------------------------------------------------------------------------


def criterion_5():
    rng = random.Random(5)
    mismatches = unordered = windows = 0
    for _ in range(1000):
        basis = rng.choice(["count", "time"])
        w = WindowingPolicy(rng.randint(1, 40), rng.randint(1, 40), basis)
        n = rng.randint(0, 200)
        t_max = rng.choice([10, 100, 400])
        items = [(rng.randint(0, t_max), rng.randint(-50, 50)) for _ in range(n)]
        got = indexed_windows(Sequence(tuple(items)), w)
        windows += len(got)
        if [(i, list(win.items)) for i, win in got] != oracles.windows(items, w.size, w.slide, w.basis):
            mismatches += 1
        unordered += sum(not is_time_ordered(win) for _, win in got)
    ok = mismatches == 0 and unordered == 0
    return ok, "1000 policies, %d windows, %d mismatches, %d windows out of time order" % (windows, mismatches, unordered)


# -- 6 ---------------------------------------------------------------------------------------


def _random_seq(rng, n_max=40):
    return [(rng.randint(0, 60), rng.randint(-1000, 1000)) for _ in range(rng.randint(0, n_max))]


def _cuts(rng, xs):
    cuts = sorted(rng.sample(range(1, len(xs)), rng.randint(0, max(0, len(xs) - 1)))) if len(xs) > 1 else []
    bounds = [0] + cuts + [len(xs)]
    return [xs[a:b] for a, b in zip(bounds, bounds[1:]) if b > a]


def _close(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_close(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)
    return a == b


def criterion_6():
    rng = random.Random(6)
    failures = Counter()

    for src in (r"\x y. x + y", r"\x y. min x y", r"\x y. max x y"):
        f = k(src)
        for _ in range(CASES):
            items = _random_seq(rng) or [(0, 1)]
            shuffled = rng.sample(items, len(items))
            if exec_reduce(f, Sequence(tuple(items))) != exec_reduce(f, Sequence(tuple(shuffled))):
                failures["reduce"] += 1

    sc = load("stock_stats.pico").operators["sum-count"].core
    fold, z, comb = compile_kernel(sc.fold), compile_kernel(sc.z)(), compile_kernel(sc.combine)
    for _ in range(CASES):
        vals = [("S", rng.uniform(1, 500)) for _ in range(rng.randint(0, 60))]
        results = [fold_partitions(fold, z, comb, chunks) for chunks in ([vals], [[v] for v in vals], _cuts(rng, vals))]
        if not (_close(results[0], results[1]) and _close(results[0], results[2])):
            failures["fold-reduce"] += 1

    fmap, fflat = k(r"\x. x * 7 - 2"), k(r"\x. if x > 0 then [x, x] else []")
    for _ in range(CASES):
        s = Sequence(tuple(_random_seq(rng)))
        m, fl = exec_map(fmap, s), exec_flatmap(fflat, s)
        expect_flat = tuple(t for t, v in s.items for _ in range(2 if v > 0 else 0))
        if m.timestamps() != s.timestamps() or fl.timestamps() != expect_flat:
            failures["timestamps"] += 1

    for _ in range(CASES):
        s = Sequence(tuple(_random_seq(rng)), bounded=False)
        n = rng.randint(1, 12)
        weak = exec_weak_map(fflat, s, WindowingPolicy(n, n, "count"), flat=True)
        if Counter(weak.items) != Counter(exec_flatmap(fflat, s).items):
            failures["weak-map"] += 1

    for _ in range(CASES):
        a, b, c = (Sequence(tuple(_random_seq(rng))) for _ in range(3))
        comm = exec_merge([a, b]) == exec_merge([b, a])
        assoc = exec_merge([exec_merge([a, b]), c]) == exec_merge([a, exec_merge([b, c])])
        bags = [Multiset(x.values()) for x in (a, b, c)]
        bag_ok = exec_merge([exec_merge(bags[:2]), bags[2]]) == exec_merge([bags[2], exec_merge([bags[1], bags[0]])])
        if not (comm and assoc and bag_ok):
            failures["merge"] += 1

    total = 3 * CASES + 4 * CASES
    ok = not failures
    return ok, "%d cases (reduce +/min/max %d each, fold-reduce, timestamps, weak map, merge %d each), failures: %s" % (
        total, CASES, CASES, dict(failures) or "none")


# -- 7 ---------------------------------------------------------------------------------------


def _nx(g):
    h = nx.MultiDiGraph()
    for vid, v in g.vertices.items():
        h.add_node(vid, content=vertex_content(v))
    for e in g.edges:
        h.add_edge(e.src, e.dst, port=None if g.vertices[e.dst].is_merge else e.port)
    return h


def _isomorphic(g1, g2):
    return nx.is_isomorphic(
        _nx(g1), _nx(g2),
        node_match=lambda a, b: a["content"] == b["content"],
        edge_match=lambda a, b: sorted(d["port"] or 0 for d in a.values()) == sorted(d["port"] or 0 for d in b.values()),
    )


ERASABLE = [r"map (\x. x + 1)", r"flatmap (\x. [x])", 'from-file "a" as list of int', "to-stdout as list of int"]
MODIFIERS = [
    ("p ({op}) by (\\x. x)", "p"),
    ("w ({op}) win (3, 1, count)", "w"),
    ("wp ({op}) by (\\x. x) win (2, 2, time)", "wp"),
]


def criterion_7():
    failures = Counter()
    seen = [0]

    @settings(max_examples=CASES, database=None, derandomize=True, deadline=None)
    @given(any_pipelines, st.integers(0, 2**32 - 1))
    def prop(p, seed):
        seen[0] += 1
        n = normalize(p)
        if normalize(n) != n:
            failures["idempotence"] += 1
        q = rewrite(p, random.Random(seed))
        g1, g2 = build_graph(p), build_graph(q)
        if not _isomorphic(g1, g2) or canonical_form(g1) != canonical_form(g2):
            failures["isomorphism"] += 1
        if str(type_pipeline(p)) != str(type_pipeline(q)):
            failures["types"] += 1

    prop()

    erased = 0
    for src in ERASABLE:
        plain = parse_pipeline("new " + src)
        for template, _ in MODIFIERS:
            mod = parse_pipeline("new " + template.format(op=src))
            erased += 1
            if str(type_pipeline(mod)) != str(type_pipeline(plain)) or canonical_form(build_graph(mod)) != canonical_form(
                build_graph(plain)
            ) or normalize(mod) != normalize(plain):
                failures["erasure"] += 1
    ok = not failures
    return ok, "%d random pipelines (idempotence, isomorphism, types), %d modifier erasures, failures: %s" % (
        seen[0], erased, dict(failures) or "none")


# -- 8 ---------------------------------------------------------------------------------------


def _triples(captured):
    return [(t, s, v) for t, (s, v) in captured]


def _match(got, want, tol=0.0):
    if len(got) != len(want):
        return False
    return all(
        a[:-1] == b[:-1] and math.isclose(a[-1], b[-1], rel_tol=tol, abs_tol=tol) for a, b in zip(sorted(got), sorted(want))
    )


def criterion_8():
    prices = oracles.merged_prices(FIXTURES)
    tweets = oracles.read_replay(FIXTURES / "tweets.replay")
    results = {}
    start = time.perf_counter()
    with tempfile.TemporaryDirectory() as d:
        out = Path(d)
        cfg = dict(base_dir=PROGRAMS, capture=True)

        rep = run_program(load("stock_read.pico"), ExecConfig(bindings={"out": out / "read"}, **cfg))
        (read,) = rep.captured.values()
        results["read"] = read == prices

        binds = {n: out / n for n in ("min-out", "max-out", "mean-out")}
        rep = run_program(load("stock_stats.pico"), ExecConfig(bindings=binds, **cfg))
        stats = oracles.stock_stats(prices)
        for stat in ("min", "max", "mean"):
            got = _triples(rep.captured["%s-sink" % stat])
            results[stat] = _match(got, stats[stat], 1e-9 if stat == "mean" else 0.0)

        rep = run_program(load("price_warnings.pico"), ExecConfig(bindings={"out": out / "warn"}, **cfg))
        (warn,) = rep.captured.values()
        want_warn = oracles.price_warnings(prices)
        results["warnings"] = _match(_triples(warn), want_warn) and all(d >= 0.05 for _, (_, d) in warn)

        rep = run_program(load("correlate_stocks_tweets.pico"), ExecConfig(bindings={"out": out / "corr"}, **cfg))
        (corr,) = rep.captured.values()
        want_corr = oracles.correlate(want_warn, oracles.tweet_mentions(tweets))
        got_corr = [(t, s, n, m) for t, (s, n, m) in corr]
        results["correlate"] = _match(got_corr, want_corr)
    elapsed = time.perf_counter() - start
    sizes_ok = 900 <= len(prices) <= 1100 and 150 <= len(tweets) <= 250
    ok = all(results.values()) and sizes_ok and elapsed < 10.0
    return ok, "%d prices, %d tweets; %s; %d stat windows, %d warnings, %d correlations; %.2fs < 10s" % (
        len(prices),
        len(tweets),
        ", ".join("%s %s" % (n, "ok" if v else "MISMATCH") for n, v in results.items()),
        len(stats["min"]),
        len(want_warn),
        len(want_corr),
        elapsed,
    )


# -- driver ------------------------------------------------------------------------------------

CRITERIA = [
    (1, "word-count typing", criterion_1),
    (2, "negative typing corpus", criterion_2),
    (3, "graph construction", criterion_3),
    (4, "1 MB word count", criterion_4),
    (5, "windowing oracle", criterion_5),
    (6, "semantic properties", criterion_6),
    (7, "structural equivalence", criterion_7),
    (8, "stock use cases", criterion_8),
]


def run_criterion(fn):
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as e:  # a crash is a failure of the criterion, reported as such
        ok, detail = False, "raised %s: %s" % (type(e).__name__, e)
    return ok, detail, time.perf_counter() - start


def line(n, title, ok, detail, elapsed):
    return "criterion %d %-24s %s  %s [%.2fs]" % (n, title, "PASS" if ok else "FAIL", detail, elapsed)


@pytest.mark.parametrize("n, title, fn", CRITERIA, ids=[str(c[0]) for c in CRITERIA])
def test_criterion(n, title, fn, capsys):
    ok, detail, elapsed = run_criterion(fn)
    with capsys.disabled():
        print("\n" + line(n, title, ok, detail, elapsed))
    assert ok, detail


if __name__ == "__main__":
    results = [(n, title, *run_criterion(fn)) for n, title, fn in CRITERIA]
    for r in results:
        print(line(*r))
    sys.exit(0 if all(r[2] for r in results) else 1)
