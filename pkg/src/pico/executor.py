"""Running dataflow graphs.

Bounded programs (bags and lists) run as one token per edge: each vertex
receives whole collections and produces one. Stream programs run as a
network of generators over ``(timestamp, value)`` pairs, so no stream is
ever materialized; stateful operators keep per-window or per-key state only.

The ``exec_*`` functions below are the bounded semantics and are usable on
their own, which is how the tests check them against brute-force oracles.
"""

from __future__ import annotations

import functools
import heapq
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Optional

from .ast import BCombine, BMap, Collect, Emit, FlatMap, FoldReduce, Map, Operator, Reduce
from .collections import (
    BAG,
    STREAM,
    Multiset,
    Sequence,
    StructureError,
    StructureType,
    WindowingPolicy,
    Windower,
    indexed_windows,
    partition,
    stream_windows,
)
from .dataflow import DataflowGraph, Edge, Vertex, build_graph
from .io import FileSink, SocketSink, SourceError, StreamSink, iter_replay, iter_socket, iter_text
from .kernel import KernelError, compile_kernel
from .typecheck import check_toplevel
from .values import format_value


class ExecutionError(Exception):
    """A runtime failure, tagged with the vertex where it happened."""

    def __init__(self, message: str, vertex: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.vertex = vertex

    def __str__(self):
        if self.vertex is None:
            return self.message
        return "at %s: %s" % (self.vertex, self.message)


class EndpointError(ExecutionError):
    """A source or sink could not be opened, or its name was never bound."""


class EmptyReduce(ExecutionError):
    def __init__(self, vertex: Optional[str] = None):
        super().__init__("reduce of an empty collection", vertex)


def _item_error(exc: KernelError, t, v) -> KernelError:
    where = "item %s" % format_value(v) if t is None else "item %s at t=%d" % (format_value(v), t)
    return KernelError("%s (%s)" % (exc, where))


# -- bounded semantics -----------------------------------------------------------------


def _recombine(parts: list, like) -> Any:
    """Concatenate per-group results; sequences are stably re-sorted by time."""
    if isinstance(like, Multiset):
        return Multiset(tuple(itertools.chain.from_iterable(p.items for p in parts)))
    items = sorted(itertools.chain.from_iterable(p.items for p in parts), key=lambda tv: tv[0])
    return Sequence(tuple(items), like.bounded)


def exec_map(f: Callable, c):
    if isinstance(c, Multiset):
        out = []
        for v in c.items:
            try:
                out.append(f(v))
            except KernelError as e:
                raise _item_error(e, None, v) from None
        return Multiset(tuple(out))
    out = []
    for t, v in c.items:
        try:
            out.append((t, f(v)))
        except KernelError as e:
            raise _item_error(e, t, v) from None
    return Sequence(tuple(out), c.bounded)


def exec_flatmap(f: Callable, c):
    if isinstance(c, Multiset):
        out = []
        for v in c.items:
            try:
                out.extend(f(v))
            except KernelError as e:
                raise _item_error(e, None, v) from None
        return Multiset(tuple(out))
    out = []
    for t, v in c.items:
        try:
            out.extend((t, y) for y in f(v))
        except KernelError as e:
            raise _item_error(e, t, v) from None
    return Sequence(tuple(out), c.bounded)


def reduce_values(op: Callable, values: Iterable):
    it = iter(values)
    try:
        first = next(it)
    except StopIteration:
        raise EmptyReduce() from None
    return functools.reduce(op, it, first)


def fold_partitions(fold: Callable, z, combine: Callable, chunks: Iterable) -> Any:
    """Fold each chunk from ``z``, then combine the partial results left to right."""
    partials = [functools.reduce(fold, chunk, z) for chunk in chunks]
    if not partials:
        return z
    return functools.reduce(combine, partials)


def _chunks(values: list, size: int) -> list:
    return [values[i : i + size] for i in range(0, len(values), size)]


def _result(c, value):
    """Wrap a single combined value the way ``c``'s structure needs."""
    if isinstance(c, Multiset):
        return Multiset((value,))
    t = max((t for t, _ in c.items), default=0)
    return Sequence(((t, value),), c.bounded)


def exec_reduce(op: Callable, c):
    return _result(c, reduce_values(op, c.values()))


def exec_fold_reduce(fold: Callable, z, combine: Callable, c, chunk: int = 1024):
    return _result(c, fold_partitions(fold, z, combine, _chunks(list(c.values()), chunk)))


def exec_partitioned(inner: Callable, key: Callable, c):
    groups = partition(c, key)
    return _recombine([inner(g) for g in groups.values()], c)


def exec_windowed(inner: Callable, w: WindowingPolicy, s):
    if not isinstance(s, Sequence):
        raise StructureError("windowed operator applied to a bag")
    parts = [inner(win) for _, win in indexed_windows(s, w)]
    return Sequence(tuple(itertools.chain.from_iterable(p.items for p in parts)), s.bounded)


def pair_items(pairing: str, c1, c2):
    """The collection of ``(a, b)`` pairs a binary operator works on."""
    if isinstance(c1, Multiset) != isinstance(c2, Multiset):
        raise StructureError("cannot pair a bag with a sequence")
    if isinstance(c1, Multiset):
        if pairing == "zip":
            raise StructureError("zip needs ordered inputs")
        return Multiset(tuple((a, b) for a in c1.items for b in c2.items))
    if pairing == "zip":
        items = tuple((max(t1, t2), (a, b)) for (t1, a), (t2, b) in zip(c1.items, c2.items))
    else:
        items = tuple((max(t1, t2), (a, b)) for t1, a in c1.items for t2, b in c2.items)
    return Sequence(items, c1.bounded and c2.bounded)


def exec_pair(pairing: str, inner: Callable, c1, c2, key=None, window=None):
    """Pair two collections and apply ``inner`` to the pairs, honouring modifiers.

    Keyed pairing only matches keys present on both sides; windowed pairing
    matches windows with the same index.
    """

    def plain(x, y):
        return inner(pair_items(pairing, x, y))

    def windowed(x, y):
        right = dict(indexed_windows(y, window))
        parts = [plain(wx, right[i]) for i, wx in indexed_windows(x, window) if i in right]
        return Sequence(tuple(itertools.chain.from_iterable(p.items for p in parts)), x.bounded)

    body = windowed if window is not None else plain
    if key is None:
        return body(c1, c2)
    g1, g2 = partition(c1, key), partition(c2, key)
    return _recombine([body(g1[k], g2[k]) for k in g1 if k in g2], c1)


def exec_merge(tokens: list, deterministic: bool = True):
    """Union of bags, or a time-ordered interleaving of sequences.

    The deterministic merge orders sequence items by ``(timestamp, value)``,
    which makes it commutative and associative.
    """
    if all(isinstance(t, Multiset) for t in tokens):
        return Multiset(tuple(itertools.chain.from_iterable(t.items for t in tokens)))
    if any(isinstance(t, Multiset) for t in tokens):
        raise StructureError("cannot merge a bag with a sequence")
    bounded = all(t.bounded for t in tokens)
    if deterministic:
        return Sequence(tuple(sorted(itertools.chain.from_iterable(t.items for t in tokens))), bounded)
    return Sequence(tuple(_round_robin([iter(t.items) for t in tokens])), bounded)


def _round_robin(its: list) -> Iterator:
    live = list(its)
    while live:
        for it in list(live):
            try:
                yield next(it)
            except StopIteration:
                live.remove(it)


# -- operator compilation --------------------------------------------------------------------


@dataclass
class CompiledOp:
    """Host callables for one operator: its bounded core and its modifiers."""

    op: Operator
    core: Callable  # bounded collection -> bounded collection
    key: Optional[Callable] = None
    window: Optional[WindowingPolicy] = None
    item_fn: Optional[Callable] = None  # elementwise function for map / flatmap
    flat: bool = False

    def bounded(self, *tokens):
        if self.op.binary:
            c1, c2 = tokens
            return exec_pair(self.op.core.pairing, self.core, c1, c2, self.key, self.window)
        (c,) = tokens
        if self.item_fn is not None:
            return self.core(c)
        if self.key is not None and self.window is not None:
            return exec_partitioned(lambda g: exec_windowed(self.core, self.window, g), self.key, c)
        if self.key is not None:
            return exec_partitioned(self.core, self.key, c)
        if self.window is not None:
            return exec_windowed(self.core, self.window, c)
        return self.core(c)


def _combine_fn(inner, chunk: int) -> Callable:
    if isinstance(inner, Reduce):
        op = compile_kernel(inner.op)
        return lambda c: exec_reduce(op, c)
    fold, comb = compile_kernel(inner.fold), compile_kernel(inner.combine)
    z = compile_kernel(inner.z)()
    return lambda c: exec_fold_reduce(fold, z, comb, c, chunk)


def compile_operator(op: Operator, fold_chunk: int = 1024) -> CompiledOp:
    c = op.core
    key = compile_kernel(op.key) if (op.key is not None and op.decomposable) else None
    window = op.window if op.decomposable else None
    if isinstance(c, (Map, FlatMap)):
        f = compile_kernel(c.f)
        flat = isinstance(c, FlatMap)
        core = (lambda t: exec_flatmap(f, t)) if flat else (lambda t: exec_map(f, t))
        return CompiledOp(op, core, item_fn=f, flat=flat)
    if isinstance(c, (Reduce, FoldReduce)):
        return CompiledOp(op, _combine_fn(c, fold_chunk), key, window)
    if isinstance(c, BMap):
        f = compile_kernel(c.f)
        g = lambda p: f(p[0], p[1])  # noqa: E731
        core = (lambda t: exec_flatmap(g, t)) if c.flat else (lambda t: exec_map(g, t))
        return CompiledOp(op, core, key, window)
    if isinstance(c, BCombine):
        return CompiledOp(op, _combine_fn(c.inner, fold_chunk), key, window)
    raise TypeError("not a processing operator: %r" % (c,))


# -- streaming semantics --------------------------------------------------------------------


def stream_elementwise(f: Callable, items: Iterable, batch: WindowingPolicy, flat: bool = False) -> Iterator:
    """Weak map/flatmap: apply ``f`` batch by batch, each batch time-reordered."""
    for _, win in stream_windows(items, batch):
        for t, v in win.items:
            try:
                r = f(v)
            except KernelError as e:
                raise _item_error(e, t, v) from None
            if flat:
                for y in r:
                    yield t, y
            else:
                yield t, r


def exec_weak_map(f: Callable, s: Sequence, batch: WindowingPolicy, flat: bool = False) -> Sequence:
    """Bounded view of :func:`stream_elementwise` over a finite prefix of a stream."""
    return Sequence(tuple(stream_elementwise(f, s.items, batch, flat)), s.bounded)


class _Late:
    def __init__(self):
        self.count = 0

    def add(self, n: int):
        self.count += n


def _keyed_accumulator(op: CompiledOp, chunk: int):
    """Per-key streaming state for an unwindowed keyed combine.

    Results equal the bounded combine of each key's group in arrival order.
    """
    inner = op.op.core
    if isinstance(inner, Reduce):
        f = compile_kernel(inner.op)

        def step(state, v):
            return v if state is None else f(state, v)

        return None, step, lambda s: s
    fold, comb = compile_kernel(inner.fold), compile_kernel(inner.combine)
    z = compile_kernel(inner.z)()

    # State: (combined partial or None, current chunk partial, items in chunk).
    def step(state, v):
        total, acc, n = state
        acc = fold(acc, v)
        n += 1
        if n == chunk:
            total = acc if total is None else comb(total, acc)
            acc, n = z, 0
        return total, acc, n

    def finish(state):
        total, acc, n = state
        if total is None:
            return acc
        return comb(total, acc) if n else total

    return (None, z, 0), step, finish


def stream_keyed_combine(op: CompiledOp, items: Iterable, chunk: int = 1024) -> Iterator:
    init, step, finish = _keyed_accumulator(op, chunk)
    state: dict = {}
    for t, v in items:
        k = op.key(v)
        t0, acc = state.get(k, (t, init))
        try:
            state[k] = (max(t0, t), step(acc, v))
        except KernelError as e:
            raise _item_error(e, t, v) from None
    results = [(t, finish(acc)) for t, acc in state.values()]
    yield from sorted(results, key=lambda tv: tv[0])


def stream_windowed_combine(op: CompiledOp, items: Iterable, late: _Late) -> Iterator:
    if op.key is not None and op.window.basis == "time":
        # Time windows do not depend on which other items exist, so one shared
        # windower serves every key and results leave in window order.
        windows = stream_windows(items, op.window, late.add)
        for _, win in windows:
            yield from exec_partitioned(op.core, op.key, win).items
        return
    windowers: dict = {}
    for t, v in items:
        k = op.key(v) if op.key is not None else None
        w = windowers.get(k)
        if w is None:
            w = windowers[k] = Windower(op.window)
        for _, win in w.push(t, v):
            yield from op.core(win).items
    tail = []
    for w in windowers.values():
        for _, win in w.flush():
            tail.extend(op.core(win).items)
        late.add(w.late)
    if op.key is not None:
        tail.sort(key=lambda tv: tv[0])
    yield from tail


def stream_pair(op: CompiledOp, left: Iterable, right: Iterable, late: _Late) -> Iterator:
    """Windowed pairing of two streams; windows meet by index, per key if keyed."""
    pairing = op.op.core.pairing
    windowers = ({}, {})
    pending = ({}, {})  # side -> key -> {index: window}

    def closed(side, k, i, win):
        other = pending[1 - side].setdefault(k, {})
        mine = pending[side].setdefault(k, {})
        for j in [j for j in other if j < i]:
            del other[j]
        if i in other:
            w2 = other.pop(i)
            pair = (win, w2) if side == 0 else (w2, win)
            return list(op.core(pair_items(pairing, *pair)).items)
        mine[i] = win
        return []

    def feed(side, t, v):
        k = op.key(v) if op.key is not None else None
        w = windowers[side].get(k)
        if w is None:
            w = windowers[side][k] = Windower(op.window)
        out = []
        for i, win in w.push(t, v):
            out.extend(closed(side, k, i, win))
        return out

    its = [iter(left), iter(right)]
    live = [0, 1]
    while live:
        for side in list(live):
            try:
                t, v = next(its[side])
            except StopIteration:
                live.remove(side)
                continue
            yield from feed(side, t, v)
    tail = []
    for side in (0, 1):
        for k, w in windowers[side].items():
            for i, win in w.flush():
                tail.extend(closed(side, k, i, win))
            late.add(w.late)
    if op.key is not None:
        tail.sort(key=lambda tv: tv[0])
    yield from tail


def stream_merge(streams: list, deterministic: bool = True) -> Iterator:
    if deterministic:
        return heapq.merge(*streams)
    return _round_robin([iter(s) for s in streams])


# -- running graphs -----------------------------------------------------------------------


def _default_batch() -> WindowingPolicy:
    return WindowingPolicy(1000, 1000, "count")


@dataclass
class ExecConfig:
    """Knobs for one run.

    ``bindings`` maps endpoint names used in the program to paths or
    ``HOST:PORT`` addresses; ``base_dir`` anchors relative paths written in the
    program text. ``batch`` is the tumbling window that drives map and flatmap
    on streams.
    """

    batch: WindowingPolicy = field(default_factory=_default_batch)
    bindings: dict = field(default_factory=dict)
    base_dir: Path = Path(".")
    deterministic_merge: bool = True
    fold_chunk: int = 1024
    stdout: Any = None
    socket_timeout: float = 30.0
    capture: bool = False

    def __post_init__(self):
        if not self.batch.tumbling:
            raise ValueError("the execution batch must be a tumbling window, got %s" % self.batch)
        if self.fold_chunk < 1:
            raise ValueError("fold chunk size must be positive")


@dataclass
class SinkReport:
    kind: str
    target: str
    items: int
    sha256: str


@dataclass
class RunReport:
    structure: str
    edges: dict = field(default_factory=dict)  # "src -> dst" -> item count
    sinks: dict = field(default_factory=dict)  # vertex id -> SinkReport
    late_items: int = 0
    captured: dict = field(default_factory=dict)  # vertex id -> [(t, v)] when capturing

    def to_json(self) -> str:
        d = {
            "structure": self.structure,
            "edges": self.edges,
            "sinks": {k: vars(s) for k, s in self.sinks.items()},
            "late_items": self.late_items,
        }
        return json.dumps(d, indent=2, sort_keys=True, ensure_ascii=False)


def _edge_name(g: DataflowGraph, e: Edge) -> str:
    name = "%s -> %s" % (e.src, e.dst)
    dst = g.vertices[e.dst]
    if dst.op is not None and dst.op.binary:
        name += " [%d]" % e.port
    return name


def graph_structure(g: DataflowGraph) -> StructureType:
    kinds = {v.op.core.ctype.structure for v in g.vertices.values() if v.op is not None and isinstance(v.op.core, (Emit, Collect))}
    if len(kinds) != 1:
        raise ExecutionError("cannot determine the collection structure (found %s)" % sorted(map(str, kinds)))
    return kinds.pop()


def _target(ep, cfg: ExecConfig, path_like: bool) -> str:
    if ep.named:
        if ep.value not in cfg.bindings:
            raise EndpointError("endpoint %s is not bound (bind it with --file, --replay or --socket)" % ep.value)
        return str(cfg.bindings[ep.value])
    if path_like:
        return str(Path(cfg.base_dir) / ep.value)
    return ep.value


def _source_items(e: Emit, cfg: ExecConfig) -> Iterator:
    dtype = e.ctype.data
    if e.kind == "socket":
        return iter_socket(_target(e.endpoint, cfg, False), dtype, cfg.socket_timeout)
    path = _target(e.endpoint, cfg, True)
    if e.kind == "replay":
        return iter_replay(path, dtype)
    return iter_text(path, dtype)


def _open_sink(c: Collect, cfg: ExecConfig):
    opts = dict(sort=c.ctype.structure is BAG, timestamps=c.kind == "replay")
    if c.kind == "stdout":
        return "-", StreamSink(cfg.stdout, **opts)
    if c.kind == "socket":
        addr = _target(c.endpoint, cfg, False)
        return addr, SocketSink(addr, cfg.socket_timeout, **opts)
    path = _target(c.endpoint, cfg, True)
    return path, FileSink(path, **opts)


class _Runner:
    def __init__(self, g: DataflowGraph, cfg: ExecConfig):
        self.g = g
        self.cfg = cfg
        self.structure = graph_structure(g)
        self.report = RunReport(str(self.structure))
        self.late = _Late()
        self.compiled = {
            vid: compile_operator(v.op, cfg.fold_chunk)
            for vid, v in g.vertices.items()
            if v.op is not None and not isinstance(v.op.core, (Emit, Collect))
        }

    def run(self) -> RunReport:
        try:
            if self.structure is STREAM:
                self._run_stream()
            else:
                self._run_bounded()
        except OSError as e:
            raise EndpointError(str(e)) from None
        except SourceError as e:
            raise ExecutionError(str(e)) from None
        self.report.late_items = self.late.count
        return self.report

    # bounded: one token per edge

    def _source_token(self, e: Emit):
        items = _source_items(e, self.cfg)
        if self.structure is BAG:
            return Multiset(tuple(v for _, v in items))
        return Sequence(tuple(items), True)

    def _sink_token(self, vid: str, c: Collect, token) -> None:
        if isinstance(token, Multiset):
            items = [(0, v) for v in token.items]
        else:
            items = list(token.items)
        self._drain(vid, c, iter(items))

    def _drain(self, vid: str, c: Collect, items: Iterator) -> None:
        target, sink = _open_sink(c, self.cfg)
        captured = [] if self.cfg.capture else None
        for t, v in items:
            sink.write(t, v)
            if captured is not None:
                captured.append((t, v))
        digest = sink.close()
        self.report.sinks[vid] = SinkReport(c.kind, target, sink.count, digest)
        if captured is not None:
            self.report.captured[vid] = captured

    def _run_bounded(self) -> None:
        g = self.g
        tokens: dict = {}
        for vid in g.topological_order():
            v = g.vertices[vid]
            ins = [tokens.pop(e) for e in g.preds(vid)]
            try:
                out = self._compute(vid, v, ins)
            except ExecutionError as e:
                if e.vertex is None:
                    e.vertex = vid
                raise
            except OSError as e:
                raise EndpointError(str(e), vid) from None
            except (KernelError, StructureError, SourceError) as e:
                raise ExecutionError(str(e), vid) from None
            for e in g.succs(vid):
                tokens[e] = out
                self.report.edges[_edge_name(g, e)] = len(out)

    def _compute(self, vid: str, v: Vertex, ins: list):
        if v.is_merge:
            return exec_merge(ins, self.cfg.deterministic_merge)
        core = v.op.core
        if isinstance(core, Emit):
            return self._source_token(core)
        if isinstance(core, Collect):
            self._sink_token(vid, core, ins[0])
            return None
        return self.compiled[vid].bounded(*ins)

    # streams: a network of generators

    def _guard(self, vid: str, it: Iterable) -> Iterator:
        try:
            yield from it
        except ExecutionError as e:
            if e.vertex is None:
                e.vertex = vid
            raise
        except OSError as e:
            raise EndpointError(str(e), vid) from None
        except (KernelError, StructureError, SourceError) as e:
            raise ExecutionError(str(e), vid) from None

    def _count(self, name: str, it: Iterable) -> Iterator:
        self.report.edges[name] = 0
        n = 0
        for x in it:
            n += 1
            yield x
        self.report.edges[name] = n

    def _stream_vertex(self, vid: str, v: Vertex, ins: list) -> Iterator:
        cfg = self.cfg
        if v.is_merge:
            return stream_merge(ins, cfg.deterministic_merge)
        core = v.op.core
        if isinstance(core, Emit):
            return _source_items(core, cfg)
        op = self.compiled[vid]
        if op.op.binary:
            if op.window is None:
                raise StructureError("%s on streams needs a window" % core.keyword)
            return stream_pair(op, ins[0], ins[1], self.late)
        if op.item_fn is not None:
            return stream_elementwise(op.item_fn, ins[0], cfg.batch, op.flat)
        if op.window is not None:
            return stream_windowed_combine(op, ins[0], self.late)
        if op.key is not None:
            return stream_keyed_combine(op, ins[0], cfg.fold_chunk)
        raise StructureError("%s on a stream needs a key or a window" % core.keyword)

    def _run_stream(self) -> None:
        g = self.g
        streams: dict = {}
        drivers = []
        for vid in g.topological_order():
            v = g.vertices[vid]
            ins = [streams.pop(e) for e in g.preds(vid)]
            if v.op is not None and isinstance(v.op.core, Collect):
                drivers.append((vid, v.op.core, self._guard(vid, ins[0])))
                continue
            out = self._guard(vid, self._stream_vertex(vid, v, ins))
            succs = g.succs(vid)
            branches = itertools.tee(out, len(succs)) if len(succs) > 1 else [out] * len(succs)
            for e, b in zip(succs, branches):
                streams[e] = self._count(_edge_name(g, e), b)
        self._drive(drivers)

    def _drive(self, drivers: list) -> None:
        """Pull from all sinks in turn so that tee buffers stay small."""
        open_sinks = []
        for vid, c, it in drivers:
            target, sink = _open_sink(c, self.cfg)
            open_sinks.append([vid, c, it, target, sink, [] if self.cfg.capture else None])
        live = list(open_sinks)
        while live:
            for entry in list(live):
                vid, c, it, target, sink, captured = entry
                try:
                    t, x = next(it)
                except StopIteration:
                    live.remove(entry)
                    digest = sink.close()
                    self.report.sinks[vid] = SinkReport(c.kind, target, sink.count, digest)
                    if captured is not None:
                        self.report.captured[vid] = captured
                    continue
                sink.write(t, x)
                if captured is not None:
                    captured.append((t, x))


def run_graph(g: DataflowGraph, cfg: Optional[ExecConfig] = None) -> RunReport:
    return _Runner(g, cfg or ExecConfig()).run()


def run_program(prog, cfg: Optional[ExecConfig] = None) -> RunReport:
    """Check that ``prog``'s entry pipeline is top-level, then run it."""
    check_toplevel(prog)
    return run_graph(build_graph(prog.entry), cfg)
