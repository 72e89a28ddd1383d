"""Semantic collections and the partitioning/windowing machinery.

A bag is a :class:`Multiset` of values. Lists and streams are
:class:`Sequence` objects holding ``(timestamp, value)`` pairs; a stream is a
sequence flagged unbounded. Streams processed by the executor never exist as a
whole: they flow item by item through :class:`Windower` instances.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Iterator, Union

from .values import DataType, format_value


class StructureError(Exception):
    pass


class StructureType(Enum):
    BAG = "bag"
    LIST = "list"
    STREAM = "stream"

    def __str__(self):
        return self.value

    @property
    def bounded(self) -> bool:
        return self is not StructureType.STREAM

    @property
    def ordered(self) -> bool:
        return self is not StructureType.BAG


BAG, LIST, STREAM = StructureType.BAG, StructureType.LIST, StructureType.STREAM

SIGMA = frozenset(StructureType)
SIGMA_B = frozenset({BAG, LIST})
SIGMA_U = frozenset({STREAM})
SIGMA_O = frozenset({LIST, STREAM})

SIGMA_NAMES = {SIGMA: "Σ", SIGMA_B: "Σ_b", SIGMA_U: "Σ_u", SIGMA_O: "Σ_o"}


def show_sigma_set(s: frozenset) -> str:
    if s in SIGMA_NAMES:
        return SIGMA_NAMES[s]
    return "{" + ", ".join(sorted(str(x) for x in s)) + "}"


@dataclass(frozen=True)
class CollectionType:
    data: DataType
    structure: StructureType

    def __str__(self):
        return "<%s, %s>" % (self.data, self.structure)


# -- tokens -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Multiset:
    items: tuple = ()

    structure = BAG

    def counts(self) -> Counter:
        return Counter(self.items)

    def __eq__(self, other):
        return isinstance(other, Multiset) and self.counts() == other.counts()

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def values(self) -> tuple:
        return self.items


@dataclass(frozen=True)
class Sequence:
    items: tuple = ()  # of (timestamp, value)
    bounded: bool = True

    @property
    def structure(self) -> StructureType:
        return LIST if self.bounded else STREAM

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def values(self) -> tuple:
        return tuple(v for _, v in self.items)

    def timestamps(self) -> tuple:
        return tuple(t for t, _ in self.items)


SemCollection = Union[Multiset, Sequence]


def sequence(values: Iterable, bounded: bool = True) -> Sequence:
    """A sequence stamped with positions 0, 1, 2, ..."""
    return Sequence(tuple(enumerate(values)), bounded)


def show_collection(c: SemCollection) -> str:
    if isinstance(c, Multiset):
        return "{" + ", ".join(sorted(format_value(v) for v in c.items)) + "}"
    return "<" + ", ".join("(%d,%s)" % (t, format_value(v)) for t, v in c.items) + ">"


# -- policies -------------------------------------------------------------------


@dataclass(frozen=True)
class WindowingPolicy:
    size: int
    slide: int
    basis: str = "count"  # "count" or "time"

    def __post_init__(self):
        if self.size < 1 or self.slide < 1:
            raise ValueError("window size and slide must be positive: %s" % self)
        if self.basis not in ("count", "time"):
            raise ValueError("window basis must be count or time, got %r" % self.basis)

    @property
    def tumbling(self) -> bool:
        return self.size == self.slide

    def __str__(self):
        return "(%d,%d,%s)" % (self.size, self.slide, self.basis)

    def time_windows_of(self, t: int) -> range:
        """Indices i with ``i*slide <= t < i*slide + size``."""
        lo = max(0, math.ceil((t - self.size + 1) / self.slide))
        hi = t // self.slide
        return range(lo, hi + 1)


# -- operations -------------------------------------------------------------------


def k_selection(c: SemCollection, pi: Callable, k: Any) -> SemCollection:
    if isinstance(c, Multiset):
        return Multiset(tuple(v for v in c.items if pi(v) == k))
    return Sequence(tuple((t, v) for t, v in c.items if pi(v) == k), c.bounded)


def partition(c: SemCollection, pi: Callable) -> dict:
    """Map each key with a non-empty selection to its group, in first-seen order."""
    groups: dict = {}
    if isinstance(c, Multiset):
        for v in c.items:
            groups.setdefault(pi(v), []).append(v)
        return {k: Multiset(tuple(vs)) for k, vs in groups.items()}
    for t, v in c.items:
        groups.setdefault(pi(v), []).append((t, v))
    return {k: Sequence(tuple(items), c.bounded) for k, items in groups.items()}


def _stable_by_time(items) -> tuple:
    return tuple(sorted(items, key=lambda tv: tv[0]))


def time_reorder(s: Sequence) -> Sequence:
    if not isinstance(s, Sequence):
        raise StructureError("time reordering needs a sequence, got a bag")
    if not s.bounded:
        raise StructureError("cannot time-reorder an unbounded stream")
    return Sequence(_stable_by_time(s.items), True)


def is_time_ordered(s: Sequence) -> bool:
    ts = s.timestamps()
    return all(a <= b for a, b in zip(ts, ts[1:]))


def indexed_windows(s: Sequence, w: WindowingPolicy) -> list:
    """Like :func:`windowed_view` but each window comes with its index ``i``."""
    if not isinstance(s, Sequence):
        raise StructureError("windowing needs a sequence, got a bag")
    if w.basis == "count":
        return [
            (i, Sequence(_stable_by_time(s.items[start : start + w.size])))
            for i, start in enumerate(range(0, len(s.items), w.slide))
        ]
    buckets: dict[int, list] = {}
    for t, v in s.items:
        for i in w.time_windows_of(t):
            buckets.setdefault(i, []).append((t, v))
    return [(i, Sequence(_stable_by_time(buckets[i]))) for i in sorted(buckets)]


def windowed_view(s: Sequence, w: WindowingPolicy) -> list:
    """All windows of ``s`` under ``w``, each a time-ordered bounded sequence."""
    return [win for _, win in indexed_windows(s, w)]


# -- incremental windowing for streams ---------------------------------------------


@dataclass
class Windower:
    """Feeds stream items one at a time and yields windows as they close.

    Count windows close once full. A time window ``[a, b)`` closes when an item
    with timestamp ``>= b`` arrives; items that only belong to windows already
    closed are dropped and counted in :attr:`late`. :meth:`flush` closes the
    rest at end of input.
    """

    policy: WindowingPolicy
    late: int = 0
    _open: dict = field(default_factory=dict)
    _seen: int = 0
    _closed_below: int = 0
    _max_t: int = -1

    def push(self, t: int, v: Any) -> list:
        if self.policy.basis == "count":
            return self._push_count(t, v)
        return self._push_time(t, v)

    def _push_count(self, t, v) -> list:
        w = self.policy
        n = self._seen
        self._seen += 1
        if n % w.slide == 0:
            self._open[n // w.slide] = []
        out = []
        for i in list(self._open):
            items = self._open[i]
            items.append((t, v))
            if len(items) == w.size:
                out.append((i, Sequence(_stable_by_time(self._open.pop(i)))))
        return out

    def _push_time(self, t, v) -> list:
        w = self.policy
        member_of = w.time_windows_of(t)
        indices = [i for i in member_of if i >= self._closed_below]
        if member_of and not indices:
            self.late += 1
        for i in indices:
            self._open.setdefault(i, []).append((t, v))
        if t <= self._max_t:
            return []
        self._max_t = t
        if t < w.size:
            return []
        closed_below = (t - w.size) // w.slide + 1
        self._closed_below = max(self._closed_below, closed_below)
        out = []
        for i in sorted(self._open):
            if i < self._closed_below:
                out.append((i, Sequence(_stable_by_time(self._open.pop(i)))))
        return out

    def flush(self) -> list:
        out = [(i, Sequence(_stable_by_time(self._open[i]))) for i in sorted(self._open)]
        self._open.clear()
        return out


def stream_windows(items: Iterable, w: WindowingPolicy, on_late=None) -> Iterator:
    """Lazily window an iterable of ``(t, v)`` pairs; yields ``(index, window)``."""
    win = Windower(w)
    for t, v in items:
        yield from win.push(t, v)
    yield from win.flush()
    if on_late is not None:
        on_late(win.late)
