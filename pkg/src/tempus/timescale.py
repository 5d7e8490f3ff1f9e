"""Time scales as ordered unions of isolated points and closed intervals.

A :class:`TimeScale` is a finite ``head`` of segments optionally followed by a
``tail`` generator ``k -> Segment`` that produces the remaining (unbounded)
part of the scale lazily.  All scales are bounded below and have ``sup T = inf``.

The jump operators follow the usual conventions::

    sigma(t) = inf {s in T : s > t}      (sigma(t) = t at right-dense t)
    mu(t)    = sigma(t) - t
"""

from __future__ import annotations

import bisect
import math
import threading
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .errors import EmptyRange, HorizonExceeded, InvalidScale, NotInScale


@dataclass(frozen=True)
class Point:
    t: float

    @property
    def left(self) -> float:
        return self.t

    @property
    def right(self) -> float:
        return self.t

    def shifted(self, d: float) -> Point:
        return Point(self.t + d)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidScale(f"interval requires a < b, got [{self.a}, {self.b}]")

    @property
    def left(self) -> float:
        return self.a

    @property
    def right(self) -> float:
        return self.b

    def shifted(self, d: float) -> Interval:
        return Interval(self.a + d, self.b + d)


Segment = Union[Point, Interval]


@dataclass(frozen=True)
class GridSpec:
    """Discretisation request: materialise ``T ∩ [a, horizon]``.

    ``h_max`` bounds the spacing of samples inside intervals; ``rk_substeps``
    is the number of equal one-step-method substeps taken per grid step on
    continuous parts.
    """

    horizon: float
    h_max: float = 1e-2
    rk_substeps: int = 2

    def __post_init__(self):
        if not self.h_max > 0:
            raise ValueError(f"h_max must be positive, got {self.h_max}")
        if self.rk_substeps < 1:
            raise ValueError("rk_substeps must be >= 1")

    def with_horizon(self, horizon: float) -> GridSpec:
        return GridSpec(horizon, self.h_max, self.rk_substeps)


@dataclass(frozen=True, eq=False)
class Grid:
    """Materialised scale points with their graininess.

    Step ``i`` goes from ``t[i]`` to ``t[i+1]``; it is a jump step when
    ``mu[i] > 0`` (then ``t[i+1] == sigma(t[i])``) and a continuous step
    otherwise.  ``mu[-1]`` is the graininess of the last point, whose
    successor is not part of the grid.
    """

    t: np.ndarray
    mu: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return zip(self.t.tolist(), self.mu.tolist())

    def __getitem__(self, i):
        return (float(self.t[i]), float(self.mu[i]))

    @property
    def jump(self) -> np.ndarray:
        """Boolean mask of jump steps (length ``len(self) - 1``)."""
        return self.mu[:-1] > 0

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.t)

    @property
    def purely_discrete(self) -> bool:
        return bool(np.all(self.jump))

    def index(self, t: float, eps: float = 1e-9) -> int:
        i = int(np.searchsorted(self.t, t - eps))
        if i < len(self.t) and abs(self.t[i] - t) <= eps:
            return i
        raise NotInScale(t, f"t={t!r} is not a grid point")

    def indices(self, ts: Iterable[float], eps: float = 1e-9) -> np.ndarray:
        return np.array([self.index(t, eps) for t in ts], dtype=np.int64)

    def slice(self, i: int, j: int) -> Grid:
        return Grid(self.t[i:j], self.mu[i:j])


def _concat(chunks: list[Grid]) -> Grid:
    if len(chunks) == 1:
        return chunks[0]
    ts = [chunks[0].t] + [c.t[1:] for c in chunks[1:]]
    ms = [chunks[0].mu] + [c.mu[1:] for c in chunks[1:]]
    return Grid(np.concatenate(ts), np.concatenate(ms))


class TimeScale:
    """A closed subset of the reals, bounded below, with ``sup T = inf``.

    Parameters
    ----------
    head:
        Explicit leading segments.  If ``tail`` is None the last one must be
        an unbounded interval ``[a, inf)``.
    tail:
        Pure generator ``k -> Segment`` (k = 0, 1, ...) continuing the scale
        after ``head``.
    epsilon_member:
        Absolute tolerance used when snapping a query time onto the scale.
    min_gap:
        Smallest admissible gap between consecutive segments; rejects scales
        whose isolated points accumulate at a finite time.
    """

    def __init__(
        self,
        head: Iterable[Segment] = (),
        tail: Callable[[int], Segment] | None = None,
        *,
        epsilon_member: float = 1e-9,
        min_gap: float = 1e-6,
        max_segments: int = 10**7,
        description: dict[str, Any] | None = None,
    ):
        if epsilon_member < 0:
            raise InvalidScale("epsilon_member must be >= 0")
        if not min_gap > 2 * epsilon_member:
            raise InvalidScale("min_gap must exceed 2*epsilon_member")
        self.epsilon_member = float(epsilon_member)
        self.min_gap = float(min_gap)
        self.max_segments = int(max_segments)
        self.description = description
        self._tail = tail
        self._tail_next = 0
        self._segs: list[Segment] = []
        self._lefts: list[float] = []
        self._lock = threading.Lock()

        for seg in sorted(head, key=lambda s: s.left):
            self._append(seg)
        if tail is None:
            if not self._segs or not math.isinf(self._segs[-1].right):
                raise InvalidScale("scale without a tail generator must end with [a, inf)")
        else:
            if self._segs and math.isinf(self._segs[-1].right):
                raise InvalidScale("a tail generator cannot follow an unbounded interval")
            for k in range(4):
                if tail(k) != tail(k):
                    raise InvalidScale(f"tail generator is not deterministic at index {k}")
            with self._lock:
                self._grow(len(self._segs) + 16)
        if not self._segs:
            raise InvalidScale("empty time scale")

    # -- segment storage -------------------------------------------------

    def _append(self, seg: Segment) -> None:
        if not isinstance(seg, (Point, Interval)):
            raise InvalidScale(f"not a segment: {seg!r}")
        if not math.isfinite(seg.left):
            raise InvalidScale("segments must have a finite left edge")
        if self._segs:
            prev = self._segs[-1]
            if math.isinf(prev.right):
                raise InvalidScale("segment after an unbounded interval")
            gap = seg.left - prev.right
            if not gap >= self.min_gap:
                raise InvalidScale(
                    f"segments {prev} and {seg} are not separated by min_gap={self.min_gap}"
                )
        self._segs.append(seg)
        self._lefts.append(seg.left)

    def _grow(self, count: int) -> None:
        # caller holds the lock
        while len(self._segs) < count:
            if self._tail is None or (self._segs and math.isinf(self._segs[-1].right)):
                return
            if len(self._segs) >= self.max_segments:
                raise HorizonExceeded(f"more than {self.max_segments} segments requested")
            try:
                seg = self._tail(self._tail_next)
            except Exception as exc:  # generator gave up
                raise HorizonExceeded(f"tail generator failed at index {self._tail_next}: {exc}") from exc
            self._tail_next += 1
            self._append(seg)

    def _ensure_index(self, i: int) -> Segment:
        if i >= len(self._segs):
            with self._lock:
                self._grow(i + 1)
            if i >= len(self._segs):
                raise HorizonExceeded(f"segment {i} cannot be materialised")
        return self._segs[i]

    def _ensure_covers(self, t: float) -> None:
        if self._segs[-1].right >= t:
            return
        with self._lock:
            n = len(self._segs)
            while self._segs[-1].right < t:
                n = max(2 * n, n + 64)
                before = len(self._segs)
                self._grow(n)
                if len(self._segs) == before:
                    raise HorizonExceeded(f"scale cannot be materialised up to t={t!r}")

    def segment(self, i: int) -> Segment:
        return self._ensure_index(i)

    # -- membership and jumps --------------------------------------------

    @property
    def min_point(self) -> float:
        return self._segs[0].left

    def locate(self, t: float) -> tuple[int, float]:
        """Return ``(segment index, snapped t)`` or raise :class:`NotInScale`."""
        t = float(t)
        eps = self.epsilon_member
        if not math.isfinite(t) or t < self.min_point - eps:
            raise NotInScale(t)
        self._ensure_covers(t + eps)
        i = bisect.bisect_right(self._lefts, t + eps) - 1
        seg = self._segs[i]
        if isinstance(seg, Point):
            if abs(t - seg.t) <= eps:
                return i, seg.t
        elif t <= seg.b + eps:
            return i, min(max(t, seg.a), seg.b)
        raise NotInScale(t)

    def contains(self, t: float) -> bool:
        try:
            self.locate(t)
        except NotInScale:
            return False
        return True

    def __contains__(self, t: float) -> bool:
        return self.contains(t)

    def snap(self, t: float) -> float:
        return self.locate(t)[1]

    def floor(self, t: float) -> float:
        """Largest scale point ``<= t``."""
        t = float(t)
        eps = self.epsilon_member
        if t < self.min_point - eps:
            raise NotInScale(t, f"no scale point below t={t!r}")
        self._ensure_covers(t + eps)
        i = bisect.bisect_right(self._lefts, t + eps) - 1
        seg = self._segs[i]
        return min(max(t, seg.left), seg.right)

    def sigma(self, t: float) -> float:
        i, s = self.locate(t)
        seg = self._segs[i]
        if isinstance(seg, Interval) and s < seg.b:
            return s
        return self._ensure_index(i + 1).left

    def mu(self, t: float) -> float:
        i, s = self.locate(t)
        seg = self._segs[i]
        if isinstance(seg, Interval) and s < seg.b:
            return 0.0
        return self._ensure_index(i + 1).left - s

    def rho(self, t: float) -> float:
        """Backward jump (convenience only)."""
        i, s = self.locate(t)
        seg = self._segs[i]
        if isinstance(seg, Interval) and s > seg.a:
            return s
        return s if i == 0 else self._segs[i - 1].right

    def mu_array(self, ts: np.ndarray) -> np.ndarray:
        return np.array([self.mu(t) for t in np.asarray(ts, dtype=float).ravel()])

    # -- grids -----------------------------------------------------------

    def _bounds(self, a: float, horizon: float) -> tuple[float, float]:
        a_s = self.snap(a)
        if horizon <= a_s:
            raise EmptyRange(f"horizon {horizon!r} <= start {a_s!r}")
        h_s = self.snap(horizon)
        if h_s <= a_s:
            raise EmptyRange(f"horizon {horizon!r} <= start {a_s!r}")
        return a_s, h_s

    def iter_grid(self, a: float, spec: GridSpec, chunk: int = 1 << 20) -> Iterator[Grid]:
        """Yield the grid of ``T ∩ [a, horizon]`` in chunks.

        Consecutive chunks share their boundary point so every step lies
        inside one chunk.
        """
        a_s, h_s = self._bounds(a, spec.horizon)
        i, _ = self.locate(a_s)
        ts: list[np.ndarray] = []
        ms: list[np.ndarray] = []
        size = 0
        done = False
        while not done:
            seg = self._ensure_index(i)
            if isinstance(seg, Point):
                nxt = self._ensure_index(i + 1).left
                ts.append(np.array([seg.t]))
                ms.append(np.array([nxt - seg.t]))
                size += 1
                done = seg.t >= h_s
            else:
                lo, hi = max(a_s, seg.a), min(h_s, seg.b)
                if hi > lo:
                    n = max(1, math.ceil((hi - lo) / spec.h_max - 1e-9))
                    pts = lo + (hi - lo) * (np.arange(n + 1) / n)
                    pts[-1] = hi
                else:
                    pts = np.array([lo])
                mu = np.zeros_like(pts)
                if hi == seg.b:
                    mu[-1] = self._ensure_index(i + 1).left - hi
                ts.append(pts)
                ms.append(mu)
                size += len(pts)
                done = hi >= h_s
            i += 1
            if size >= chunk or done:
                t_arr, mu_arr = np.concatenate(ts), np.concatenate(ms)
                yield Grid(t_arr, mu_arr)
                ts, ms, size = [t_arr[-1:]], [mu_arr[-1:]], 1

    def enumerate_grid(self, a: float, spec: GridSpec) -> Grid:
        return _concat(list(self.iter_grid(a, spec, chunk=1 << 62)))

    def __repr__(self) -> str:
        if self.description is not None:
            return f"TimeScale({self.description!r})"
        return f"TimeScale(head={self._segs[:3]!r}...)"


class Lattice(TimeScale):
    """``{start + k*h : k = 0, 1, ...}`` with closed-form jumps and fast grids."""

    def __init__(self, h: float = 1.0, start: float = 0.0, **kw):
        if not h > 0:
            raise InvalidScale(f"lattice step must be positive, got {h}")
        self.h = float(h)
        self.start = float(start)
        super().__init__((), self._point, **kw)

    def _point(self, k: int) -> Point:
        return Point(self.start + k * self.h)

    def _k(self, t: float) -> int:
        t = float(t)
        if not math.isfinite(t):
            raise NotInScale(t)
        k = round((t - self.start) / self.h)
        if k < 0 or abs(t - (self.start + k * self.h)) > self.epsilon_member:
            raise NotInScale(t)
        return int(k)

    def locate(self, t: float) -> tuple[int, float]:
        k = self._k(t)
        return k, self.start + k * self.h

    def sigma(self, t: float) -> float:
        return self.start + (self._k(t) + 1) * self.h

    def mu(self, t: float) -> float:
        k = self._k(t)
        return (self.start + (k + 1) * self.h) - (self.start + k * self.h)

    def rho(self, t: float) -> float:
        k = self._k(t)
        return self.start + max(k - 1, 0) * self.h

    def floor(self, t: float) -> float:
        if t < self.start - self.epsilon_member:
            raise NotInScale(t, f"no scale point below t={t!r}")
        k = math.floor((t - self.start) / self.h + self.epsilon_member / self.h)
        return self.start + k * self.h

    def segment(self, i: int) -> Segment:
        return self._point(i)

    def mu_array(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        k = np.rint((ts - self.start) / self.h)
        return (self.start + (k + 1) * self.h) - (self.start + k * self.h)

    def iter_grid(self, a: float, spec: GridSpec, chunk: int = 1 << 20) -> Iterator[Grid]:
        if spec.horizon <= a:
            raise EmptyRange(f"horizon {spec.horizon!r} <= start {a!r}")
        k0, k1 = self._k(a), self._k(spec.horizon)
        lo = k0
        while True:
            hi = min(lo + chunk, k1)
            ks = np.arange(lo, hi + 1, dtype=np.float64)
            t = self.start + ks * self.h
            yield Grid(t, (self.start + (ks + 1) * self.h) - t)
            if hi >= k1:
                return
            lo = hi


# -- canonical constructors ---------------------------------------------------


def integers(start: float = 0.0, **kw) -> Lattice:
    """``{start, start+1, ...}``; the discrete scale used throughout."""
    kw.setdefault("description", {"kind": "Z", "start": start})
    return Lattice(1.0, start, **kw)


def lattice(h: float, start: float = 0.0, **kw) -> Lattice:
    kw.setdefault("description", {"kind": "hZ", "h": h, "start": start})
    return Lattice(h, start, **kw)


def geometric(q: float, t0: float = 1.0, **kw) -> TimeScale:
    """The q-scale ``{t0 * q**k : k >= 0}``."""
    if not q > 1 or not t0 > 0:
        raise InvalidScale("q-scale needs q > 1 and t0 > 0")
    kw.setdefault("description", {"kind": "qN", "q": q, "t0": t0})
    return TimeScale((), lambda k: Point(t0 * q**k), **kw)


def reals(a: float = 0.0, **kw) -> TimeScale:
    kw.setdefault("description", {"kind": "R", "a": a})
    return TimeScale((Interval(a, math.inf),), **kw)


def explicit(segments: Iterable[Segment], period: float | None = None, **kw) -> TimeScale:
    """Finite pattern of segments, optionally repeated with the given period.

    Without a period the last segment must be ``[a, inf)``.
    """
    segs = sorted(segments, key=lambda s: s.left)
    if not segs:
        raise InvalidScale("explicit scale needs at least one segment")
    if period is None:
        return TimeScale(segs, **kw)
    if not period > 0:
        raise InvalidScale("period must be positive")
    span = segs[-1].right - segs[0].left
    if not span < period:
        raise InvalidScale("pattern does not fit inside one period")
    m = len(segs)

    def tail(k: int) -> Segment:
        return segs[k % m].shifted(period * (k // m + 1))

    return TimeScale(segs, tail, **kw)


def _parse_segment(rec: Any) -> Segment:
    if not isinstance(rec, dict) or len(rec) != 1:
        raise InvalidScale(f"segment record must be {{'point': t}} or {{'interval': [a, b]}}: {rec!r}")
    if "point" in rec:
        return Point(float(rec["point"]))
    if "interval" in rec:
        a, b = rec["interval"]
        return Interval(float(a), math.inf if b is None else float(b))
    raise InvalidScale(f"unknown segment record {rec!r}")


def from_description(desc: dict[str, Any]) -> TimeScale:
    """Build a scale from its tagged-record description.

    >>> from_description({"kind": "hZ", "h": 0.5}).sigma(1.0)
    1.5
    """
    if not isinstance(desc, dict) or "kind" not in desc:
        raise InvalidScale("scale description needs a 'kind'")
    kind = desc["kind"]
    extra = {k: desc[k] for k in ("epsilon_member", "min_gap") if k in desc}
    norm = dict(desc)
    if kind == "Z":
        return integers(float(desc.get("start", 0.0)), description=norm, **extra)
    if kind == "hZ":
        if "h" not in desc:
            raise InvalidScale("hZ scale needs 'h'")
        return lattice(float(desc["h"]), float(desc.get("start", 0.0)), description=norm, **extra)
    if kind == "qN":
        if "q" not in desc:
            raise InvalidScale("qN scale needs 'q'")
        return geometric(float(desc["q"]), float(desc.get("t0", 1.0)), description=norm, **extra)
    if kind == "R":
        return reals(float(desc.get("a", 0.0)), description=norm, **extra)
    if kind == "explicit":
        segs = desc.get("segments")
        if not isinstance(segs, list) or not segs:
            raise InvalidScale("explicit scale needs a non-empty 'segments' list")
        period = desc.get("period")
        return explicit(
            [_parse_segment(s) for s in segs],
            None if period is None else float(period),
            description=norm,
            **extra,
        )
    raise InvalidScale(f"unknown scale kind {kind!r}")


def doubling_schedule(ts: TimeScale, a: float, k_max: int = 12, step: float = 1.0) -> list[float]:
    """Horizons ``a + 2**k * step`` (k = 0..k_max) snapped down onto the scale."""
    a = ts.snap(a)
    out: list[float] = []
    for k in range(k_max + 1):
        h = ts.floor(a + 2.0**k * step)
        if h > a and (not out or h > out[-1]):
            out.append(h)
    return out
