"""Event and frame data model plus the accumulation primitives.

Images are plain ``numpy`` float arrays, shaped ``(H, W)`` for gray or
``(H, W, 3)`` for color, with intensities nominally in ``[0, 1]``.
Event streams are stored column-wise (``t``, ``x``, ``y``, ``p`` arrays).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from . import errors

# BT.601 luma weights, shared by the simulator and the gray metrics.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Slack for precondition checks on real-valued times (not used for slicing).
TIME_TOL = 1e-9


@dataclass(frozen=True)
class TimeInterval:
    start: float
    end: float

    def __post_init__(self):
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "end", float(self.end))
        if not (np.isfinite(self.start) and np.isfinite(self.end)):
            raise errors.DataError(f"non-finite interval {self}")
        if self.start > self.end:
            raise errors.DataError(f"interval start {self.start} > end {self.end}")

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def is_degenerate(self) -> bool:
        return self.start == self.end

    @property
    def mid(self) -> float:
        return 0.5 * (self.start + self.end)

    def contains(self, t: float, tol: float = TIME_TOL) -> bool:
        return self.start - tol <= t <= self.end + tol

    def covers(self, other: "TimeInterval", tol: float = TIME_TOL) -> bool:
        return self.start - tol <= other.start and other.end <= self.end + tol

    def hull(self, other: "TimeInterval") -> "TimeInterval":
        return TimeInterval(min(self.start, other.start), max(self.end, other.end))

    @classmethod
    def parse(cls, text: str) -> "TimeInterval":
        """Parse ``"a:b"``; a single number gives the degenerate ``[a, a]``."""
        parts = text.split(":")
        if len(parts) == 1:
            return cls(float(parts[0]), float(parts[0]))
        if len(parts) != 2:
            raise ValueError(f"expected 'start:end', got {text!r}")
        return cls(float(parts[0]), float(parts[1]))

    def __str__(self):
        return f"{self.start!r}:{self.end!r}"


class Event(NamedTuple):
    t: float
    x: int
    y: int
    p: int


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-sorted events on a ``width x height`` sensor over ``span``.

    Construction does not validate; call :func:`validate_stream` for that
    (so that malformed records can still be represented and reported).
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    width: int
    height: int
    span: TimeInterval = field(default_factory=lambda: TimeInterval(0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "t", _frozen(self.t, np.float64))
        object.__setattr__(self, "x", _frozen(self.x, np.int64))
        object.__setattr__(self, "y", _frozen(self.y, np.int64))
        object.__setattr__(self, "p", _frozen(self.p, np.int8))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise errors.DataError("event columns have unequal lengths")

    @classmethod
    def empty(cls, width, height, span: TimeInterval) -> "EventStream":
        return cls(np.empty(0), np.empty(0), np.empty(0), np.empty(0), width, height, span)

    @classmethod
    def from_events(cls, events, width, height, span: TimeInterval) -> "EventStream":
        events = list(events)
        if not events:
            return cls.empty(width, height, span)
        t, x, y, p = zip(*events)
        return cls(t, x, y, p, width, height, span)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> Event:
        return Event(float(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.span == other.span
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def select(self, mask_or_index, span: TimeInterval) -> "EventStream":
        return EventStream(
            self.t[mask_or_index],
            self.x[mask_or_index],
            self.y[mask_or_index],
            self.p[mask_or_index],
            self.width,
            self.height,
            span,
        )

    def with_span(self, span: TimeInterval) -> "EventStream":
        return EventStream(self.t, self.x, self.y, self.p, self.width, self.height, span)


@dataclass(frozen=True, eq=False)
class BlurryFrame:
    """An image together with the exposure interval that produced it.

    A degenerate exposure is representable (it is what a blur2sharp
    conversion returns) but rejected by operations that need real blur.
    """

    image: np.ndarray
    exposure: TimeInterval

    def __post_init__(self):
        object.__setattr__(self, "image", check_image(self.image))

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape[:2]


def check_image(image, name="image") -> np.ndarray:
    """Return ``image`` as a float64 array, validating shape and finiteness."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[..., 0]
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise errors.DataError(f"{name} must be HxW or HxWx3, got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise errors.DataError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise errors.DataError(f"{name} contains non-finite values")
    return a


def check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise errors.SizeMismatch(f"shape {a.shape} != {b.shape}")


def luminance(image: np.ndarray) -> np.ndarray:
    """BT.601 luma of a color image; gray images pass through."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    return image @ LUMA_WEIGHTS


def validate_stream(stream: EventStream) -> None:
    """Raise the first invariant violation found in ``stream``.

    Checks, in record order: polarity, coordinates, span membership and
    time ordering. An empty stream is always valid.
    """
    t, x, y, p = stream.t, stream.x, stream.y, stream.p
    n = len(t)
    if n == 0:
        return
    bad = np.flatnonzero((p != 1) & (p != -1))
    oob = np.flatnonzero((x < 0) | (y < 0) | (x >= stream.width) | (y >= stream.height))
    outside = np.flatnonzero(~np.isfinite(t) | (t < stream.span.start) | (t > stream.span.end))
    unsorted = np.flatnonzero(np.diff(t) < 0) + 1
    first = []
    for idx, exc in (
        (bad, errors.BadPolarity),
        (oob, errors.OutOfBounds),
        (outside, errors.OutOfSpan),
        (unsorted, errors.Unsorted),
    ):
        if len(idx):
            first.append((int(idx[0]), exc))
    if first:
        index, exc = min(first, key=lambda item: item[0])
        raise exc(index)


def _require_within(stream: EventStream, interval: TimeInterval, exc=errors.IntervalOutOfSpan):
    if not stream.span.covers(interval):
        raise exc(f"interval {interval} not within stream span {stream.span}")


def slice_stream(stream: EventStream, interval: TimeInterval, closed=(True, True)) -> EventStream:
    """Events with timestamps in ``interval``; the result's span is ``interval``.

    ``closed`` selects which ends are inclusive; the default is ``[a, b]``.
    """
    _require_within(stream, interval)
    left = "left" if closed[0] else "right"
    right = "right" if closed[1] else "left"
    i0 = np.searchsorted(stream.t, interval.start, side=left)
    i1 = np.searchsorted(stream.t, interval.end, side=right)
    i1 = max(i0, i1)
    return stream.select(slice(i0, i1), interval)


def accumulate(stream: EventStream, weights=None, mask=None) -> np.ndarray:
    """Per-pixel sum of ``weights`` (default polarity) as an ``H x W`` raster."""
    x, y = stream.x, stream.y
    w = stream.p.astype(np.int64) if weights is None else weights
    if mask is not None:
        x, y, w = x[mask], y[mask], w[mask]
    flat = np.bincount(y * stream.width + x, weights=w, minlength=stream.width * stream.height)
    if np.issubdtype(np.asarray(w).dtype, np.integer):
        flat = np.rint(flat).astype(np.int64)
    return flat.reshape(stream.height, stream.width)


def signed_count_map(stream: EventStream, interval: TimeInterval) -> np.ndarray:
    """Integer raster of summed polarities of the events in ``[a, b]``."""
    sub = slice_stream(stream, interval)
    return accumulate(sub)


def cumulative_counts(stream: EventStream, times) -> np.ndarray:
    """Signed counts of events with timestamp ``<= tau`` for each ``tau`` in ``times``.

    Returns an int64 array of shape ``(len(times), H, W)``. Differences of
    two slices give the signed count over a half-open ``(a, b]`` window.
    """
    times = np.asarray(times, dtype=np.float64).reshape(-1)
    order = np.argsort(times, kind="stable")
    ends = np.searchsorted(stream.t, times[order], side="right")
    npix = stream.width * stream.height
    flat_idx = stream.y * stream.width + stream.x
    p = stream.p.astype(np.int64)
    out = np.empty((len(times), stream.height, stream.width), dtype=np.int64)
    running = np.zeros(npix, dtype=np.int64)
    prev = 0
    for k, end in zip(order, ends):
        if end > prev:
            np.add.at(running, flat_idx[prev:end], p[prev:end])
            prev = end
        out[k] = running.reshape(stream.height, stream.width)
    return out
