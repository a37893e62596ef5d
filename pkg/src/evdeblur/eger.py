"""Exposure-guided event representation (EGER).

The parent span is cut into ``N`` equal temporal bins. Every event keeps
its global bin index and is routed to one of three sections by the
partition ``[t_s, t^_s)``, ``[t^_s, t^_e]``, ``(t^_e, t_e]`` around the target
interval. Each section is a ``(2N, H, W)`` count volume laid out as
``[positive bins 0..N-1, negative bins 0..N-1]``; the sections are
concatenated into ``6N`` channels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .core import EventStream, TimeInterval

DEFAULT_BINS = 16


@dataclass(frozen=True, eq=False)
class EgerTensor:
    data: np.ndarray
    n_bins: int
    parent: TimeInterval
    target: TimeInterval

    @property
    def sections(self):
        """``(E1, E2, E3)``, each of shape ``(2N, H, W)``."""
        n2 = 2 * self.n_bins
        return self.data[:n2], self.data[n2:2 * n2], self.data[2 * n2:]

    def section_sum(self) -> np.ndarray:
        e1, e2, e3 = self.sections
        return e1 + e2 + e3


def _bin_index(t, span: TimeInterval, n_bins: int):
    if span.duration == 0:
        return np.zeros(len(t), dtype=np.int64)
    idx = np.floor(n_bins * (t - span.start) / span.duration).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def _accumulate(stream: EventStream, bins, mask, n_bins) -> np.ndarray:
    h, w = stream.height, stream.width
    # negative polarity goes to channels N..2N-1
    channel = bins + n_bins * (stream.p < 0)
    flat = (channel * h + stream.y) * w + stream.x
    counts = np.bincount(flat[mask], minlength=2 * n_bins * h * w)
    return counts.reshape(2 * n_bins, h, w).astype(np.float32)


def _check_bins(n_bins):
    if int(n_bins) != n_bins or n_bins < 1:
        raise errors.ZeroBins(f"n_bins must be a positive integer, got {n_bins}")
    return int(n_bins)


def voxel_grid(stream: EventStream, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Polarity-separated event counts in ``N`` equal bins of the stream span."""
    n_bins = _check_bins(n_bins)
    bins = _bin_index(stream.t, stream.span, n_bins)
    return _accumulate(stream, bins, np.ones(len(stream), dtype=bool), n_bins)


def build_eger(stream: EventStream, target: TimeInterval, n_bins: int = DEFAULT_BINS) -> EgerTensor:
    n_bins = _check_bins(n_bins)
    parent = stream.span
    if not parent.covers(target, tol=0.0):
        raise errors.TargetOutOfSpan(f"target {target} not within parent {parent}")
    t = stream.t
    bins = _bin_index(t, parent, n_bins)
    before = t < target.start
    after = t > target.end
    inside = ~(before | after)
    data = np.concatenate(
        [_accumulate(stream, bins, m, n_bins) for m in (before, inside, after)], axis=0
    )
    return EgerTensor(data, n_bins, parent, target)
