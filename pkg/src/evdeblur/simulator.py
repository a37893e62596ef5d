"""Threshold-crossing event simulation and blur synthesis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .core import BlurryFrame, EventStream, TimeInterval, LUMA_WEIGHTS, TIME_TOL, check_image

# Relative slack so that a level reached exactly (up to round-off) still fires.
_REACH_TOL = 1e-9


@dataclass(frozen=True)
class SimulatorConfig:
    c: float = 0.2
    eps: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not self.c > 0:
            raise errors.DataError(f"threshold c must be > 0, got {self.c}")
        if not self.eps > 0:
            raise errors.DataError(f"eps must be > 0, got {self.eps}")


class SharpVideo:
    """Dense sharp frames with strictly increasing timestamps."""

    def __init__(self, frames, timestamps):
        frames = [check_image(f, "frame") for f in frames]
        timestamps = np.array(timestamps, dtype=np.float64).reshape(-1)
        if len(frames) < 2:
            raise errors.DegenerateVideo(f"need at least 2 frames, got {len(frames)}")
        if len(timestamps) != len(frames):
            raise errors.DataError("frame and timestamp counts differ")
        if np.any(np.diff(timestamps) <= 0):
            raise errors.DataError("timestamps must be strictly increasing")
        shape = frames[0].shape
        if any(f.shape != shape for f in frames):
            raise errors.SizeMismatch("frames differ in size")
        self.frames = np.stack(frames)
        self.frames.setflags(write=False)
        self.timestamps = timestamps
        self.timestamps.setflags(write=False)

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def span(self) -> TimeInterval:
        return TimeInterval(self.timestamps[0], self.timestamps[-1])

    def __len__(self):
        return len(self.timestamps)

    def subset(self, start: int, stop: int) -> "SharpVideo":
        return SharpVideo(self.frames[start:stop], self.timestamps[start:stop])

    def map_frames(self, fn) -> "SharpVideo":
        return SharpVideo([fn(f) for f in self.frames], self.timestamps)


def log_intensity(frames, eps):
    """``ln(Y + eps)`` of a frame stack ``(N, H, W)`` or ``(N, H, W, 3)``."""
    frames = np.asarray(frames, dtype=np.float64)
    gray = frames @ LUMA_WEIGHTS if frames.ndim == 4 else frames
    return np.log(gray + eps)


def simulate_events(video: SharpVideo, cfg: SimulatorConfig = SimulatorConfig()) -> EventStream:
    """Emit an event whenever the log-linear interpolant reaches ``L_ref +/- c``.

    Each pixel starts with ``L_ref = ln(I(t0) + eps)``. Crossings are solved
    in closed form per frame gap; every crossing moves ``L_ref`` by ``p * c``.
    The output is sorted by ``(t, y, x, p)``.
    """
    c = cfg.c
    logs = log_intensity(video.frames, cfg.eps)
    h, w = logs.shape[1:]
    ts = video.timestamps
    ref = logs[0].reshape(-1).copy()
    pix = np.arange(h * w)
    chunks_t, chunks_pix, chunks_p = [], [], []
    for k in range(len(ts) - 1):
        l0 = logs[k].reshape(-1)
        l1 = logs[k + 1].reshape(-1)
        delta = l1 - l0
        pos = np.floor((l1 - ref) / c + _REACH_TOL).astype(np.int64)
        neg = np.floor((ref - l1) / c + _REACH_TOL).astype(np.int64)
        n_up = np.where(delta > 0, np.maximum(pos, 0), 0)
        n_dn = np.where(delta < 0, np.maximum(neg, 0), 0)
        for count, sign in ((n_up, 1), (n_dn, -1)):
            total = int(count.sum())
            if total == 0:
                continue
            who = np.repeat(pix, count)
            # crossing index j = 1..count within each pixel's run
            starts = np.cumsum(count) - count
            j = np.arange(total) - np.repeat(starts, count) + 1
            level = ref[who] + sign * j * c
            frac = (level - l0[who]) / delta[who]
            frac = np.clip(frac, 0.0, 1.0)
            chunks_t.append(ts[k] + frac * (ts[k + 1] - ts[k]))
            chunks_pix.append(who)
            chunks_p.append(np.full(total, sign, dtype=np.int8))
        ref += (n_up - n_dn) * c
    if not chunks_t:
        return EventStream.empty(w, h, video.span)
    t = np.concatenate(chunks_t)
    who = np.concatenate(chunks_pix)
    p = np.concatenate(chunks_p)
    x, y = who % w, who // w
    order = np.lexsort((p, x, y, t))
    return EventStream(t[order], x[order], y[order], p[order], w, h, video.span)


def synthesize_blur(video: SharpVideo, interval: TimeInterval) -> BlurryFrame:
    """Linear-intensity mean of the frames whose timestamps lie in ``interval``."""
    ts = video.timestamps
    tol = TIME_TOL * max(1.0, abs(interval.end))
    on_grid = [np.any(np.abs(ts - v) <= tol) for v in (interval.start, interval.end)]
    if not all(on_grid):
        raise errors.IntervalNotOnGrid(f"{interval} endpoints are not frame timestamps")
    inside = (ts >= interval.start - tol) & (ts <= interval.end + tol)
    if inside.sum() < 2:
        raise errors.TooFewFrames(f"{int(inside.sum())} frame(s) in {interval}")
    frames = video.frames[inside]
    # offset from the first frame keeps a constant window exact
    return BlurryFrame(frames[0] + (frames - frames[0]).mean(axis=0), interval)


def blur_window(video: SharpVideo, start: int, count: int) -> BlurryFrame:
    """Blur of ``count`` consecutive frames beginning at index ``start``."""
    if count < 2 or start < 0 or start + count > len(video):
        raise errors.TooFewFrames(f"window [{start}, {start + count}) invalid for {len(video)} frames")
    ts = video.timestamps
    return synthesize_blur(video, TimeInterval(ts[start], ts[start + count - 1]))


def extend_blur(adjacent, max_gap_fraction: float = 0.5) -> BlurryFrame:
    """Average ``M >= 2`` adjacent blurry frames into one longer exposure.

    Exposures must be in order, of equal length, and separated by a uniform
    gap of at most ``max_gap_fraction`` of their length (frame-aligned
    windows leave a one-frame gap between the last and first sample).
    """
    frames = list(adjacent)
    if len(frames) < 2:
        raise errors.TooFewFrames("extend_blur needs at least two frames")
    shape = frames[0].image.shape
    if any(f.image.shape != shape for f in frames):
        raise errors.SizeMismatch("frames differ in size")
    length = frames[0].exposure.duration
    tol = TIME_TOL * max(1.0, abs(frames[-1].exposure.end))
    gaps = []
    for a, b in zip(frames, frames[1:]):
        if abs(b.exposure.duration - length) > tol:
            raise errors.NonContiguousExposures("exposures differ in length")
        gaps.append(b.exposure.start - a.exposure.end)
    gaps = np.array(gaps)
    if np.any(gaps < -tol) or np.any(gaps > max_gap_fraction * length + tol) or np.ptp(gaps) > tol:
        raise errors.NonContiguousExposures(f"exposure gaps {gaps.tolist()} are not contiguous")
    image = np.mean([f.image for f in frames], axis=0)
    return BlurryFrame(image, TimeInterval(frames[0].exposure.start, frames[-1].exposure.end))


def downsample(image: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping ``factor x factor`` box average."""
    image = np.asarray(image, dtype=np.float64)
    factor = int(factor)
    if factor < 1:
        raise errors.NotDivisible(f"factor must be a positive integer, got {factor}")
    h, w = image.shape[:2]
    if h % factor or w % factor:
        raise errors.NotDivisible(f"{w}x{h} not divisible by {factor}")
    if factor == 1:
        return image.copy()
    shaped = image.reshape(h // factor, factor, w // factor, factor, *image.shape[2:])
    return shaped.mean(axis=(1, 3))


def downsample_video(video: SharpVideo, factor: int) -> SharpVideo:
    return video.map_frames(lambda f: downsample(f, factor))
