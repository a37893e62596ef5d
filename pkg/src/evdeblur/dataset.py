"""Synthetic multi-scale dataset generation and loading.

Layout under the dataset root::

    manifest.txt
    hr_blur/  lr_blur/  hr_blur_ext/  lr_blur_ext/  events/  gt/

``manifest.txt`` holds one ``key=value`` block per sample, blocks separated
by blank lines; paths are relative to the manifest's directory.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import errors, io
from .core import BlurryFrame, EventStream, TimeInterval, slice_stream, validate_stream
from .consistency import TrainingPair
from .metrics import eval_indices
from .simulator import (
    SharpVideo,
    SimulatorConfig,
    blur_window,
    downsample_video,
    extend_blur,
    simulate_events,
)

SUBDIRS = ("hr_blur", "lr_blur", "hr_blur_ext", "lr_blur_ext", "events", "gt")


@dataclass(frozen=True)
class DatasetRecipe:
    hr_size: tuple = (64, 64)
    spatial_ratio: int = 4
    frames_per_blur: int = 49
    temporal_scale: int = 2
    c: float = 0.2
    eps: float = 0.01
    seed: int = 0
    latent_fps: float | None = None
    eval_count: int = 7

    def __post_init__(self):
        w, h = self.hr_size
        r = self.spatial_ratio
        if r < 1 or w % r or h % r:
            raise errors.NotDivisible(f"HR size {w}x{h} not divisible by R={r}")
        s = self.frames_per_blur
        if s < 3 or s % 2 == 0:
            raise errors.DataError(f"frames_per_blur must be odd and >= 3, got {s}")
        if self.temporal_scale < 1:
            raise errors.DataError(f"temporal_scale must be >= 1, got {self.temporal_scale}")
        SimulatorConfig(self.c, self.eps, self.seed)

    @property
    def lr_size(self):
        return (self.hr_size[0] // self.spatial_ratio, self.hr_size[1] // self.spatial_ratio)

    @property
    def window(self) -> int:
        return self.frames_per_blur * self.temporal_scale


@dataclass
class SampleManifest:
    fields: dict = field(default_factory=dict)
    root: Path = Path(".")

    @property
    def id(self) -> str:
        return self.fields["id"]

    def path(self, key, index=None) -> Path:
        value = self.fields[key]
        if index is not None:
            value = value.split(",")[index]
        return self.root / value

    def paths(self, key) -> list[Path]:
        value = self.fields[key]
        return [self.root / v for v in value.split(",")] if value else []

    def intervals(self, key) -> list[TimeInterval]:
        return [TimeInterval.parse(v) for v in self.fields[key].split(",")]

    def floats(self, key) -> list[float]:
        value = self.fields[key]
        return [float(v) for v in value.split(",")] if value else []

    def text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.fields.items())


def center_crop(image: np.ndarray, size) -> np.ndarray:
    w, h = size
    H, W = image.shape[:2]
    if w > W or h > H:
        raise errors.NotDivisible(f"cannot crop {W}x{H} to {w}x{h}")
    y0, x0 = (H - h) // 2, (W - w) // 2
    return image[y0:y0 + h, x0:x0 + w]


def _interval_list(intervals) -> str:
    return ",".join(str(i) for i in intervals)


def _write_frame(root: Path, rel: str, frame: BlurryFrame) -> str:
    io.write_blurry_frame(root / rel, frame)
    return rel


def generate(video: SharpVideo, recipe: DatasetRecipe, root) -> list[SampleManifest]:
    """Write the dataset tree for ``video`` under ``root`` and return the manifests."""
    root = Path(root)
    hr = video.map_frames(lambda f: center_crop(f, recipe.hr_size))
    n_windows = len(hr) // recipe.window
    if n_windows == 0:
        raise errors.VideoTooShort(f"{len(hr)} frames < one window of {recipe.window}")
    lr = downsample_video(hr, recipe.spatial_ratio)
    stream = simulate_events(lr, SimulatorConfig(recipe.c, recipe.eps, recipe.seed))
    ts = hr.timestamps
    fps = recipe.latent_fps or float(1.0 / np.median(np.diff(ts)))
    ext = ".ppm" if hr.frames.ndim == 4 else ".pgm"
    for d in SUBDIRS:
        (root / d).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(recipe.seed)
    eval_idx = eval_indices(recipe.frames_per_blur, recipe.eval_count)
    manifests = []
    for i in range(n_windows):
        sid = f"{i:06d}"
        base = i * recipe.window
        hr_parts = [blur_window(hr, base + m * recipe.frames_per_blur, recipe.frames_per_blur)
                    for m in range(recipe.temporal_scale)]
        lr_parts = [blur_window(lr, base + m * recipe.frames_per_blur, recipe.frames_per_blur)
                    for m in range(recipe.temporal_scale)]
        hr_ext = extend_blur(hr_parts) if len(hr_parts) > 1 else hr_parts[0]
        lr_ext = extend_blur(lr_parts) if len(lr_parts) > 1 else lr_parts[0]
        sub = slice_stream(stream, hr_ext.exposure)
        io.write_events(root / "events" / f"{sid}.evt", sub)
        gt_rel, gt_times = [], []
        for k, j in enumerate(eval_idx):
            rel = f"gt/{sid}_{k:02d}{ext}"
            io.write_pnm(root / rel, hr.frames[base + j])
            gt_rel.append(rel)
            gt_times.append(repr(float(ts[base + j])))
        anchor = float(ts[base + int(rng.integers(0, recipe.frames_per_blur))])
        fields = {
            "id": sid,
            "r_label": str(recipe.spatial_ratio),
            "temporal_scale": str(recipe.temporal_scale),
            "frames_per_blur": str(recipe.frames_per_blur),
            "latent_fps": repr(fps),
            "c": repr(float(recipe.c)),
            "eps": repr(float(recipe.eps)),
            "seed": str(recipe.seed),
            "hr_size": f"{recipe.hr_size[0]}x{recipe.hr_size[1]}",
            "lr_size": f"{recipe.lr_size[0]}x{recipe.lr_size[1]}",
            "exposures": _interval_list(p.exposure for p in hr_parts),
            "exposure_ext": str(hr_ext.exposure),
            "hr_blur": ",".join(_write_frame(root, f"hr_blur/{sid}_m{m}{ext}", p)
                                for m, p in enumerate(hr_parts)),
            "lr_blur": ",".join(_write_frame(root, f"lr_blur/{sid}_m{m}{ext}", p)
                                for m, p in enumerate(lr_parts)),
            "hr_blur_ext": _write_frame(root, f"hr_blur_ext/{sid}{ext}", hr_ext),
            "lr_blur_ext": _write_frame(root, f"lr_blur_ext/{sid}{ext}", lr_ext),
            "events": f"events/{sid}.evt",
            "events_span": str(sub.span),
            "event_count": str(len(sub)),
            "anchor": repr(anchor),
            "gt": ",".join(gt_rel),
            "gt_times": ",".join(gt_times),
        }
        manifests.append(SampleManifest(fields, root))
    (root / "manifest.txt").write_text("\n".join(m.text() for m in manifests))
    return manifests


def read_manifest(path) -> list[SampleManifest]:
    path = Path(path)
    if not path.exists():
        raise errors.MissingFile(str(path))
    out = []
    for block in path.read_text().split("\n\n"):
        fields = {}
        for line in block.splitlines():
            if not line.strip():
                continue
            if "=" not in line:
                raise errors.FormatError(f"{path}: bad manifest line {line!r}")
            k, v = line.split("=", 1)
            fields[k.strip()] = v.strip()
        if fields:
            out.append(SampleManifest(fields, path.parent))
    return out


@dataclass(frozen=True, eq=False)
class LoadedSample:
    manifest: SampleManifest
    pair: TrainingPair
    pair_lr: TrainingPair
    parts: list
    parts_lr: list
    gt: list
    gt_times: list


def _require(cond, message):
    if not cond:
        raise errors.InvariantViolation(message)


def _size(text):
    w, h = text.split("x")
    return int(w), int(h)


def _load_frame(path: Path, exposure: TimeInterval) -> BlurryFrame:
    if not path.exists():
        raise errors.MissingFile(str(path))
    frame = io.read_blurry_frame(path)
    _require(
        np.isclose(frame.exposure.start, exposure.start) and np.isclose(frame.exposure.end, exposure.end),
        f"{path.name}: exposure {frame.exposure} disagrees with manifest {exposure}",
    )
    return BlurryFrame(frame.image, exposure)


def load_sample(m: SampleManifest) -> LoadedSample:
    try:
        exposures = m.intervals("exposures")
        ext = TimeInterval.parse(m.fields["exposure_ext"])
        span = TimeInterval.parse(m.fields["events_span"])
        anchor = float(m.fields["anchor"])
        r = int(m.fields["r_label"])
        hr_size, lr_size = _size(m.fields["hr_size"]), _size(m.fields["lr_size"])
        gt_times = m.floats("gt_times")
        n_events = int(m.fields["event_count"])
    except KeyError as exc:
        raise errors.FormatError(f"manifest sample missing key {exc}") from exc
    except (ValueError, errors.DataError) as exc:
        raise errors.InvariantViolation(f"manifest sample {m.fields.get('id')}: {exc}") from exc

    _require(all(not e.is_degenerate for e in exposures), "degenerate blur exposure")
    _require(int(m.fields["temporal_scale"]) == len(exposures), "temporal_scale != number of exposures")
    _require(ext.start == exposures[0].start and ext.end == exposures[-1].end,
             f"extended exposure {ext} is not the union of {exposures}")
    _require(span.covers(ext), f"event span {span} does not cover {ext}")
    _require(hr_size == (lr_size[0] * r, lr_size[1] * r), "R label inconsistent with sizes")
    _require(exposures[0].contains(anchor), "anchor outside the first exposure")
    _require(all(exposures[0].contains(t) for t in gt_times), "ground-truth time outside exposure")

    hr_parts = [_load_frame(p, e) for p, e in zip(m.paths("hr_blur"), exposures)]
    lr_parts = [_load_frame(p, e) for p, e in zip(m.paths("lr_blur"), exposures)]
    _require(len(hr_parts) == len(exposures) == len(lr_parts), "blur count mismatch")
    hr_ext = _load_frame(m.path("hr_blur_ext"), ext)
    lr_ext = _load_frame(m.path("lr_blur_ext"), ext)
    try:
        if len(exposures) > 1:
            extend_blur(hr_parts)
    except errors.DataError as exc:
        raise errors.InvariantViolation(str(exc)) from exc
    _require(hr_ext.shape == (hr_size[1], hr_size[0]), "HR blur size mismatch")
    _require(lr_ext.shape == (lr_size[1], lr_size[0]), "LR blur size mismatch")

    ev_path = m.path("events")
    stream = io.read_events(ev_path, span=span)
    _require(len(stream) == n_events, "event count mismatch")
    _require(stream.shape == (lr_size[1], lr_size[0]), "event sensor size mismatch")
    try:
        validate_stream(stream)
    except errors.StreamError as exc:
        raise errors.InvariantViolation(f"{ev_path.name}: {exc}") from exc

    gt_paths = m.paths("gt")
    _require(len(gt_paths) == len(gt_times), "ground-truth count mismatch")
    gt = []
    for p in gt_paths:
        if not p.exists():
            raise errors.MissingFile(str(p))
        gt.append(io.read_pnm(p))
    pair = TrainingPair(hr_parts[0], hr_ext, stream, anchor, m.id)
    pair_lr = TrainingPair(lr_parts[0], lr_ext, stream, anchor, m.id)
    return LoadedSample(m, pair, pair_lr, hr_parts, lr_parts, gt, gt_times)


def load(manifest_path, sample: int | str = 0) -> LoadedSample:
    """Materialize one sample (by position or id) with all invariants checked."""
    manifests = read_manifest(manifest_path)
    if isinstance(sample, str):
        matches = [m for m in manifests if m.id == sample]
        if not matches:
            raise errors.DataError(f"no sample {sample!r} in {manifest_path}")
        return load_sample(matches[0])
    return load_sample(manifests[sample])


def load_all(manifest_path) -> list[LoadedSample]:
    return [load_sample(m) for m in read_manifest(manifest_path)]
