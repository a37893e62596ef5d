"""Closed-form EDI engine.

The double integral is discretized with the midpoint rule. Intensities are
treated in the same offset log domain as the simulator, ``ln(I + eps)``,
so a latent frame is recovered as ``(B + eps) / E - eps``; with
``eps = 0`` this is the plain ``B / E`` relation.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import errors
from .core import (
    TIME_TOL,
    BlurryFrame,
    EventStream,
    TimeInterval,
    cumulative_counts,
    slice_stream,
)


@dataclass(frozen=True)
class EdiConfig:
    c: float = 0.2
    eps: float = 0.01
    n_samples: int = 49
    ratio_floor: float = 1e-6

    def __post_init__(self):
        if not self.c > 0:
            raise errors.DataError(f"c must be > 0, got {self.c}")
        if not self.eps >= 0:
            raise errors.DataError(f"eps must be >= 0, got {self.eps}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise errors.DataError(f"n_samples must be a positive integer, got {self.n_samples}")
        if not self.ratio_floor > 0:
            raise errors.DataError(f"ratio_floor must be > 0, got {self.ratio_floor}")


@dataclass(frozen=True, eq=False)
class IntegralMap:
    values: np.ndarray
    t: float
    interval: TimeInterval

    @property
    def shape(self):
        return self.values.shape


def sample_times(interval: TimeInterval, n_samples: int) -> np.ndarray:
    """Midpoint-rule nodes ``start + (j + 0.5) * T / n``."""
    j = np.arange(n_samples)
    return interval.start + (j + 0.5) * (interval.duration / n_samples)


def compute_integral_map(
    stream: EventStream, t: float, interval: TimeInterval, cfg: EdiConfig
) -> IntegralMap:
    """Per-pixel ``mean_j exp(c * S(t, f_j))`` over midpoint nodes ``f_j``.

    ``S(t, f)`` is the signed event count in ``(t, f]`` (negated for
    ``f < t``). A degenerate interval ``[t, t]`` yields exactly ones.
    """
    if not stream.span.contains(t):
        raise errors.AnchorOutOfSpan(f"anchor {t} outside span {stream.span}")
    if not stream.span.covers(interval):
        raise errors.IntervalOutOfSpan(f"{interval} outside span {stream.span}")
    shape = stream.shape
    if interval.is_degenerate:
        if interval.start == t or len(stream) == 0:
            return IntegralMap(np.ones(shape), float(t), interval)
        nodes = np.array([interval.start])
    else:
        nodes = sample_times(interval, cfg.n_samples)
    counts = cumulative_counts(stream, np.concatenate(([t], nodes)))
    anchor = counts[0]
    acc = np.zeros(shape)
    for j in range(len(nodes)):
        acc += np.exp(cfg.c * (counts[j + 1] - anchor))
    return IntegralMap(acc / len(nodes), float(t), interval)


def _guard(values, floor):
    return np.maximum(values, floor)


def _divide(image, values, cfg: EdiConfig):
    denom = _guard(values, cfg.ratio_floor)
    if image.ndim == 3:
        denom = denom[..., None]
    # (B + eps) / E - eps, written so that E == 1 returns B bit-for-bit
    return image + (image + cfg.eps) * (1.0 / denom - 1.0)


def _scale(image, ratio, cfg: EdiConfig):
    if image.ndim == 3:
        ratio = ratio[..., None]
    return image + (ratio - 1.0) * (image + cfg.eps)


def _check_anchor(blur: BlurryFrame, t: float):
    if not blur.exposure.contains(t):
        raise errors.AnchorOutOfExposure(f"anchor {t} outside exposure {blur.exposure}")


def _check_coverage(blur: BlurryFrame, stream: EventStream):
    if not stream.span.covers(blur.exposure):
        raise errors.IntervalOutOfSpan(
            f"stream span {stream.span} does not cover exposure {blur.exposure}"
        )


def deblur(blur: BlurryFrame, stream: EventStream, t: float, cfg: EdiConfig) -> np.ndarray:
    """Latent image at ``t`` from a blurry frame and same-resolution events."""
    if blur.shape != stream.shape:
        raise errors.ResolutionMismatch(
            f"frame {blur.shape} vs events {stream.shape}; use deblur_multiscale"
        )
    _check_anchor(blur, t)
    _check_coverage(blur, stream)
    emap = compute_integral_map(stream, t, blur.exposure, cfg)
    return _divide(blur.image, emap.values, cfg)


def _bilinear_axis(n_src: int, n_dst: int):
    """Source indices and weights for half-pixel-center resampling."""
    pos = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    pos = np.clip(pos, 0.0, n_src - 1)
    i0 = np.floor(pos).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, pos - i0


def upsample_integral_map(emap: IntegralMap, target_width: int, target_height: int) -> IntegralMap:
    """Bilinear upsampling with pixel centers at ``(i + 0.5) / n`` and edge clamping."""
    h, w = emap.shape
    if target_width < w or target_height < h:
        raise errors.Downscale(f"target {target_width}x{target_height} smaller than {w}x{h}")
    if (target_width, target_height) == (w, h):
        return IntegralMap(emap.values.copy(), emap.t, emap.interval)
    y0, y1, wy = _bilinear_axis(h, target_height)
    x0, x1, wx = _bilinear_axis(w, target_width)
    v = emap.values
    rows = v[y0] * (1 - wy)[:, None] + v[y1] * wy[:, None]
    out = rows[:, x0] * (1 - wx)[None, :] + rows[:, x1] * wx[None, :]
    return IntegralMap(out, emap.t, emap.interval)


def spatial_ratio(frame_shape, event_shape) -> float:
    """Frame-to-event resolution ratio; both axes must agree."""
    (fh, fw), (eh, ew) = frame_shape[:2], event_shape[:2]
    rw, rh = fw / ew, fh / eh
    if not math.isclose(rw, rh, rel_tol=1e-9):
        raise errors.AspectMismatch(f"width ratio {rw} != height ratio {rh}")
    if rw < 1:
        raise errors.AspectMismatch(f"frame smaller than event sensor (R={rw})")
    return rw


def _upsampled(stream, t, interval, cfg, shape):
    emap = compute_integral_map(stream, t, interval, cfg)
    return upsample_integral_map(emap, shape[1], shape[0]).values


def deblur_multiscale(blur: BlurryFrame, stream: EventStream, t: float, cfg: EdiConfig) -> np.ndarray:
    """EDI with low-resolution events: the integral map is upsampled to the frame grid."""
    ratio = spatial_ratio(blur.shape, stream.shape)
    if blur.shape == stream.shape:
        return deblur(blur, stream, t, cfg)
    _check_anchor(blur, t)
    _check_coverage(blur, stream)
    return _divide(blur.image, _upsampled(stream, t, blur.exposure, cfg, blur.shape), cfg)


def blur2blur(
    blur: BlurryFrame, stream: EventStream, t: float, target: TimeInterval, cfg: EdiConfig
) -> BlurryFrame:
    """Re-express ``blur`` over the nested exposure ``target``.

    ``target == blur.exposure`` returns the input image unchanged and a
    degenerate target returns the latent image from :func:`deblur_multiscale`.
    """
    if not blur.exposure.covers(target):
        raise errors.TargetNotNested(f"target {target} not within exposure {blur.exposure}")
    if not target.contains(t):
        raise errors.AnchorOutOfTarget(f"anchor {t} outside target {target}")
    spatial_ratio(blur.shape, stream.shape)
    if target == blur.exposure:
        return BlurryFrame(blur.image.copy(), target)
    if target.is_degenerate:
        return BlurryFrame(deblur_multiscale(blur, stream, target.start, cfg), target)
    _check_coverage(blur, stream)
    num = _upsampled(stream, t, target, cfg, blur.shape)
    den = _upsampled(stream, t, blur.exposure, cfg, blur.shape)
    return BlurryFrame(_scale(blur.image, num / _guard(den, cfg.ratio_floor), cfg), target)


def reblur(latents, exposure: TimeInterval) -> BlurryFrame:
    latents = [np.asarray(l, dtype=np.float64) for l in latents]
    if len(latents) < 2:
        raise errors.TooFewLatents(f"need at least 2 latents, got {len(latents)}")
    if any(l.shape != latents[0].shape for l in latents):
        raise errors.SizeMismatch("latents differ in size")
    return BlurryFrame(np.mean(latents, axis=0), exposure)


def latent_sequence(blur: BlurryFrame, stream: EventStream, times, cfg: EdiConfig):
    """Latent images of ``blur`` at each anchor in ``times``."""
    return [deblur_multiscale(blur, stream, float(t), cfg) for t in times]


# ------------------------------------------------------------ calibration

INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section(f, a, b, rel_tol=1e-3):
    """Minimize a unimodal ``f`` on ``[a, b]``; stop once ``b - a <= rel_tol * |x|``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * max(abs(c), abs(d), 1e-12):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


@dataclass(frozen=True)
class Calibration:
    c: float
    residual: float
    flat: bool
    grid: np.ndarray
    residuals: np.ndarray


def reblur_residual(blur: BlurryFrame, stream: EventStream, cfg: EdiConfig) -> float:
    """``mean |B - reblur(latents at the midpoint nodes)|`` for one frame."""
    nodes = sample_times(blur.exposure, cfg.n_samples)
    latents = latent_sequence(blur, stream, nodes, cfg)
    if len(latents) == 1:
        latents = latents * 2
    return float(np.mean(np.abs(blur.image - reblur(latents, blur.exposure).image)))


def brightness_residual(blurs, stream: EventStream, cfg: EdiConfig) -> float:
    """Mean ``|B_k - blur2blur(mean(B) -> exposure_k)|`` over adjacent frames ``B_k``."""
    from .simulator import extend_blur

    longer = extend_blur(blurs)
    sub = slice_stream(stream, longer.exposure)
    total = 0.0
    for b in blurs:
        est = blur2blur(longer, sub, b.exposure.mid, b.exposure, cfg)
        total += float(np.mean(np.abs(b.image - est.image)))
    return total / len(blurs)


def calibrate_threshold(
    blur,
    stream: EventStream,
    c_min: float,
    c_max: float,
    grid: int,
    cfg_template: EdiConfig = EdiConfig(),
) -> Calibration:
    """Grid search then one golden-section pass for the event threshold.

    ``blur`` is either a single :class:`BlurryFrame` or a sequence of
    adjacent ones. With a sequence, the objective is the brightness
    residual of converting their average back to each member. With a
    single frame only the reblur residual is available; it is identically
    zero for EDI latents (they reblur exactly to the input for any ``c``),
    so the result is flagged flat.
    """
    if not (0 < c_min < c_max):
        raise errors.DataError(f"need 0 < c_min < c_max, got {c_min}, {c_max}")
    if grid < 3:
        raise errors.DataError(f"grid must be >= 3, got {grid}")
    if isinstance(blur, BlurryFrame):
        def objective(c):
            return reblur_residual(blur, stream, replace(cfg_template, c=c))
    else:
        blurs = list(blur)

        def objective(c):
            return brightness_residual(blurs, stream, replace(cfg_template, c=c))

    cs = np.linspace(c_min, c_max, grid)
    rs = np.array([objective(c) for c in cs])
    spread = float(rs.max() - rs.min())
    if len(stream) == 0 or spread <= 1e-9 * max(1.0, float(rs.max())):
        warnings.warn("calibration residual is flat in c; returning c_min", RuntimeWarning)
        return Calibration(float(c_min), float(rs[0]), True, cs, rs)
    i = int(np.argmin(rs))
    lo, hi = cs[max(i - 1, 0)], cs[min(i + 1, grid - 1)]
    c_best, r_best = golden_section(objective, lo, hi, rel_tol=1e-3)
    if rs[i] < r_best:
        c_best, r_best = cs[i], rs[i]
    return Calibration(float(c_best), float(r_best), False, cs, rs)
