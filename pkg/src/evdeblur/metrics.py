"""PSNR / SSIM on color and gray versions of restored sequences."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import errors
from .core import check_image, check_same_shape, luminance

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a, b) -> float:
    a, b = check_image(a), check_image(b)
    check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable correlation keeping only windows fully inside the image."""
    k = len(g)
    h, w = img.shape
    rows = sum(g[i] * img[i:h - k + 1 + i, :] for i in range(k))
    return sum(g[j] * rows[:, j:w - k + 1 + j] for j in range(k))


def _ssim_channel(a, b, g, data_range=1.0) -> float:
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), valid region only.

    Color images average the per-channel values.
    """
    a, b = check_image(a), check_image(b)
    check_same_shape(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise errors.TooSmall(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}")
    g = gaussian_window()
    if a.ndim == 2:
        return _ssim_channel(a, b, g)
    return float(np.mean([_ssim_channel(a[..., k], b[..., k], g) for k in range(a.shape[2])]))


def to_gray(image) -> np.ndarray:
    return luminance(check_image(image))


@dataclass
class QualityReport:
    psnr_color: float
    ssim_color: float
    psnr_gray: float
    ssim_gray: float
    per_frame: list = field(default_factory=list)

    def as_row(self):
        return [self.psnr_color, self.ssim_color, self.psnr_gray, self.ssim_gray]


def frame_metrics(restored, truth) -> tuple[float, float, float, float]:
    restored = np.clip(check_image(restored), 0.0, 1.0)
    truth = check_image(truth)
    gr, gt = to_gray(restored), to_gray(truth)
    return psnr(restored, truth), ssim(restored, truth), psnr(gr, gt), ssim(gr, gt)


def eval_sequence(restored, truth) -> QualityReport:
    """Per-frame and mean color/gray PSNR and SSIM.

    Restored frames are clamped to ``[0, 1]`` first, as they would be on save.
    """
    restored, truth = list(restored), list(truth)
    if len(restored) != len(truth):
        raise errors.LengthMismatch(f"{len(restored)} restored vs {len(truth)} ground-truth frames")
    if not restored:
        raise errors.LengthMismatch("empty sequence")
    per_frame = [frame_metrics(r, t) for r, t in zip(restored, truth)]
    means = np.mean(np.array(per_frame), axis=0)
    return QualityReport(*(float(m) for m in means), per_frame=per_frame)


def eval_indices(frames_per_blur: int = 49, count: int = 7) -> list[int]:
    """Evenly spaced latent indices including both ends, e.g. 0, 8, ..., 48."""
    count = min(count, frames_per_blur)
    return [int(round(v)) for v in np.linspace(0, frames_per_blur - 1, count)]
