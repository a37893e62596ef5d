"""Analytic synthetic scenes for tests, the dataset demo and ``check``.

Frames are rendered from a continuous model at each timestamp, so a scene
can be sampled at any resolution and any frame rate without resampling.
"""
from __future__ import annotations

import numpy as np

from .simulator import SharpVideo, downsample


def moving_blobs(
    width: int = 64,
    height: int = 64,
    n_frames: int = 200,
    *,
    seed: int = 0,
    n_blobs: int = 6,
    sigma: float = 0.12,
    speed: float = 0.6,
    lo: float = 0.15,
    hi: float = 0.85,
    duration: float = 1.0,
    color: bool = False,
    supersample: int = 1,
) -> SharpVideo:
    """Gaussian blobs drifting over a smooth background.

    ``sigma`` and ``speed`` are in units of the frame width (per unit time).
    With ``supersample > 1`` each frame is rendered on a finer grid and box
    averaged, so that downsampling an HR render matches an LR render.
    """
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.15, 0.85, size=(n_blobs, 2))
    angles = rng.uniform(0, 2 * np.pi, size=n_blobs)
    velocity = speed * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    amps = rng.uniform(0.5, 1.0, size=n_blobs) * rng.choice([-1, 1], size=n_blobs)
    widths = sigma * rng.uniform(0.7, 1.3, size=n_blobs)
    tint = rng.uniform(0.6, 1.0, size=(n_blobs, 3))
    aspect = height / width

    ss = supersample
    ys = (np.arange(height * ss) + 0.5) / (width * ss)
    xs = (np.arange(width * ss) + 0.5) / (width * ss)
    X, Y = np.meshgrid(xs, ys)
    base = 0.5 + 0.15 * np.sin(2 * np.pi * (X * 1.3 + Y * 0.7))

    times = np.linspace(0.0, duration, n_frames)
    frames = []
    for t in times:
        pos = centers + velocity * t
        z = np.zeros_like(X) if not color else np.zeros(X.shape + (3,))
        for k in range(n_blobs):
            cx, cy = pos[k, 0], pos[k, 1] * aspect
            g = amps[k] * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * widths[k] ** 2))
            z = z + (g[..., None] * tint[k] if color else g)
        val = (base[..., None] if color else base) + 0.35 * z
        img = lo + (hi - lo) * np.clip(val, 0.0, 1.0)
        frames.append(downsample(img, ss) if ss > 1 else img)
    return SharpVideo(frames, times)


def constant_video(width=16, height=16, n_frames=10, value=0.5, duration=1.0) -> SharpVideo:
    frames = [np.full((height, width), value)] * n_frames
    return SharpVideo(frames, np.linspace(0.0, duration, n_frames))


def single_pixel_ramp(values, times) -> SharpVideo:
    """A 1x1 video with the given intensity keyframes."""
    return SharpVideo([np.full((1, 1), v) for v in values], times)


def drifting_texture(
    width: int = 64,
    height: int = 64,
    n_frames: int = 200,
    *,
    seed: int = 0,
    n_waves: int = 4,
    frequency: float = 2.0,
    velocity=(0.5, 0.2),
    lo: float = 0.05,
    hi: float = 0.95,
    duration: float = 1.0,
    color: bool = False,
) -> SharpVideo:
    """A smooth periodic texture translating at constant ``velocity``.

    ``frequency`` is in cycles per frame width; ``velocity`` in frame widths
    per unit time. Rendering is analytic, so any grid samples the same field.
    """
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0, np.pi, size=n_waves)
    freqs = frequency * rng.uniform(0.6, 1.4, size=n_waves)
    phases = rng.uniform(0, 2 * np.pi, size=n_waves)
    tint = rng.uniform(0.7, 1.0, size=(n_waves, 3))
    kx, ky = freqs * np.cos(angles), freqs * np.sin(angles)
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / width
    X, Y = np.meshgrid(xs, ys)
    times = np.linspace(0.0, duration, n_frames)
    frames = []
    for t in times:
        u, v = X - velocity[0] * t, Y - velocity[1] * t
        waves = [np.sin(2 * np.pi * (kx[k] * u + ky[k] * v) + phases[k]) for k in range(n_waves)]
        if color:
            z = sum(w[..., None] * tint[k] for k, w in enumerate(waves)) / np.sqrt(n_waves)
        else:
            z = sum(waves) / np.sqrt(n_waves)
        frames.append(lo + (hi - lo) * 0.5 * (1 + np.tanh(1.5 * z)))
    return SharpVideo(frames, times)
