"""Property suite run by ``evdeblur check``.

Each check builds or reuses a small synthetic scene and returns a
:class:`CheckResult`. The oracles here (event replay, scene discretization
error) read only the ground-truth video, never the EDI code path.
"""
from __future__ import annotations

import tempfile
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import io
from .consistency import (
    STAGE1,
    STAGE2,
    EdiOperator,
    TrainingPair,
    bc_bound,
    loss_bc,
    loss_sc,
    loss_sg,
    loss_tg,
    sc_bound,
    tg_bound,
    total_loss,
)
from .core import (
    BlurryFrame,
    EventStream,
    TimeInterval,
    accumulate,
    cumulative_counts,
    signed_count_map,
    slice_stream,
    validate_stream,
)
from .dataset import load_all
from .edi import (
    EdiConfig,
    blur2blur,
    compute_integral_map,
    deblur,
    deblur_multiscale,
    sample_times,
)
from .eger import build_eger, voxel_grid
from .metrics import psnr, ssim
from .scenes import drifting_texture
from .simulator import (
    SharpVideo,
    SimulatorConfig,
    blur_window,
    downsample,
    downsample_video,
    extend_blur,
    log_intensity,
    simulate_events,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}" + (f" ({self.detail})" if self.detail else "")


# ------------------------------------------------------------------ oracles

def replay_residual(video: SharpVideo, stream: EventStream, eps: float, c: float) -> np.ndarray:
    """Max over frames of ``|L(t_k) - L_ref(t_k)|`` per pixel, by replaying events."""
    logs = log_intensity(video.frames, eps)
    ref = logs[0].copy()
    worst = np.zeros_like(ref)
    order = np.argsort(stream.t, kind="stable")
    t, x, y, p = stream.t[order], stream.x[order], stream.y[order], stream.p[order]
    i = 0
    for k, tk in enumerate(video.timestamps):
        while i < len(t) and t[i] <= tk:
            ref[y[i], x[i]] += p[i] * c
            i += 1
        worst = np.maximum(worst, np.abs(logs[k] - ref))
    return worst


def log_at(video: SharpVideo, times, eps: float) -> np.ndarray:
    """Log-linear interpolation of the video's log intensity at ``times``."""
    logs = log_intensity(video.frames, eps)
    ts = video.timestamps
    out = []
    for f in np.atleast_1d(times):
        k = int(np.clip(np.searchsorted(ts, f, side="right") - 1, 0, len(ts) - 2))
        a = (f - ts[k]) / (ts[k + 1] - ts[k])
        out.append((1 - a) * logs[k] + a * logs[k + 1])
    return np.array(out)


def discretization_error(video: SharpVideo, exposure: TimeInterval, t: float, n_samples: int, eps: float):
    """Per-pixel ``|ln mean_k e^(L_k - L_t) - ln mean_j e^(L(f_j) - L_t)|``.

    The first mean runs over the frames averaged into the blur, the second
    over the midpoint nodes used by the integral map.
    """
    ts = video.timestamps
    inside = (ts >= exposure.start) & (ts <= exposure.end)
    logs = log_intensity(video.frames, eps)
    lt = log_at(video, [t], eps)[0]
    frames_mean = np.mean(np.exp(logs[inside] - lt), axis=0)
    nodes = log_at(video, sample_times(exposure, n_samples), eps)
    nodes_mean = np.mean(np.exp(nodes - lt), axis=0)
    return np.abs(np.log(frames_mean) - np.log(nodes_mean))


# ------------------------------------------------------------------ harness

class Harness:
    """Synthetic gray scene with events, blurs at two temporal scales."""

    def __init__(self, seed: int = 0, size=(64, 64), n_frames=200, frames_per_blur=49, c=0.2, eps=0.01):
        self.seed = seed
        self.size = size
        self.n_frames = n_frames
        self.S = frames_per_blur
        self.c = c
        self.eps = eps

    @cached_property
    def video(self) -> SharpVideo:
        return drifting_texture(*self.size, self.n_frames, seed=self.seed, velocity=(0.8, 0.3))

    @cached_property
    def stream(self) -> EventStream:
        return simulate_events(self.video, SimulatorConfig(self.c, self.eps))

    @property
    def cfg(self) -> EdiConfig:
        return EdiConfig(self.c, self.eps, self.S)

    @cached_property
    def parts(self):
        return [blur_window(self.video, m * self.S, self.S) for m in range(2)]

    @cached_property
    def b_tilde(self) -> BlurryFrame:
        return extend_blur(self.parts)

    @property
    def mid_index(self) -> int:
        return self.S // 2

    def pair(self, anchor_index=None) -> TrainingPair:
        k = self.mid_index if anchor_index is None else anchor_index
        return TrainingPair(self.parts[0], self.b_tilde, slice_stream(self.stream, self.b_tilde.exposure),
                            float(self.video.timestamps[k]))

    def degenerate_pair(self) -> TrainingPair:
        b = self.parts[0]
        return TrainingPair(b, b, slice_stream(self.stream, b.exposure), float(self.video.timestamps[self.mid_index]))

    def log_bound(self, exposure, t):
        """Per-pixel round-trip bound ``2c + delta_disc``."""
        return 2 * self.c + discretization_error(self.video, exposure, t, self.S, self.eps)


def _max(a):
    return float(np.max(a)) if np.size(a) else 0.0


# ------------------------------------------------------------------- checks

def check_event_core(h: Harness):
    s = h.stream
    iv = TimeInterval(0.2, 0.6)
    once = slice_stream(s, iv)
    yield CheckResult("event_core.slice_idempotent", slice_stream(once, iv) == once)
    i0 = np.searchsorted(s.t, iv.start, side="left")
    kept = np.array_equal(once.t, s.t[i0:i0 + len(once)]) and np.array_equal(once.x, s.x[i0:i0 + len(once)])
    yield CheckResult("event_core.slice_preserves_order_and_fields", kept)
    whole = TimeInterval(0.1, 0.7)
    left = slice_stream(s, TimeInterval(0.1, 0.4), closed=(True, False))
    right = slice_stream(s, TimeInterval(0.4, 0.7))
    add = np.array_equal(signed_count_map(s, whole), accumulate(left) + accumulate(right))
    yield CheckResult("event_core.count_additivity", add)
    try:
        validate_stream(s)
        ok = True
    except Exception:
        ok = False
    yield CheckResult("event_core.simulated_stream_valid", ok)


def check_simulator(h: Harness):
    worst = _max(replay_residual(h.video, h.stream, h.eps, h.c))
    yield CheckResult("simulator.residual_bound", worst < h.c, f"max {worst:.4f} < c={h.c}")
    k = 2.0
    scaled = h.video.map_frames(lambda f: k * f)
    s2 = simulate_events(scaled, SimulatorConfig(h.c, k * h.eps))
    same = (len(s2) == len(h.stream) and np.array_equal(s2.x, h.stream.x) and np.array_equal(s2.p, h.stream.p)
            and np.allclose(s2.t, h.stream.t, atol=1e-9))
    yield CheckResult("simulator.scaling_invariance", same)
    union = blur_window(h.video, 0, 2 * h.S)
    err = _max(np.abs(union.image - h.b_tilde.image))
    yield CheckResult("simulator.extend_equals_union", err <= 1e-12 and union.exposure == h.b_tilde.exposure,
                      f"max diff {err:.1e}")
    frames = h.video.frames[:10]
    d = _max(np.abs(downsample(frames.mean(axis=0), 4) - np.mean([downsample(f, 4) for f in frames], axis=0)))
    yield CheckResult("simulator.downsample_commutes_with_mean", d <= 1e-12, f"max diff {d:.1e}")


def check_edi(h: Harness):
    b = h.parts[0]
    sub = slice_stream(h.stream, b.exposure)
    cfg = h.cfg
    t = float(h.video.timestamps[h.mid_index])
    emap = compute_integral_map(sub, t, b.exposure, cfg)
    yield CheckResult("edi.integral_map_positive", bool(np.all(emap.values > 0)))
    ones = compute_integral_map(sub, t, TimeInterval(t, t), cfg)
    yield CheckResult("edi.degenerate_interval_is_one", bool(np.all(ones.values == 1.0)))

    latent = deblur(b, sub, t, cfg)
    truth = h.video.frames[h.mid_index]
    err = np.abs(np.log(latent + h.eps) - np.log(truth + h.eps))
    bound = h.log_bound(b.exposure, t)
    yield CheckResult("edi.round_trip_bound", bool(np.all(err <= bound)),
                      f"max err {_max(err):.4f}, min bound {float(bound.min()):.4f}")

    pair = h.pair()
    est = blur2blur(pair.b_tilde, pair.stream, t, b.exposure, cfg)
    mae = float(np.mean(np.abs(est.image - b.image)))
    lim = bc_bound(h.c, pair.b_tilde)
    yield CheckResult("edi.blur2blur_consistency", mae <= lim, f"{mae:.4f} <= {lim:.4f}")

    r1 = deblur_multiscale(b, sub, t, cfg)
    yield CheckResult("edi.multiscale_r1_bitwise", bool(np.array_equal(r1, latent)))

    hr = drifting_texture(128, 64, 60, seed=h.seed + 1, velocity=(1.0, 0.3))
    lr = downsample_video(hr, 4)
    s_lr = simulate_events(lr, SimulatorConfig(h.c, h.eps))
    b_hr = blur_window(hr, 0, h.S)
    t_hr = float(hr.timestamps[h.mid_index])
    out = deblur_multiscale(b_hr, slice_stream(s_lr, b_hr.exposure), t_hr, cfg)
    gt = hr.frames[h.mid_index]
    gain = psnr(np.clip(out, 0, 1), gt) - psnr(b_hr.image, gt)
    yield CheckResult("edi.multiscale_gain", gain > 0, f"{gain:+.2f} dB at R=4")

    t1, t2 = float(h.video.timestamps[5]), float(h.video.timestamps[40])
    i1, i2 = deblur(b, sub, t1, cfg), deblur(b, sub, t2, cfg)
    n1, n2 = cumulative_counts(sub, [t1, t2])
    moved = np.log(i1 + h.eps) + h.c * (n2 - n1)
    gap = np.abs(moved - np.log(i2 + h.eps))
    lim2 = 2 * np.maximum(h.log_bound(b.exposure, t1), h.log_bound(b.exposure, t2))
    yield CheckResult("edi.anchor_consistency", bool(np.all(gap <= lim2)), f"max gap {_max(gap):.2e}")


def check_eger(h: Harness):
    rng = np.random.default_rng(h.seed)
    ok_cons = ok_mass = ok_nest = ok_perm = True
    for _ in range(20):
        n = int(rng.integers(5, 200))
        w, hh = 8, 6
        t = np.sort(rng.uniform(0, 1, n))
        t[rng.integers(0, n, 3)] = 0.5
        t = np.sort(t)
        s = EventStream(t, rng.integers(0, w, n), rng.integers(0, hh, n), rng.choice([-1, 1], n),
                        w, hh, TimeInterval(0, 1))
        a, bnd = np.sort(rng.uniform(0, 1, 2))
        nb = int(rng.choice([1, 5, 16]))
        eg = build_eger(s, TimeInterval(a, bnd), nb)
        ok_cons &= np.array_equal(eg.section_sum(), voxel_grid(s, nb))
        ok_mass &= eg.data.sum() == n
        big = build_eger(s, TimeInterval(a / 2, (1 + bnd) / 2), nb)
        e2_small, e2_big = eg.sections[1], big.sections[1]
        ok_nest &= bool(np.all(e2_big >= e2_small)) and np.array_equal(big.section_sum(), eg.section_sum())
        ties = np.flatnonzero(t == 0.5)
        perm = np.arange(n)
        perm[ties] = ties[::-1]
        s2 = EventStream(s.t[perm], s.x[perm], s.y[perm], s.p[perm], w, hh, s.span)
        ok_perm &= np.array_equal(build_eger(s2, eg.target, nb).data, eg.data)
    yield CheckResult("eger.conservation", bool(ok_cons))
    yield CheckResult("eger.total_mass", bool(ok_mass))
    yield CheckResult("eger.monotone_nesting", bool(ok_nest))
    yield CheckResult("eger.permutation_safety", bool(ok_perm))


def check_consistency(h: Harness):
    op = EdiOperator(h.cfg)
    pair = h.pair()
    deg = h.degenerate_pair()
    zeros = [loss_bc(op, deg), loss_sc(op, deg), loss_tg(op, op, deg), loss_sg(op, op, deg, 1)]
    yield CheckResult("consistency.degenerate_zero", all(z == 0.0 for z in zeros), f"{zeros}")
    lbc, lsc, ltg = loss_bc(op, pair), loss_sc(op, pair), loss_tg(op, op, pair)
    yield CheckResult("consistency.nonnegative", min(lbc, lsc, ltg) >= 0)
    bbc = bc_bound(h.c, pair.b_tilde)
    bsc = sc_bound(h.c, pair, h.eps)
    t = pair.t
    btg = tg_bound(h.log_bound(pair.b_t.exposure, t), h.log_bound(pair.b_tilde.exposure, t),
                   h.video.frames[h.mid_index], h.eps)
    yield CheckResult("consistency.bc_below_bound", lbc <= bbc, f"{lbc:.4f} <= {bbc:.4f}")
    yield CheckResult("consistency.sc_below_bound", lsc <= bsc, f"{lsc:.4f} <= {bsc:.4f}")
    yield CheckResult("consistency.tg_below_bound", ltg <= btg, f"{ltg:.4f} <= {btg:.4f}")
    t1 = total_loss(op, [pair], STAGE2)
    t2 = total_loss(op, [pair], STAGE2.scaled(2.0))
    yield CheckResult("consistency.total_linear_in_weights", np.isclose(t2.total, 2 * t1.total, rtol=1e-12, atol=0))
    s1 = total_loss(op, [pair], STAGE1)
    hand = 50 * s1.bc + 1 * s1.sc
    yield CheckResult("consistency.stage1_combination", np.isclose(s1.total, hand, rtol=1e-12, atol=0))


def check_metrics(h: Harness):
    rng = np.random.default_rng(h.seed)
    a = rng.uniform(0, 1, (32, 32))
    b = np.clip(a + rng.normal(0, 0.05, a.shape), 0, 1)
    yield CheckResult("metrics.symmetry", psnr(a, b) == psnr(b, a) and np.isclose(ssim(a, b), ssim(b, a), rtol=0, atol=1e-15))
    base = rng.uniform(0.3, 0.7, (32, 32))
    noise = rng.uniform(-1, 1, base.shape)
    vals = [psnr(base, base + amp * noise) for amp in (0.01, 0.05, 0.2)]
    yield CheckResult("metrics.psnr_monotone", vals[0] > vals[1] > vals[2])
    yield CheckResult("metrics.ssim_continuity", ssim(base, base + 1e-4) >= 0.999)


def check_dataset(root: Path, h: Harness):
    samples = load_all(root / "manifest.txt")
    lossless = True
    lr_ok = ext_ok = True
    for smp in samples:
        m = smp.manifest
        for key in ("hr_blur_ext",):
            raw = io.read_pnm(m.path(key))
            lossless &= np.array_equal(io.to_uint8(raw), io.to_uint8(smp.pair.b_tilde.image))
        for part_hr, part_lr in zip(smp.parts, smp.parts_lr):
            r = int(m.fields["r_label"])
            lr_ok &= _max(np.abs(part_lr.image - downsample(part_hr.image, r))) <= 1 / 255 + 1e-9
        mean_parts = np.mean([p.image for p in smp.parts], axis=0)
        ext_ok &= _max(np.abs(mean_parts - smp.pair.b_tilde.image)) <= 1 / 255 + 1e-9
    yield CheckResult("dataset.loads", len(samples) > 0, f"{len(samples)} samples")
    yield CheckResult("dataset.frames_lossless", bool(lossless))
    yield CheckResult("dataset.lr_blur_matches_downsampled_hr", bool(lr_ok))
    yield CheckResult("dataset.ext_blur_is_mean_of_parts", bool(ext_ok))


def run_checks(seed: int = 0, dataset_root=None) -> list[CheckResult]:
    h = Harness(seed=seed)
    results = []
    for fn in (check_event_core, check_simulator, check_edi, check_eger, check_consistency, check_metrics):
        results.extend(fn(h))
    if dataset_root is None:
        from .dataset import DatasetRecipe, generate

        with tempfile.TemporaryDirectory() as tmp:
            video = drifting_texture(64, 64, 54, seed=seed, velocity=(0.8, 0.3))
            generate(video, DatasetRecipe((64, 64), 4, 9, 2, seed=seed), tmp)
            results.extend(check_dataset(Path(tmp), h))
    else:
        results.extend(check_dataset(Path(dataset_root), h))
    return results
