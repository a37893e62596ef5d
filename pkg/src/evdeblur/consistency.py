"""Self-supervised consistency losses over a generic deblur operator.

A deblur operator is any callable ``op(target, blur, stream) -> image``
returning the latent frame for the exposure ``target`` nested in
``blur.exposure``; ``target == [t, t]`` asks for the sharp frame at ``t``.
:class:`EdiOperator` realizes the contract with the closed-form engine.

All L1 norms are means of absolute differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import errors
from .core import BlurryFrame, EventStream, TimeInterval, check_same_shape, slice_stream
from .edi import EdiConfig, blur2blur
from .simulator import downsample

RATIO_FLOOR = 1e-6

DeblurOperator = Callable[[TimeInterval, BlurryFrame, EventStream], np.ndarray]


class EdiOperator:
    """The EDI engine as a deblur operator.

    Non-degenerate targets are anchored at their midpoint; the integral-map
    ratio does not depend on the anchor.
    """

    def __init__(self, cfg: EdiConfig = EdiConfig()):
        self.cfg = cfg

    def __call__(self, target: TimeInterval, blur: BlurryFrame, stream: EventStream) -> np.ndarray:
        t = target.start if target.is_degenerate else target.mid
        return blur2blur(blur, stream, t, target, self.cfg).image

    def __repr__(self):
        return f"EdiOperator({self.cfg!r})"


@dataclass(frozen=True)
class LossWeights:
    beta_bc: float = 50.0
    beta_sc: float = 1.0
    beta_tg: float = 0.0
    beta_sg: float = 0.0

    def __post_init__(self):
        for name in ("beta_bc", "beta_sc", "beta_tg", "beta_sg"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise errors.DataError(f"{name} must be finite and >= 0, got {v}")

    def as_tuple(self):
        return (self.beta_bc, self.beta_sc, self.beta_tg, self.beta_sg)

    def scaled(self, k: float) -> "LossWeights":
        return LossWeights(*(k * w for w in self.as_tuple()))


STAGE1 = LossWeights(50.0, 1.0, 0.0, 0.0)
STAGE2 = LossWeights(50.0, 1.0, 50.0, 50.0)


@dataclass(frozen=True, eq=False)
class TrainingPair:
    """A blurry frame, its M-frame extension, the events and an anchor time."""

    b_t: BlurryFrame
    b_tilde: BlurryFrame
    stream: EventStream
    t: float
    pair_id: str = "0"

    def __post_init__(self):
        if not self.b_tilde.exposure.covers(self.b_t.exposure):
            raise errors.TargetNotNested(
                f"exposure {self.b_t.exposure} not within {self.b_tilde.exposure}"
            )
        if not self.stream.span.covers(self.b_tilde.exposure):
            raise errors.IntervalOutOfSpan(
                f"stream span {self.stream.span} does not cover {self.b_tilde.exposure}"
            )
        if not self.b_t.exposure.contains(self.t):
            raise errors.AnchorOutOfExposure(f"anchor {self.t} outside {self.b_t.exposure}")

    @property
    def events_t(self) -> EventStream:
        return slice_stream(self.stream, self.b_t.exposure)

    @property
    def events_tilde(self) -> EventStream:
        return slice_stream(self.stream, self.b_tilde.exposure)

    @property
    def sharp_target(self) -> TimeInterval:
        return TimeInterval(self.t, self.t)


def ratio_of(op: DeblurOperator, target, blur: BlurryFrame, stream, floor=RATIO_FLOOR) -> np.ndarray:
    out = np.asarray(op(target, blur, stream), dtype=np.float64)
    check_same_shape(out, blur.image)
    return out / np.maximum(blur.image, floor)


def _l1(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    check_same_shape(a, b)
    return float(np.mean(np.abs(a - b)))


def loss_bc(op: DeblurOperator, pair: TrainingPair) -> float:
    """Brightness consistency: recover ``B_T`` from ``B_T~``."""
    return _l1(pair.b_t.image, op(pair.b_t.exposure, pair.b_tilde, pair.events_tilde))


def loss_sc(op: DeblurOperator, pair: TrainingPair, floor=RATIO_FLOOR) -> float:
    """Structure consistency between the blur2blur and blur2sharp event ratios."""
    ev_tilde = pair.events_tilde
    sharp = pair.sharp_target
    direct = ratio_of(op, pair.b_t.exposure, pair.b_tilde, ev_tilde, floor)
    num = ratio_of(op, sharp, pair.b_tilde, ev_tilde, floor)
    den = ratio_of(op, sharp, pair.b_t, pair.events_t, floor)
    quotient = np.clip(num / np.maximum(den, floor), 0.0, 1.0 / floor)
    return _l1(direct, quotient)


def loss_tg(teacher: DeblurOperator, student: DeblurOperator, pair: TrainingPair) -> float:
    """Temporal generalization: teacher on ``B_T`` supervises student on ``B_T~``."""
    sharp = pair.sharp_target
    pseudo = teacher(sharp, pair.b_t, pair.events_t)
    return _l1(pseudo, student(sharp, pair.b_tilde, pair.events_tilde))


def divisor_factors(shape, stream_shape=None) -> list[int]:
    """Down-sampling factors dividing ``shape`` that keep the frame no smaller than the events."""
    h, w = shape[:2]
    out = []
    for f in range(1, min(h, w) + 1):
        if h % f or w % f:
            continue
        if stream_shape is not None and (h // f < stream_shape[0] or w // f < stream_shape[1]):
            continue
        out.append(f)
    return out


def random_factor(pair: TrainingPair, rng: np.random.Generator) -> int:
    return int(rng.choice(divisor_factors(pair.b_tilde.shape, pair.stream.shape)))


def loss_sg(teacher: DeblurOperator, student: DeblurOperator, pair: TrainingPair, factor: int = 1) -> float:
    """Spatial generalization: the student sees ``B_T~`` down-sampled by ``factor``."""
    sharp = pair.sharp_target
    pseudo = downsample(teacher(sharp, pair.b_t, pair.events_t), factor)
    small = BlurryFrame(downsample(pair.b_tilde.image, factor), pair.b_tilde.exposure)
    return _l1(pseudo, student(sharp, small, pair.events_tilde))


@dataclass
class LossBreakdown:
    total: float
    bc: float
    sc: float
    tg: float
    sg: float
    rows: list = field(default_factory=list)

    ROW_HEADER = ("pair_id", "L_BC", "L_SC", "L_TG", "L_SG", "total")

    def key_values(self) -> str:
        return "".join(
            f"{k}={v!r}\n"
            for k, v in (("L_BC", self.bc), ("L_SC", self.sc), ("L_TG", self.tg),
                         ("L_SG", self.sg), ("total", self.total))
        )

    def csv(self) -> str:
        lines = [",".join(self.ROW_HEADER)]
        lines += [",".join([str(r[0])] + [repr(float(v)) for v in r[1:]]) for r in self.rows]
        return "\n".join(lines) + "\n"


def total_loss(
    op: DeblurOperator,
    pairs: Sequence[TrainingPair] | TrainingPair,
    weights: LossWeights = STAGE1,
    teacher: DeblurOperator | None = None,
    factor: int | None = 1,
    seed: int = 0,
) -> LossBreakdown:
    """Weighted sum of the four losses, averaged over a batch.

    ``teacher`` defaults to ``op``. ``factor=None`` draws the spatial
    down-sampling factor per pair from a generator seeded with ``seed``.
    Terms with zero weight are skipped (reported as 0).
    """
    if isinstance(pairs, TrainingPair):
        pairs = [pairs]
    teacher = op if teacher is None else teacher
    rng = np.random.default_rng(seed)
    wb, ws, wt, wg = weights.as_tuple()
    rows = []
    for pair in pairs:
        f = random_factor(pair, rng) if factor is None else factor
        bc = loss_bc(op, pair) if wb else 0.0
        sc = loss_sc(op, pair) if ws else 0.0
        tg = loss_tg(teacher, op, pair) if wt else 0.0
        sg = loss_sg(teacher, op, pair, f) if wg else 0.0
        rows.append((pair.pair_id, bc, sc, tg, sg, wb * bc + ws * sc + wt * tg + wg * sg))
    if not rows:
        return LossBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, rows)
    cols = np.array([r[1:] for r in rows], dtype=np.float64)
    bc, sc, tg, sg, total = (float(v) for v in cols.mean(axis=0))
    return LossBreakdown(total, bc, sc, tg, sg, rows)


@dataclass(frozen=True)
class ScaleSets:
    durations: tuple
    ratio_range: tuple

    def contains_ratio(self, r: float) -> bool:
        return self.ratio_range[0] <= r <= self.ratio_range[1]


def scale_sets(base_durations, m: int, r_bar: float) -> ScaleSets:
    """Exposure set ``{m * T_k : m = 1..M}`` and the continuous ratio range ``[1, R_bar]``."""
    if m < 1:
        raise errors.DataError(f"M must be >= 1, got {m}")
    if r_bar < 1:
        raise errors.DataError(f"R_bar must be >= 1, got {r_bar}")
    durations = sorted({k * float(t) for k in range(1, m + 1) for t in base_durations})
    return ScaleSets(tuple(durations), (1.0, float(r_bar)))


# --------------------------------------------------------- derived bounds

def bc_bound(c: float, b_tilde: BlurryFrame) -> float:
    """Quantization bound on L_BC for EDI at the true threshold."""
    return float((np.exp(2 * c) - 1) * np.mean(b_tilde.image))


def sc_bound(c: float, pair: TrainingPair, eps: float) -> float:
    """L_BC's bound carried into ratio units (divided by ``B_T~`` per pixel)."""
    q = (pair.b_t.image + eps) / np.maximum(pair.b_tilde.image, RATIO_FLOOR)
    return float((np.exp(2 * c) - 1) * np.mean(q))


def tg_bound(log_bound_t, log_bound_tilde, truth, eps: float) -> float:
    """Two latent estimates each within a log-domain bound of the truth.

    ``|I^ - I| <= (e^D - 1)(I + eps)`` per estimate; the bound sums both.
    """
    truth = np.asarray(truth, dtype=np.float64)
    per_pixel = (np.expm1(log_bound_t) + np.expm1(log_bound_tilde)) * (truth + eps)
    return float(np.mean(per_pixel))
