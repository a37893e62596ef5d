import math

import numpy as np
import pytest

from evdeblur import errors
from evdeblur.consistency import (
    STAGE1,
    STAGE2,
    EdiOperator,
    LossWeights,
    TrainingPair,
    bc_bound,
    divisor_factors,
    loss_bc,
    loss_sc,
    loss_sg,
    loss_tg,
    random_factor,
    ratio_of,
    sc_bound,
    scale_sets,
    tg_bound,
    total_loss,
)
from evdeblur.core import BlurryFrame, EventStream, TimeInterval, slice_stream
from evdeblur.edi import EdiConfig
from evdeblur.scenes import drifting_texture
from evdeblur.simulator import SimulatorConfig, blur_window, downsample_video, extend_blur, simulate_events

from conftest import make_stream

LN2 = math.log(2.0)


def black(target, blur, stream):
    return np.zeros_like(blur.image)


def passthrough(target, blur, stream):
    return blur.image


@pytest.fixture(scope="module")
def op(harness):
    return EdiOperator(harness.cfg)


@pytest.fixture(scope="module")
def hr_pair():
    """64x64 frames with 16x16 events (R=4)."""
    hr = drifting_texture(64, 64, 98, seed=2, velocity=(0.8, 0.3))
    lr = downsample_video(hr, 4)
    stream = simulate_events(lr, SimulatorConfig(0.2, 0.01))
    parts = [blur_window(hr, 0, 49), blur_window(hr, 49, 49)]
    tilde = extend_blur(parts)
    return TrainingPair(parts[0], tilde, slice_stream(stream, tilde.exposure), float(hr.timestamps[24]))


class TestWeights:
    def test_stage_defaults(self):
        assert STAGE1.as_tuple() == (50.0, 1.0, 0.0, 0.0)
        assert STAGE2.as_tuple() == (50.0, 1.0, 50.0, 50.0)

    def test_negative_rejected(self):
        with pytest.raises(errors.DataError):
            LossWeights(-1, 0, 0, 0)
        with pytest.raises(errors.DataError):
            LossWeights(float("inf"), 0, 0, 0)


class TestPair:
    def test_requires_nesting(self, harness):
        with pytest.raises(errors.TargetNotNested):
            TrainingPair(harness.b_tilde, harness.parts[0], harness.stream, harness.parts[0].exposure.mid)

    def test_requires_coverage(self, harness):
        short = slice_stream(harness.stream, harness.parts[0].exposure)
        with pytest.raises(errors.IntervalOutOfSpan):
            TrainingPair(harness.parts[0], harness.b_tilde, short, harness.parts[0].exposure.mid)

    def test_anchor_in_exposure(self, harness):
        with pytest.raises(errors.AnchorOutOfExposure):
            TrainingPair(harness.parts[0], harness.b_tilde, harness.stream, harness.parts[1].exposure.mid)


class TestRatio:
    def test_empty_stream_is_one(self, rng):
        b = BlurryFrame(rng.uniform(0.1, 1, (4, 4)), TimeInterval(0, 1))
        s = EventStream.empty(4, 4, TimeInterval(0, 1))
        r = ratio_of(EdiOperator(), TimeInterval(0.2, 0.6), b, s)
        assert np.allclose(r, 1.0, rtol=0, atol=1e-15)

    def test_same_exposure_is_one(self, harness, op):
        b = harness.parts[0]
        r = ratio_of(op, b.exposure, b, slice_stream(harness.stream, b.exposure))
        assert np.allclose(r, 1.0, rtol=0, atol=1e-15)

    def test_worked_example(self):
        b = BlurryFrame(np.full((1, 1), 0.75), TimeInterval(0, 1))
        s = make_stream([(0.5, 0, 0, 1)], width=1, height=1)
        r = ratio_of(EdiOperator(EdiConfig(LN2, 0.0, 2)), TimeInterval(0, 0), b, s)
        assert r[0, 0] == pytest.approx(1 / 1.5, rel=1e-14)


class TestLosses:
    def test_degenerate_pair_zero(self, harness, op):
        deg = harness.degenerate_pair()
        assert loss_bc(op, deg) == 0.0
        assert loss_sc(op, deg) == 0.0
        assert loss_tg(op, op, deg) == 0.0
        assert loss_sg(op, op, deg, 1) == 0.0

    def test_empty_stream_sc_zero(self, rng):
        parts = [BlurryFrame(rng.uniform(0.1, 1, (4, 4)), TimeInterval(0, 1)),
                 BlurryFrame(rng.uniform(0.1, 1, (4, 4)), TimeInterval(1, 2))]
        tilde = BlurryFrame((parts[0].image + parts[1].image) / 2, TimeInterval(0, 2))
        pair = TrainingPair(parts[0], tilde, EventStream.empty(4, 4, TimeInterval(0, 2)), 0.5)
        assert loss_sc(EdiOperator(), pair) == pytest.approx(0.0, abs=1e-15)

    def test_black_operator(self):
        b = BlurryFrame(np.full((4, 4), 0.5), TimeInterval(0, 1))
        pair = TrainingPair(b, b, EventStream.empty(4, 4, TimeInterval(0, 1)), 0.5)
        assert loss_bc(black, pair) == 0.5

    def test_passthrough_student(self, harness, op):
        pair = harness.pair()
        teacher_out = op(pair.sharp_target, pair.b_t, pair.events_t)
        expected = np.mean(np.abs(teacher_out - pair.b_tilde.image))
        got = loss_tg(op, passthrough, pair)
        assert got > 0 and got == pytest.approx(expected, rel=1e-14)

    def test_below_bounds(self, harness, op):
        pair = harness.pair()
        t = pair.t
        assert 0 <= loss_bc(op, pair) <= bc_bound(harness.c, pair.b_tilde)
        assert 0 <= loss_sc(op, pair) <= sc_bound(harness.c, pair, harness.eps)
        lb_t = harness.log_bound(pair.b_t.exposure, t)
        lb_tilde = harness.log_bound(pair.b_tilde.exposure, t)
        truth = harness.video.frames[harness.mid_index]
        assert 0 <= loss_tg(op, op, pair) <= tg_bound(lb_t, lb_tilde, truth, harness.eps)

    def test_sg_bounded(self, hr_pair, op):
        # teacher/student disagreement stays well below the blur-vs-sharp gap
        teacher = op(hr_pair.sharp_target, hr_pair.b_t, hr_pair.events_t)
        blur_gap = float(np.mean(np.abs(teacher - hr_pair.b_tilde.image)))
        for f in (1, 2, 4):
            sg = loss_sg(op, op, hr_pair, f)
            assert 0 <= sg < 0.5 * blur_gap

    def test_sg_not_divisible(self, hr_pair, op):
        with pytest.raises(errors.NotDivisible):
            loss_sg(op, op, hr_pair, 3)

    def test_sg_below_event_resolution(self, hr_pair, op):
        with pytest.raises(errors.AspectMismatch):
            loss_sg(op, op, hr_pair, 8)

    def test_size_mismatch(self, harness):
        def wrong(target, blur, stream):
            return np.zeros((2, 2))

        with pytest.raises(errors.SizeMismatch):
            loss_bc(wrong, harness.pair())


class TestTotal:
    def test_hand_combination(self, hr_pair, op):
        pair = hr_pair
        parts = (loss_bc(op, pair), loss_sc(op, pair), loss_tg(op, op, pair), loss_sg(op, op, pair, 2))
        for w in (STAGE1, STAGE2):
            got = total_loss(op, [pair], w, factor=2)
            hand = sum(b * l for b, l in zip(w.as_tuple(), parts) if b)
            assert got.total == pytest.approx(hand, rel=1e-12, abs=0)

    def test_zero_weights(self, harness):
        assert total_loss(black, harness.pair(), LossWeights(0, 0, 0, 0)).total == 0.0

    def test_linear_in_weights(self, hr_pair, op):
        a = total_loss(op, hr_pair, STAGE2, factor=2)
        b = total_loss(op, hr_pair, STAGE2.scaled(2), factor=2)
        assert b.total == pytest.approx(2 * a.total, rel=1e-12)

    def test_batch_mean_and_reports(self, harness, op):
        pairs = [harness.pair(10), harness.pair(30)]
        rep = total_loss(op, pairs, STAGE2, factor=None, seed=3)
        assert len(rep.rows) == 2
        assert rep.total == pytest.approx(np.mean([r[-1] for r in rep.rows]), rel=1e-12)
        kv = rep.key_values().splitlines()
        assert [line.split("=")[0] for line in kv] == ["L_BC", "L_SC", "L_TG", "L_SG", "total"]
        csv = rep.csv().splitlines()
        assert csv[0] == "pair_id,L_BC,L_SC,L_TG,L_SG,total" and len(csv) == 3

    def test_random_factor_deterministic(self, harness):
        pair = harness.pair()
        draws = [random_factor(pair, np.random.default_rng(5)) for _ in range(2)]
        assert draws[0] == draws[1] and draws[0] in divisor_factors(pair.b_tilde.shape, pair.stream.shape)

    def test_divisor_factors_keep_ratio(self):
        assert divisor_factors((64, 64), (16, 16)) == [1, 2, 4]
        assert divisor_factors((6, 4)) == [1, 2]


class TestScaleSets:
    def test_examples(self):
        assert scale_sets([0.1], 1, 1.0).durations == (0.1,)
        assert scale_sets([0.1], 2, 4.0).durations == (0.1, 0.2)
        s = scale_sets([0.1], 2, 1.0)
        assert s.ratio_range == (1.0, 1.0) and s.contains_ratio(1.0) and not s.contains_ratio(2.0)

    def test_invalid(self):
        with pytest.raises(errors.DataError):
            scale_sets([0.1], 0, 1.0)
        with pytest.raises(errors.DataError):
            scale_sets([0.1], 1, 0.5)
