import numpy as np
import pytest
from skimage.metrics import structural_similarity

from evdeblur import errors
from evdeblur.metrics import (
    PSNR_CAP,
    eval_indices,
    eval_sequence,
    gaussian_window,
    psnr,
    ssim,
    to_gray,
)


def constant_ssim(a, b, k1=0.01, k2=0.03):
    c1, c2 = k1 ** 2, k2 ** 2
    return (2 * a * b + c1) / (a * a + b * b + c1) * (c2 / c2)


class TestPsnr:
    def test_identity_cap(self, rng):
        a = rng.uniform(size=(8, 8))
        assert psnr(a, a) == PSNR_CAP == 100.0

    def test_half_gray(self):
        assert psnr(np.zeros((4, 4)), np.full((4, 4), 0.5)) == pytest.approx(10 * np.log10(4), abs=1e-12)
        assert psnr(np.zeros((4, 4)), np.full((4, 4), 0.5)) == pytest.approx(6.0206, abs=1e-4)

    def test_single_pixel(self):
        a = np.zeros((10, 10))
        b = a.copy()
        b[3, 4] = 1.0
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)

    def test_symmetric_and_monotone(self, rng):
        a = rng.uniform(0.3, 0.7, (16, 16))
        noise = rng.uniform(-1, 1, a.shape)
        vals = [psnr(a, a + s * noise) for s in (0.01, 0.05, 0.2)]
        assert vals[0] > vals[1] > vals[2]
        assert psnr(a, a + 0.1 * noise) == psnr(a + 0.1 * noise, a)

    def test_size_mismatch(self):
        with pytest.raises(errors.SizeMismatch):
            psnr(np.zeros((3, 3)), np.zeros((3, 4)))


class TestSsim:
    def test_identity(self, rng):
        a = rng.uniform(size=(20, 20))
        assert ssim(a, a) == 1.0

    def test_constant_images_closed_form(self):
        a, b = np.full((16, 16), 0.3), np.full((16, 16), 0.7)
        assert ssim(a, b) == pytest.approx(constant_ssim(0.3, 0.7), rel=1e-12)

    def test_inverted_below_one(self, rng):
        a = rng.uniform(size=(16, 16))
        assert ssim(a, 1 - a) < 1

    def test_symmetric(self, rng):
        a, b = rng.uniform(size=(2, 24, 24))
        assert ssim(a, b) == pytest.approx(ssim(b, a), rel=0, abs=1e-15)

    def test_continuity(self, rng):
        a = rng.uniform(size=(16, 16))
        assert ssim(a, a + 1e-4) >= 0.999

    def test_matches_skimage(self, rng):
        a = rng.uniform(size=(40, 33))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        ref = structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
                                    data_range=1.0)
        assert ssim(a, b) == pytest.approx(ref, abs=1e-10)

    def test_color_averages_channels(self, rng):
        a = rng.uniform(size=(16, 16, 3))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(np.mean([ssim(a[..., k], b[..., k]) for k in range(3)]))

    def test_window(self):
        g = gaussian_window()
        assert len(g) == 11 and g.sum() == pytest.approx(1.0) and g.argmax() == 5

    def test_too_small(self):
        with pytest.raises(errors.TooSmall):
            ssim(np.zeros((10, 20)), np.zeros((10, 20)))


class TestGray:
    def test_passthrough(self, rng):
        a = rng.uniform(size=(3, 3))
        assert np.array_equal(to_gray(a), a)

    def test_white_and_red(self):
        assert to_gray(np.ones((1, 1, 3)))[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert to_gray(np.array([[[1.0, 0.0, 0.0]]]))[0, 0] == pytest.approx(0.299, abs=1e-15)


class TestSequence:
    def test_identical(self, rng):
        frames = [rng.uniform(size=(12, 12)) for _ in range(7)]
        rep = eval_sequence(frames, frames)
        assert rep.psnr_color == rep.psnr_gray == 100.0 and rep.ssim_color == rep.ssim_gray == 1.0
        assert len(rep.per_frame) == 7

    def test_single_frame(self, rng):
        a, b = rng.uniform(size=(2, 12, 12, 3))
        rep = eval_sequence([a], [b])
        assert rep.as_row() == list(rep.per_frame[0])
        assert rep.psnr_color == psnr(a, b)
        assert rep.ssim_gray == ssim(to_gray(a), to_gray(b))

    def test_length_mismatch(self, rng):
        with pytest.raises(errors.LengthMismatch):
            eval_sequence([np.zeros((12, 12))], [])

    def test_restored_clamped(self):
        truth = np.ones((12, 12))
        assert eval_sequence([np.full((12, 12), 1.5)], [truth]).psnr_gray == 100.0

    def test_eval_indices(self):
        assert eval_indices() == [0, 8, 16, 24, 32, 40, 48]
        assert eval_indices(9, 7)[0] == 0 and eval_indices(9, 7)[-1] == 8
        assert eval_indices(3, 7) == [0, 1, 2]
