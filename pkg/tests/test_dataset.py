import shutil

import numpy as np
import pytest

from evdeblur import errors, io
from evdeblur.dataset import DatasetRecipe, center_crop, generate, load, load_all, read_manifest
from evdeblur.scenes import constant_video, drifting_texture
from evdeblur.simulator import downsample


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    video = drifting_texture(72, 64, 60, seed=1, velocity=(0.8, 0.3))
    recipe = DatasetRecipe((64, 64), 4, 9, 2, seed=5)
    return root, video, recipe, generate(video, recipe, root)


def copy_tree(src, dst):
    shutil.copytree(src, dst)
    return dst


class TestRecipe:
    def test_defaults_mirror_training_setup(self):
        r = DatasetRecipe()
        assert (r.frames_per_blur, r.spatial_ratio, r.temporal_scale) == (49, 4, 2)

    def test_invalid(self):
        with pytest.raises(errors.NotDivisible):
            DatasetRecipe((65, 64), 4)
        with pytest.raises(errors.DataError):
            DatasetRecipe(frames_per_blur=8)
        with pytest.raises(errors.DataError):
            DatasetRecipe(temporal_scale=0)


class TestGenerate:
    def test_layout(self, built):
        root, _, _, manifests = built
        for d in ("hr_blur", "lr_blur", "hr_blur_ext", "lr_blur_ext", "events", "gt"):
            assert (root / d).is_dir()
        assert len(manifests) == 3 and (root / "manifest.txt").exists()
        assert [m.id for m in read_manifest(root / "manifest.txt")] == ["000000", "000001", "000002"]

    def test_center_crop(self, built):
        root, video, _, manifests = built
        gt = io.read_pnm(manifests[0].paths("gt")[0])
        assert np.array_equal(io.to_uint8(gt), io.to_uint8(video.frames[0][:, 4:68]))
        assert center_crop(np.zeros((5, 9)), (3, 3)).shape == (3, 3)

    def test_round_trip_lossless(self, built):
        root, video, recipe, manifests = built
        smp = load(root / "manifest.txt", "000001")
        raw = io.read_pnm(manifests[1].path("hr_blur", 0))
        assert np.array_equal(smp.parts[0].image, raw)
        ev = io.read_events(manifests[1].path("events"), span=smp.pair.stream.span)
        assert ev == smp.pair.stream

    def test_lr_matches_downsampled_hr(self, built):
        root = built[0]
        for smp in load_all(root / "manifest.txt"):
            for hr, lr in zip(smp.parts, smp.parts_lr):
                assert np.max(np.abs(lr.image - downsample(hr.image, 4))) <= 1 / 255 + 1e-12

    def test_ext_is_mean_of_parts(self, built):
        root = built[0]
        for smp in load_all(root / "manifest.txt"):
            mean = np.mean([p.image for p in smp.parts], axis=0)
            assert np.max(np.abs(mean - smp.pair.b_tilde.image)) <= 1 / 255 + 1e-12

    def test_gt_at_eval_indices(self, built):
        root, _, recipe, manifests = built
        times = manifests[0].floats("gt_times")
        smp = load(root / "manifest.txt", 0)
        assert len(smp.gt) == 7 and times[0] == smp.parts[0].exposure.start
        assert times[-1] == smp.parts[0].exposure.end

    def test_deterministic(self, built, tmp_path):
        root, video, recipe, _ = built
        generate(video, recipe, tmp_path)
        for p in sorted(root.rglob("*")):
            if p.is_file():
                assert p.read_bytes() == (tmp_path / p.relative_to(root)).read_bytes()

    def test_constant_video(self, tmp_path):
        video = constant_video(16, 16, 20, value=0.4)
        ms = generate(video, DatasetRecipe((16, 16), 4, 9, 2), tmp_path)
        smp = load(tmp_path / "manifest.txt")
        assert ms[0].fields["event_count"] == "0" and len(smp.pair.stream) == 0
        assert np.allclose(smp.pair.b_t.image, io.read_pnm(ms[0].paths("gt")[0]))

    def test_m1(self, tmp_path):
        video = drifting_texture(16, 16, 20, seed=0)
        generate(video, DatasetRecipe((16, 16), 4, 9, 1), tmp_path)
        smp = load(tmp_path / "manifest.txt")
        assert smp.pair.b_t.exposure == smp.pair.b_tilde.exposure

    def test_video_too_short(self, tmp_path):
        with pytest.raises(errors.VideoTooShort):
            generate(drifting_texture(16, 16, 10, seed=0), DatasetRecipe((16, 16), 4, 9, 2), tmp_path)


class TestLoadErrors:
    def test_missing_event_file(self, built, tmp_path):
        root = copy_tree(built[0], tmp_path / "c")
        (root / "events" / "000000.evt").unlink()
        with pytest.raises(errors.MissingFile):
            load(root / "manifest.txt")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(errors.MissingFile):
            load(tmp_path / "manifest.txt")

    def test_tampered_exposure(self, built, tmp_path):
        root = copy_tree(built[0], tmp_path / "c")
        text = (root / "manifest.txt").read_text()
        first = text.split("\n\n")[0]
        line = next(l for l in first.splitlines() if l.startswith("exposures="))
        a = line.split(",")[0]
        tampered = text.replace(line, line.replace(a, a.replace("exposures=0.0", "exposures=0.01"), 1), 1)
        (root / "manifest.txt").write_text(tampered)
        with pytest.raises(errors.InvariantViolation):
            load(root / "manifest.txt")

    def test_tampered_event_count(self, built, tmp_path):
        root = copy_tree(built[0], tmp_path / "c")
        text = (root / "manifest.txt").read_text()
        n = built[3][0].fields["event_count"]
        (root / "manifest.txt").write_text(text.replace(f"event_count={n}", f"event_count={int(n) + 1}", 1))
        with pytest.raises(errors.InvariantViolation):
            load(root / "manifest.txt")

    def test_bad_manifest_line(self, tmp_path):
        (tmp_path / "manifest.txt").write_text("id=0\ngarbage\n")
        with pytest.raises(errors.FormatError):
            load(tmp_path / "manifest.txt")

    def test_missing_key(self, built, tmp_path):
        root = copy_tree(built[0], tmp_path / "c")
        text = (root / "manifest.txt").read_text()
        (root / "manifest.txt").write_text("\n".join(l for l in text.splitlines() if not l.startswith("anchor=")))
        with pytest.raises(errors.FormatError):
            load(root / "manifest.txt")
