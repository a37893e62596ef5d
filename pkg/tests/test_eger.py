import numpy as np
import pytest

from evdeblur import errors
from evdeblur.core import EventStream, TimeInterval
from evdeblur.eger import DEFAULT_BINS, build_eger, voxel_grid

from conftest import make_stream, random_stream


def oracle_eger(stream, target, n):
    """Loop over events, routing each by hand."""
    h, w = stream.shape
    out = np.zeros((3, 2, n, h, w))
    ts, te = stream.span.start, stream.span.end
    for e in stream:
        b = min(int(np.floor(n * (e.t - ts) / (te - ts))), n - 1)
        sec = 0 if e.t < target.start else (2 if e.t > target.end else 1)
        out[sec, 0 if e.p > 0 else 1, b, e.y, e.x] += 1
    return out.reshape(6 * n, h, w)


def test_default_bins():
    assert DEFAULT_BINS == 16


def test_layout_example_ten_negative_events():
    t = np.linspace(0.05, 0.95, 10)
    s = EventStream(t, np.zeros(10), np.zeros(10), -np.ones(10), 2, 2, TimeInterval(0, 1))
    eg = build_eger(s, TimeInterval(0.3, 0.6), 5)
    assert eg.data.shape == (30, 2, 2) and eg.data.dtype == np.float32
    for sec in eg.sections:
        assert sec[:5].sum() == 0
    assert eg.data.sum() == 10
    e1, e2, e3 = eg.sections
    assert (e1.sum(), e2.sum(), e3.sum()) == (3, 3, 4)


def test_matches_oracle(rng):
    for n in (1, 3, 7):
        s = random_stream(rng, 120, width=4, height=3)
        target = TimeInterval(0.21, 0.64)
        assert np.array_equal(build_eger(s, target, n).data, oracle_eger(s, target, n))


def test_point_target_empty_middle(rng):
    s = random_stream(rng, 200)
    eg = build_eger(s, TimeInterval(0.5, 0.5), 4)
    assert not eg.sections[1].any()


def test_point_target_owns_coincident_event():
    s = make_stream([(0.2, 0, 0, 1), (0.5, 1, 1, 1), (0.8, 0, 0, -1)])
    eg = build_eger(s, TimeInterval(0.5, 0.5), 4)
    assert eg.sections[1].sum() == 1


def test_full_target_is_voxel_grid(rng):
    s = random_stream(rng, 200)
    eg = build_eger(s, s.span, 5)
    e1, e2, e3 = eg.sections
    assert not e1.any() and not e3.any()
    assert np.array_equal(e2, voxel_grid(s, 5))


def test_voxel_examples():
    assert not voxel_grid(EventStream.empty(3, 3, TimeInterval(0, 1)), 5).any()
    v = voxel_grid(make_stream([(0.59, 1, 2, 1)]), 5)
    assert v[2, 2, 1] == 1 and v.sum() == 1
    v = voxel_grid(make_stream([(1.0, 0, 0, -1)]), 5)
    assert v[5 + 4, 0, 0] == 1


def test_conservation_and_mass(rng):
    for _ in range(25):
        s = random_stream(rng, int(rng.integers(0, 300)))
        a, b = np.sort(rng.uniform(0, 1, 2))
        n = int(rng.choice([1, 5, 16]))
        eg = build_eger(s, TimeInterval(a, b), n)
        assert np.array_equal(eg.section_sum(), voxel_grid(s, n))
        assert eg.data.sum() == len(s)


def test_errors(rng):
    s = random_stream(rng, 10)
    with pytest.raises(errors.ZeroBins):
        build_eger(s, TimeInterval(0.2, 0.3), 0)
    with pytest.raises(errors.ZeroBins):
        voxel_grid(s, 0)
    with pytest.raises(errors.TargetOutOfSpan):
        build_eger(s, TimeInterval(0.5, 1.5), 4)
