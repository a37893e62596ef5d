import numpy as np
import pytest
from sklearn.base import clone

from evdeblur import errors
from evdeblur.core import BlurryFrame, TimeInterval, slice_stream
from evdeblur.edi import EdiConfig, blur2blur, deblur
from evdeblur.eger import build_eger
from evdeblur.estimators import EDIDeblur, EgerEncoder, EventSimulator, resolve_time
from evdeblur.simulator import SimulatorConfig, simulate_events


def test_resolve_time():
    iv = TimeInterval(0.2, 0.6)
    assert [resolve_time(v, iv) for v in ("start", "mid", "end", "0.3", 0.5)] == [0.2, 0.4, 0.6, 0.3, 0.5]
    with pytest.raises(ValueError):
        resolve_time("middle", iv)


def test_params_and_clone():
    est = EDIDeblur(c=0.3, n_samples=9)
    assert est.get_params()["c"] == 0.3
    twin = clone(est)
    assert twin is not est and twin.get_params() == est.get_params()
    est.set_params(c="auto")
    assert est.c == "auto"
    assert EgerEncoder(n_bins=5).get_params() == {"n_bins": 5, "target": None}


def test_simulator_transform(harness):
    out = EventSimulator(c=0.2, eps=0.01).fit().transform(harness.video)
    assert out == harness.stream
    with pytest.raises(TypeError):
        EventSimulator().fit().transform(np.zeros((3, 3)))


def test_unfitted_raises(harness):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        EDIDeblur().predict(harness.parts[0], harness.stream)


def test_predict_matches_functional(harness):
    b = harness.parts[0]
    est = EDIDeblur(c=0.2, eps=0.01, n_samples=49).fit()
    out = est.predict(b, harness.stream, t="mid")
    ref = deblur(b, slice_stream(harness.stream, b.exposure), b.exposure.mid, harness.cfg)
    assert np.array_equal(out, ref)
    seq = est.predict_sequence(b, harness.stream, ["start", "end"])
    assert len(seq) == 2


def test_retime_and_operator(harness):
    est = EDIDeblur(c=0.2, n_samples=49).fit()
    target = harness.parts[0].exposure
    out = est.retime(harness.b_tilde, harness.stream, target)
    sub = slice_stream(harness.stream, harness.b_tilde.exposure)
    ref = blur2blur(harness.b_tilde, sub, target.mid, target, harness.cfg)
    assert np.array_equal(out.image, ref.image)
    assert np.array_equal(est(target, harness.b_tilde, sub), ref.image)


def test_auto_calibration(harness):
    est = EDIDeblur(c="auto", n_samples=49).fit(harness.parts, harness.stream)
    assert abs(est.c_ - 0.2) <= 0.02 and est.calibration_.flat is False
    with pytest.raises(ValueError):
        EDIDeblur(c="auto").fit()


def test_blur_checks(harness):
    est = EDIDeblur().fit()
    with pytest.raises(TypeError):
        est.predict(np.zeros((4, 4)), harness.stream)
    with pytest.raises(errors.DataError):
        est.predict(BlurryFrame(np.zeros((64, 64)), TimeInterval(0.1, 0.1)), harness.stream)


def test_eger_encoder(harness):
    target = TimeInterval(0.2, 0.3)
    enc = EgerEncoder(n_bins=4, target=target).fit()
    assert np.array_equal(enc.transform(harness.stream).data, build_eger(harness.stream, target, 4).data)
    assert enc.voxels(harness.stream).shape == (8, 64, 64)
    whole = EgerEncoder(n_bins=2).fit().transform(harness.stream)
    assert not whole.sections[0].any() and not whole.sections[2].any()
    with pytest.raises(errors.ZeroBins):
        EgerEncoder(n_bins=0).fit()
