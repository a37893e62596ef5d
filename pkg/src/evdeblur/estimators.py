"""scikit-learn style wrappers around the functional core.

These give the simulator, the EDI engine and the EGER encoder the usual
``get_params``/``set_params``/``fit``/``transform``/``predict`` surface so
they can be cloned, grid-searched and composed like other estimators.
Inputs are domain objects (videos, blurry frames, event streams) rather
than 2-D feature matrices.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import errors
from .core import BlurryFrame, EventStream, TimeInterval, slice_stream, validate_stream
from .edi import EdiConfig, blur2blur, calibrate_threshold, deblur_multiscale, latent_sequence
from .eger import DEFAULT_BINS, build_eger, voxel_grid
from .simulator import SharpVideo, SimulatorConfig, simulate_events


def check_stream(stream) -> EventStream:
    if not isinstance(stream, EventStream):
        raise TypeError(f"expected an EventStream, got {type(stream).__name__}")
    validate_stream(stream)
    return stream


def check_blur(blur) -> BlurryFrame:
    if not isinstance(blur, BlurryFrame):
        raise TypeError(f"expected a BlurryFrame, got {type(blur).__name__}")
    if blur.exposure.is_degenerate:
        raise errors.DataError("blurry frame has a degenerate exposure")
    return blur


def resolve_time(value, interval: TimeInterval) -> float:
    """Resolve ``'start'``, ``'mid'``, ``'end'`` or a number against ``interval``."""
    if isinstance(value, str):
        named = {"start": interval.start, "mid": interval.mid, "end": interval.end}
        if value in named:
            return named[value]
        value = float(value)
    return float(value)


class EventSimulator(TransformerMixin, BaseEstimator):
    """Turn a :class:`SharpVideo` into an :class:`EventStream`."""

    def __init__(self, c=0.2, eps=0.01):
        self.c = c
        self.eps = eps

    def fit(self, X=None, y=None):
        self.config_ = SimulatorConfig(self.c, self.eps)
        return self

    def transform(self, X: SharpVideo) -> EventStream:
        check_is_fitted(self, "config_")
        if not isinstance(X, SharpVideo):
            raise TypeError(f"expected a SharpVideo, got {type(X).__name__}")
        return simulate_events(X, self.config_)


class EDIDeblur(BaseEstimator):
    """Closed-form event-based deblurring.

    ``c='auto'`` makes :meth:`fit` calibrate the threshold on a list of
    adjacent blurry frames and their events; a numeric ``c`` is used as is.
    """

    def __init__(self, c=0.2, eps=0.01, n_samples=49, ratio_floor=1e-6,
                 c_range=(0.05, 0.5), grid=20):
        self.c = c
        self.eps = eps
        self.n_samples = n_samples
        self.ratio_floor = ratio_floor
        self.c_range = c_range
        self.grid = grid

    def _template(self, c):
        return EdiConfig(c, self.eps, self.n_samples, self.ratio_floor)

    def fit(self, blurs=None, stream=None):
        if self.c == "auto":
            if blurs is None or stream is None:
                raise ValueError("c='auto' needs blurry frames and events to fit")
            template = self._template(self.c_range[0])
            cal = calibrate_threshold(blurs, check_stream(stream), *self.c_range, self.grid, template)
            self.calibration_ = cal
            self.c_ = cal.c
        else:
            self.c_ = float(self.c)
        self.config_ = self._template(self.c_)
        return self

    def predict(self, blur: BlurryFrame, stream: EventStream, t="mid") -> np.ndarray:
        """Latent image at ``t`` (any frame/event resolution ratio ``R >= 1``)."""
        check_is_fitted(self, "config_")
        blur = check_blur(blur)
        t = resolve_time(t, blur.exposure)
        return deblur_multiscale(blur, slice_stream(check_stream(stream), blur.exposure), t, self.config_)

    def predict_sequence(self, blur, stream, times):
        check_is_fitted(self, "config_")
        blur = check_blur(blur)
        sub = slice_stream(check_stream(stream), blur.exposure)
        return latent_sequence(blur, sub, [resolve_time(t, blur.exposure) for t in times], self.config_)

    def retime(self, blur: BlurryFrame, stream: EventStream, target: TimeInterval, t=None) -> BlurryFrame:
        """Convert ``blur`` to the nested exposure ``target``."""
        check_is_fitted(self, "config_")
        blur = check_blur(blur)
        t = target.mid if t is None else resolve_time(t, target)
        sub = slice_stream(check_stream(stream), blur.exposure)
        return blur2blur(blur, sub, t, target, self.config_)

    def __call__(self, target, blur, stream):
        """Deblur-operator contract used by the consistency losses."""
        t = target.start if target.is_degenerate else target.mid
        return blur2blur(blur, stream, t, target, self.config_).image


class EgerEncoder(TransformerMixin, BaseEstimator):
    """Encode an event stream as an EGER tensor for a target interval.

    ``target=None`` encodes the whole stream span (E1 and E3 empty).
    """

    def __init__(self, n_bins=DEFAULT_BINS, target=None):
        self.n_bins = n_bins
        self.target = target

    def fit(self, X=None, y=None):
        if int(self.n_bins) != self.n_bins or self.n_bins < 1:
            raise errors.ZeroBins(f"n_bins must be a positive integer, got {self.n_bins}")
        self.n_bins_ = int(self.n_bins)
        return self

    def transform(self, X: EventStream):
        check_is_fitted(self, "n_bins_")
        stream = check_stream(X)
        target = self.target if self.target is not None else stream.span
        return build_eger(stream, target, self.n_bins_)

    def voxels(self, X: EventStream) -> np.ndarray:
        check_is_fitted(self, "n_bins_")
        return voxel_grid(check_stream(X), self.n_bins_)
