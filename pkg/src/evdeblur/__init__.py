"""Event-guided motion deblurring across spatial and temporal scales.

Closed-form EDI deblurring, blur2blur retiming, exposure-guided event
tensors, consistency losses and a synthetic evaluation harness.
"""
from .core import BlurryFrame, Event, EventStream, TimeInterval, slice_stream, validate_stream
from .edi import (
    EdiConfig,
    blur2blur,
    calibrate_threshold,
    compute_integral_map,
    deblur,
    deblur_multiscale,
    upsample_integral_map,
)
from .eger import EgerTensor, build_eger, voxel_grid
from .estimators import EDIDeblur, EgerEncoder, EventSimulator
from .metrics import QualityReport, eval_sequence, psnr, ssim
from .simulator import SharpVideo, SimulatorConfig, simulate_events, synthesize_blur

__version__ = "0.1.0"

__all__ = [
    "BlurryFrame", "Event", "EventStream", "TimeInterval", "slice_stream", "validate_stream",
    "EdiConfig", "blur2blur", "calibrate_threshold", "compute_integral_map", "deblur",
    "deblur_multiscale", "upsample_integral_map", "EgerTensor", "build_eger", "voxel_grid",
    "EDIDeblur", "EgerEncoder", "EventSimulator", "QualityReport", "eval_sequence", "psnr",
    "ssim", "SharpVideo", "SimulatorConfig", "simulate_events", "synthesize_blur",
]
