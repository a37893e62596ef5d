"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 invariant failure.
Time arguments accept seconds or ``start``/``mid``/``end`` relative to the
blur's exposure.
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import errors, io
from .core import BlurryFrame, EventStream, TimeInterval, slice_stream, validate_stream
from .edi import EdiConfig, blur2blur, calibrate_threshold, deblur_multiscale, spatial_ratio
from .eger import DEFAULT_BINS, build_eger
from .estimators import resolve_time
from .metrics import QualityReport, eval_sequence
from .simulator import SimulatorConfig, simulate_events, synthesize_blur

log = logging.getLogger("evdeblur")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ helpers

def _interval(text) -> TimeInterval:
    try:
        return TimeInterval.parse(text)
    except (ValueError, errors.DataError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _edi_cfg(args) -> EdiConfig:
    return EdiConfig(args.c, args.eps, args.samples, args.ratio_floor)


def _add_edi_flags(p):
    p.add_argument("--c", type=float, default=0.2, help="event threshold (log units, default 0.2)")
    p.add_argument("--eps", type=float, default=0.01, help="log offset (default 0.01)")
    p.add_argument("--samples", type=int, default=49, help="outer-integral nodes (default 49)")
    p.add_argument("--ratio-floor", type=float, default=1e-6, help="division guard (default 1e-6)")


def _load_blur_and_events(blur_path, events_path, exposure=None):
    blur = io.read_blurry_frame(blur_path, exposure)
    stream = io.read_events(events_path)
    if len(stream) == 0:
        # an empty CSV carries no sensor size; assume the frame's
        h, w = stream.shape if stream.shape != (0, 0) else blur.shape
        return blur, EventStream.empty(w, h, blur.exposure)
    stream = stream.with_span(blur.exposure.hull(stream.span))
    validate_stream(stream)
    return blur, stream


def _check_ratio(blur: BlurryFrame, stream, override):
    r = spatial_ratio(blur.shape, stream.shape)
    if override is not None and not np.isclose(r, override):
        raise errors.AspectMismatch(f"--ratio {override} but frame/event dims give R={r:g}")
    return r


def _latent_times(when: str, exposure: TimeInterval, count: int):
    if count > 1:
        return list(np.linspace(exposure.start, exposure.end, count))
    return [resolve_time(when, exposure)]


# -------------------------------------------------------------- subcommands

def cmd_simulate(args):
    video = io.read_video_dir(args.video)
    stream = simulate_events(video, SimulatorConfig(args.c, args.eps))
    (io.write_events_csv if args.csv else io.write_events)(args.output, stream)
    print(f"events={len(stream)}")
    print(f"span={stream.span}")
    return EXIT_OK


def cmd_blur(args):
    video = io.read_video_dir(args.video)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    ts = video.timestamps
    count, stride = args.frames, args.stride or args.frames
    ext = ".ppm" if video.frames.ndim == 4 else ".pgm"
    starts = [args.start] if args.single else range(args.start, len(ts) - count + 1, stride)
    written = 0
    for i, s in enumerate(starts):
        if s + count > len(ts):
            raise errors.TooFewFrames(f"window at frame {s} runs past the video")
        frame = synthesize_blur(video, TimeInterval(ts[s], ts[s + count - 1]))
        io.write_blurry_frame(out / f"blur_{i:06d}{ext}", frame)
        written += 1
    print(f"blurs={written}")
    return EXIT_OK


def cmd_deblur(args):
    blur, stream = _load_blur_and_events(args.blur, args.events, args.exposure)
    _check_ratio(blur, stream, args.ratio)
    cfg = _edi_cfg(args)
    times = _latent_times(args.t, blur.exposure, args.count)
    sub = slice_stream(stream, blur.exposure)
    out = Path(args.output)
    ext = ".ppm" if blur.image.ndim == 3 else ".pgm"
    for k, t in enumerate(times):
        latent = deblur_multiscale(blur, sub, t, cfg)
        path = out if len(times) == 1 else out / f"latent_{k:03d}{ext}"
        if len(times) > 1:
            out.mkdir(parents=True, exist_ok=True)
        io.write_blurry_frame(path, BlurryFrame(latent, TimeInterval(t, t)))
    print(f"latents={len(times)}")
    return EXIT_OK


def cmd_blur2blur(args):
    blur, stream = _load_blur_and_events(args.blur, args.events, args.exposure)
    target = args.target
    t = resolve_time(args.t, target) if args.t is not None else target.mid
    result = blur2blur(blur, slice_stream(stream, blur.exposure), t, target, _edi_cfg(args))
    io.write_blurry_frame(args.output, result)
    print(f"exposure={result.exposure}")
    return EXIT_OK


def cmd_eger(args):
    stream = io.read_events(args.events, span=args.parent)
    validate_stream(stream)
    tensor = build_eger(stream, args.target, args.bins)
    io.write_eger(args.output, tensor)
    print(f"shape={'x'.join(str(d) for d in tensor.data.shape)}")
    return EXIT_OK


def cmd_calibrate(args):
    blurs = [io.read_blurry_frame(p) for p in args.blur]
    stream = io.read_events(args.events)
    span = blurs[0].exposure.hull(blurs[-1].exposure)
    stream = stream.with_span(span if len(stream) == 0 else span.hull(stream.span))
    validate_stream(stream)
    template = EdiConfig(args.c_min, args.eps, args.samples)
    target = blurs[0] if len(blurs) == 1 else blurs
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cal = calibrate_threshold(target, stream, args.c_min, args.c_max, args.grid, template)
    print(f"c={cal.c!r}")
    print(f"residual={cal.residual!r}")
    print(f"flat={str(cal.flat).lower()}")
    return EXIT_OK


def cmd_dataset(args):
    from .dataset import DatasetRecipe, generate
    from .scenes import drifting_texture

    w, h = (int(v) for v in args.hr_size.lower().split("x"))
    recipe = DatasetRecipe((w, h), args.ratio, args.frames, args.scale, args.c, args.eps, args.seed)
    if args.video:
        video = io.read_video_dir(args.video)
    else:
        n = recipe.window * args.windows
        video = drifting_texture(w, h, n, seed=args.seed, velocity=(0.8, 0.3), duration=(n - 1) / 200.0)
    samples = generate(video, recipe, args.output)
    print(f"samples={len(samples)}")
    return EXIT_OK


def _read_dir_frames(path):
    path = Path(path)
    if not path.is_dir():
        raise errors.MissingFile(f"{path}: not a directory")
    names = sorted(n for n in path.iterdir() if n.suffix.lower() in io.PNM_SUFFIXES)
    return [io.read_pnm(n) for n in names]


def cmd_eval(args):
    restored = _read_dir_frames(args.restored)
    truth = _read_dir_frames(args.truth)
    report = eval_sequence(restored, truth)
    text, table = report_tables([(args.method, args.scale, report)])
    print(text, end="")
    if args.csv:
        Path(args.csv).write_text(table)
    return EXIT_OK


def cmd_check(args):
    from .checks import run_checks

    results = run_checks(args.seed, args.dataset)
    for r in results:
        print(r.line() if args.verbose else f"{'PASS' if r.passed else 'FAIL'} {r.name}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} properties passed")
    return EXIT_OK if failed == 0 else EXIT_INVARIANT


# ------------------------------------------------------------------- tables

METRIC_COLUMNS = ("PSNR_color", "SSIM_color", "PSNR_gray", "SSIM_gray")


def report_tables(results) -> tuple[str, str]:
    """Format ``(method, scale, QualityReport)`` triples as text and CSV.

    Rows are methods; each scale contributes four columns (color PSNR/SSIM,
    gray PSNR/SSIM), the same grouping as a per-scale comparison table.
    """
    results = list(results)
    methods, scales = [], []
    cells: dict[tuple, QualityReport] = {}
    for method, scale, report in results:
        if method not in methods:
            methods.append(method)
        if scale not in scales:
            scales.append(scale)
        cells[(method, scale)] = report
    header = ["method"] + [f"{s}:{c}" for s in scales for c in METRIC_COLUMNS]
    rows = []
    for m in methods:
        row = [m]
        for s in scales:
            rep = cells.get((m, s))
            row += [f"{v:.4f}" for v in rep.as_row()] if rep else ["/"] * 4
        rows.append(row)
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    text = "".join("  ".join(str(v).rjust(w) for v, w in zip(r, widths)) + "\n" for r in [header] + rows)
    return text, buf.getvalue()


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evdeblur", description="Event-based motion deblurring toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="print details")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="video directory -> event file")
    s.add_argument("video", help="directory of PNM frames plus timestamps.txt")
    s.add_argument("-o", "--output", required=True, help="output event file")
    s.add_argument("--c", type=float, default=0.2, help="event threshold (default 0.2)")
    s.add_argument("--eps", type=float, default=0.01, help="log offset (default 0.01)")
    s.add_argument("--csv", action="store_true", help="write t,x,y,p CSV instead of EVT1")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("blur", help="video directory -> blurry frames")
    s.add_argument("video", help="directory of PNM frames plus timestamps.txt")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.add_argument("--frames", type=int, default=49, help="frames per blur (default 49)")
    s.add_argument("--start", type=int, default=0, help="first frame index (default 0)")
    s.add_argument("--stride", type=int, default=None, help="window stride (default: --frames)")
    s.add_argument("--single", action="store_true", help="write only the window at --start")
    s.set_defaults(func=cmd_blur)

    s = sub.add_parser("deblur", help="blur + events -> latent image(s)")
    s.add_argument("blur", help="blurry PNM frame (exposure in header comment)")
    s.add_argument("events", help="event file (EVT1 or CSV)")
    s.add_argument("-o", "--output", required=True, help="output PNM, or directory with --count > 1")
    s.add_argument("--t", default="mid", help="latent time: seconds or start|mid|end (default mid)")
    s.add_argument("--count", type=int, default=1, help="evenly spaced latents over the exposure")
    s.add_argument("--exposure", type=_interval, default=None, help="override exposure a:b")
    s.add_argument("--ratio", type=float, default=None, help="expected frame/event ratio (sanity check)")
    _add_edi_flags(s)
    s.set_defaults(func=cmd_deblur)

    s = sub.add_parser("blur2blur", help="blur + events + target interval -> retimed blur")
    s.add_argument("blur", help="blurry PNM frame")
    s.add_argument("events", help="event file")
    s.add_argument("--target", type=_interval, required=True, help="target exposure a:b")
    s.add_argument("--t", default=None, help="anchor within target (default: its midpoint)")
    s.add_argument("--exposure", type=_interval, default=None, help="override exposure a:b")
    s.add_argument("-o", "--output", required=True, help="output PNM")
    _add_edi_flags(s)
    s.set_defaults(func=cmd_blur2blur)

    s = sub.add_parser("eger", help="events + target -> EGR1 tensor file")
    s.add_argument("events", help="event file")
    s.add_argument("--target", type=_interval, required=True, help="target interval a:b")
    s.add_argument("--bins", type=int, default=DEFAULT_BINS, help=f"temporal bins N (default {DEFAULT_BINS})")
    s.add_argument("--parent", type=_interval, default=None, help="parent span (default: event time range)")
    s.add_argument("-o", "--output", required=True, help="output tensor file")
    s.set_defaults(func=cmd_eger)

    s = sub.add_parser("calibrate", help="blur(s) + events -> threshold c")
    s.add_argument("blur", nargs="+", help="one blurry frame, or several adjacent ones")
    s.add_argument("--events", required=True, help="event file")
    s.add_argument("--c-min", type=float, default=0.05, help="search lower bound (default 0.05)")
    s.add_argument("--c-max", type=float, default=0.5, help="search upper bound (default 0.5)")
    s.add_argument("--grid", type=int, default=20, help="grid points (default 20)")
    s.add_argument("--eps", type=float, default=0.01, help="log offset (default 0.01)")
    s.add_argument("--samples", type=int, default=49, help="outer-integral nodes (default 49)")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("dataset", help="recipe -> dataset tree")
    s.add_argument("-o", "--output", required=True, help="dataset root")
    s.add_argument("--video", default=None, help="source video dir (default: synthetic scene)")
    s.add_argument("--hr-size", default="64x64", help="HR crop WxH (default 64x64)")
    s.add_argument("--ratio", type=int, default=4, help="spatial ratio R (default 4)")
    s.add_argument("--frames", type=int, default=49, help="frames per blur S (default 49)")
    s.add_argument("--scale", type=int, default=2, help="temporal scale M (default 2)")
    s.add_argument("--windows", type=int, default=2, help="synthetic scene length in windows (default 2)")
    s.add_argument("--c", type=float, default=0.2, help="event threshold (default 0.2)")
    s.add_argument("--eps", type=float, default=0.01, help="log offset (default 0.01)")
    s.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("eval", help="restored dir + ground-truth dir -> quality tables")
    s.add_argument("restored", help="directory of restored PNM frames")
    s.add_argument("truth", help="directory of ground-truth PNM frames")
    s.add_argument("--method", default="EDI", help="row label (default EDI)")
    s.add_argument("--scale", default="R=1", help="column-group label (default R=1)")
    s.add_argument("--csv", default=None, help="also write the table as CSV")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("check", help="run the property suite on synthetic data")
    s.add_argument("--seed", type=int, default=0, help="scene seed (default 0)")
    s.add_argument("--dataset", default=None, help="also validate an existing dataset root")
    s.set_defaults(func=cmd_check)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no subcommand given (see --help)")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except errors.InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (errors.DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
