"""File formats: binary PNM frames, event files, EGER tensors, video dirs."""
from __future__ import annotations

import os
import re
import struct
from pathlib import Path

import numpy as np

from . import errors
from .core import BlurryFrame, EventStream, TimeInterval, check_image

EVENT_MAGIC = b"EVT1"
EVENT_HEADER = struct.Struct("<4sIII")
EVENT_RECORD = np.dtype([("t", "<f8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
assert EVENT_RECORD.itemsize == 13

EGER_MAGIC = b"EGR1"
EGER_HEADER = struct.Struct("<4sIIIdddd")


# --------------------------------------------------------------------- PNM

def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_pnm(path, image, comments=()) -> None:
    """Write an 8-bit P5 (gray) or P6 (color) file; values are clamped to [0, 1]."""
    data = to_uint8(check_image(image))
    magic = b"P6" if data.ndim == 3 else b"P5"
    h, w = data.shape[:2]
    header = [magic]
    for c in comments:
        if "\n" in c:
            raise ValueError("PNM comments must be single-line")
        header.append(b"# " + c.encode("ascii"))
    header.append(f"{w} {h}".encode())
    header.append(b"255")
    with open(path, "wb") as f:
        f.write(b"\n".join(header) + b"\n")
        f.write(data.tobytes())


def _pnm_tokens(buf: bytes):
    """Yield (token, end offset) from a PNM header, collecting comments."""
    pos = 0
    comments = []
    tokens = []
    while len(tokens) < 4:
        if pos >= len(buf):
            raise errors.FormatError("truncated PNM header")
        ch = buf[pos:pos + 1]
        if ch == b"#":
            end = buf.find(b"\n", pos)
            if end < 0:
                raise errors.FormatError("unterminated PNM comment")
            comments.append(buf[pos + 1:end].decode("ascii", "replace").strip())
            pos = end + 1
        elif ch.isspace():
            pos += 1
        else:
            m = re.compile(rb"\S+").match(buf, pos)
            tokens.append(m.group(0))
            pos = m.end()
    # exactly one whitespace byte separates the header from the raster
    return tokens, comments, pos + 1


def read_pnm_with_comments(path) -> tuple[np.ndarray, list[str]]:
    path = Path(path)
    if not path.exists():
        raise errors.MissingFile(str(path))
    buf = path.read_bytes()
    tokens, comments, offset = _pnm_tokens(buf)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise errors.FormatError(f"{path}: unsupported PNM type {magic!r}")
    try:
        w, h, maxval = (int(v) for v in tokens[1:4])
    except ValueError as exc:
        raise errors.FormatError(f"{path}: bad PNM header") from exc
    if maxval != 255:
        raise errors.FormatError(f"{path}: only maxval 255 is supported")
    ch = 3 if magic == b"P6" else 1
    n = w * h * ch
    raster = buf[offset:offset + n]
    if len(raster) != n:
        raise errors.FormatError(f"{path}: truncated raster")
    data = np.frombuffer(raster, dtype=np.uint8).reshape((h, w, ch) if ch == 3 else (h, w))
    return data.astype(np.float64) / 255.0, comments


def read_pnm(path) -> np.ndarray:
    return read_pnm_with_comments(path)[0]


def write_blurry_frame(path, frame: BlurryFrame) -> None:
    """PNM with the exposure recorded in a header comment."""
    write_pnm(path, frame.image, comments=[f"exposure={frame.exposure}"])


def read_blurry_frame(path, exposure: TimeInterval | None = None) -> BlurryFrame:
    image, comments = read_pnm_with_comments(path)
    if exposure is None:
        for c in comments:
            if c.startswith("exposure="):
                exposure = TimeInterval.parse(c.split("=", 1)[1])
                break
    if exposure is None:
        raise errors.FormatError(f"{path}: no exposure comment and none given")
    return BlurryFrame(image, exposure)


# ------------------------------------------------------------------ events

def write_events(path, stream: EventStream) -> None:
    """Binary ``EVT1`` event file."""
    rec = np.empty(len(stream), dtype=EVENT_RECORD)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.p
    with open(path, "wb") as f:
        f.write(EVENT_HEADER.pack(EVENT_MAGIC, stream.width, stream.height, len(stream)))
        f.write(rec.tobytes())


def write_events_csv(path, stream: EventStream) -> None:
    with open(path, "w") as f:
        f.write("t,x,y,p\n")
        for ev in stream:
            f.write(f"{ev.t!r},{ev.x},{ev.y},{ev.p}\n")


def _span_for(t: np.ndarray, span):
    if span is not None:
        return span
    if len(t) == 0:
        return TimeInterval(0.0, 0.0)
    return TimeInterval(float(t.min()), float(t.max()))


def read_events(path, span: TimeInterval | None = None, width=None, height=None) -> EventStream:
    """Read a binary ``EVT1`` or ``t,x,y,p`` CSV event file.

    The binary header does not carry a time span; without ``span`` the
    result spans the first to the last timestamp. CSV files carry no
    sensor size, so ``width``/``height`` default to the coordinate maxima + 1.
    A zero-byte file reads as an empty CSV.
    """
    path = Path(path)
    if not path.exists():
        raise errors.MissingFile(str(path))
    with open(path, "rb") as f:
        head = f.read(4)
    if head == EVENT_MAGIC:
        buf = path.read_bytes()
        if len(buf) < EVENT_HEADER.size:
            raise errors.FormatError(f"{path}: truncated header")
        _, w, h, count = EVENT_HEADER.unpack_from(buf)
        body = buf[EVENT_HEADER.size:]
        if len(body) != count * EVENT_RECORD.itemsize:
            raise errors.FormatError(
                f"{path}: expected {count} records, found {len(body)} bytes of payload"
            )
        rec = np.frombuffer(body, dtype=EVENT_RECORD)
        return EventStream(rec["t"], rec["x"], rec["y"], rec["p"], w, h, _span_for(rec["t"], span))
    return _read_events_csv(path, span, width, height)


def _read_events_csv(path, span, width, height) -> EventStream:
    with open(path) as f:
        header = f.readline().strip().replace(" ", "")
        if header not in ("t,x,y,p", ""):
            raise errors.FormatError(f"{path}: not an EVT1 file or 't,x,y,p' CSV")
        body = f.read()
    try:
        rows = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2) if body.strip() else np.empty((0, 4))
    except ValueError as exc:
        raise errors.FormatError(f"{path}: {exc}") from exc
    if rows.shape[1] != 4:
        raise errors.FormatError(f"{path}: expected 4 columns")
    x = rows[:, 1].astype(np.int64)
    y = rows[:, 2].astype(np.int64)
    w = width if width is not None else (int(x.max()) + 1 if len(x) else 0)
    h = height if height is not None else (int(y.max()) + 1 if len(y) else 0)
    return EventStream(rows[:, 0], x, y, rows[:, 3].astype(np.int8), w, h, _span_for(rows[:, 0], span))


# -------------------------------------------------------------------- EGER

def write_eger(path, tensor) -> None:
    n, c, h, w = tensor.n_bins, *tensor.data.shape
    header = EGER_HEADER.pack(
        EGER_MAGIC, n, h, w,
        tensor.parent.start, tensor.parent.end, tensor.target.start, tensor.target.end,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())


def read_eger(path):
    from .eger import EgerTensor

    buf = Path(path).read_bytes()
    if len(buf) < EGER_HEADER.size or buf[:4] != EGER_MAGIC:
        raise errors.FormatError(f"{path}: not an EGR1 file")
    _, n, h, w, ps, pe, ts, te = EGER_HEADER.unpack_from(buf)
    body = np.frombuffer(buf[EGER_HEADER.size:], dtype="<f4")
    if body.size != 6 * n * h * w:
        raise errors.FormatError(f"{path}: payload size mismatch")
    return EgerTensor(body.reshape(6 * n, h, w).astype(np.float32), n, TimeInterval(ps, pe), TimeInterval(ts, te))


# ---------------------------------------------------------------- video dir

PNM_SUFFIXES = (".pgm", ".ppm", ".pnm")


def read_video_dir(path):
    """Load a directory of PNM frames plus ``timestamps.txt``."""
    from .simulator import SharpVideo

    path = Path(path)
    if not path.is_dir():
        raise errors.MissingFile(f"{path}: not a directory")
    names = sorted(n for n in os.listdir(path) if n.lower().endswith(PNM_SUFFIXES))
    ts_file = path / "timestamps.txt"
    if not ts_file.exists():
        raise errors.MissingFile(str(ts_file))
    try:
        stamps = [float(line) for line in ts_file.read_text().split()]
    except ValueError as exc:
        raise errors.FormatError(f"{ts_file}: {exc}") from exc
    if len(stamps) != len(names):
        raise errors.FormatError(f"{len(names)} frames but {len(stamps)} timestamps")
    frames = [read_pnm(path / n) for n in names]
    return SharpVideo(frames, stamps)


def write_video_dir(path, video) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    ext = ".ppm" if video.frames[0].ndim == 3 else ".pgm"
    digits = max(6, len(str(len(video.frames))))
    for i, frame in enumerate(video.frames):
        write_pnm(path / f"{i:0{digits}d}{ext}", frame)
    (path / "timestamps.txt").write_text("".join(f"{float(t)!r}\n" for t in video.timestamps))
