"""Netpbm graymap/pixmap reading and writing (P2, P3, P5, P6).

Samples are scaled to [0, 1] by maxval on read. On write, values are clamped
to [0, 1] and quantised with round-half-to-even ``round(v * maxval)``. Binary
rasters use one byte per sample for maxval < 256 and two big-endian bytes
otherwise.
"""

from __future__ import annotations

import numpy as np

from .core import PostsampleError, ShapeError, Signal

_WS = b" \t\n\r\v\f"
_CHANNELS = {b"P2": 1, b"P5": 1, b"P3": 3, b"P6": 3}


class PNMError(PostsampleError, ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class MalformedHeaderError(PNMError):
    pass


class TruncatedPayloadError(PNMError):
    def __init__(self, expected: int, actual: int, offset: int):
        super().__init__(f"truncated payload: expected {expected} bytes, got {actual}", offset)
        self.expected = expected
        self.actual = actual


class InvalidMaxvalError(PNMError):
    pass


class BadSampleError(PNMError):
    pass


def _skip_ws_and_comments(data: bytes, pos: int) -> int:
    n = len(data)
    while pos < n:
        ch = data[pos]
        if ch in _WS:
            pos += 1
        elif ch == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    return pos


def _read_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    pos = _skip_ws_and_comments(data, pos)
    start = pos
    while pos < len(data) and data[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise MalformedHeaderError(f"expected {what}", start)
    return int(data[start:pos]), pos


def read_pnm(data: bytes) -> Signal:
    data = bytes(data)
    magic = data[:2]
    if magic not in _CHANNELS:
        raise MalformedHeaderError(f"unknown magic number {magic!r}", 0)
    channels = _CHANNELS[magic]
    pos = 2
    if pos < len(data) and data[pos] not in _WS and data[pos : pos + 1] != b"#":
        raise MalformedHeaderError("missing whitespace after magic number", pos)
    width, pos = _read_int(data, pos, "width")
    height, pos = _read_int(data, pos, "height")
    maxval_pos = _skip_ws_and_comments(data, pos)
    maxval, pos = _read_int(data, pos, "maxval")
    if width <= 0 or height <= 0:
        raise MalformedHeaderError(f"non-positive image size {width}x{height}", maxval_pos)
    if maxval == 0 or maxval > 65535:
        raise InvalidMaxvalError(f"maxval {maxval} outside 1..65535", maxval_pos)
    count = width * height * channels

    if magic in (b"P5", b"P6"):
        if pos >= len(data) or data[pos] not in _WS:
            raise MalformedHeaderError("expected single whitespace before raster", pos)
        pos += 1
        nbytes = 1 if maxval < 256 else 2
        need = count * nbytes
        avail = len(data) - pos
        if avail < need:
            raise TruncatedPayloadError(need, avail, pos)
        dtype = np.uint8 if nbytes == 1 else np.dtype(">u2")
        samples = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.int64)
        if samples.size and samples.max() > maxval:
            bad = int(np.argmax(samples > maxval))
            raise BadSampleError(f"sample {samples[bad]} exceeds maxval {maxval}", pos + bad * nbytes)
    else:
        samples = np.empty(count, dtype=np.int64)
        for k in range(count):
            start = _skip_ws_and_comments(data, pos)
            if start >= len(data):
                raise TruncatedPayloadError(count, k, start)
            v, pos = _read_int(data, pos, "sample")
            if v > maxval:
                raise BadSampleError(f"sample {v} exceeds maxval {maxval}", start)
            samples[k] = v
    return Signal(samples / float(maxval), (height, width, channels))


def quantize(sig: Signal, maxval: int = 255) -> np.ndarray:
    return np.rint(np.clip(sig.values, 0.0, 1.0) * maxval).astype(np.int64)


def write_pnm(sig: Signal, binary: bool = True, maxval: int = 255) -> bytes:
    if sig.channels not in (1, 3):
        raise ShapeError(f"PNM supports 1 or 3 channels, got {sig.channels}")
    if not 1 <= int(maxval) <= 65535:
        raise InvalidMaxvalError(f"maxval {maxval} outside 1..65535", 0)
    maxval = int(maxval)
    gray = sig.channels == 1
    magic = (b"P5" if gray else b"P6") if binary else (b"P2" if gray else b"P3")
    header = b"%s\n%d %d\n%d\n" % (magic, sig.width, sig.height, maxval)
    q = quantize(sig, maxval)
    if binary:
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        return header + q.astype(dtype).tobytes()
    row_len = sig.width * sig.channels
    rows = q.reshape(sig.height, row_len)
    body = b"".join(b" ".join(b"%d" % v for v in row) + b"\n" for row in rows)
    return header + body


def load(path) -> Signal:
    with open(path, "rb") as fh:
        return read_pnm(fh.read())


def save(path, sig: Signal, binary: bool = True, maxval: int = 255) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pnm(sig, binary, maxval))
