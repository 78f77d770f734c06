"""Video frame access: PPM parsing, regions of interest, channel averaging.

Frames arrive as binary PPM (P6) files, one per video frame. A sidecar CSV maps
frame indices to face boxes; gaps reuse the last known box, the way a tracker
coasts through a missed detection.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

from .errors import BoundsError, ConfigError, ParseError

CHANNELS = {"R": 0, "G": 1, "B": 2}


@dataclass(frozen=True)
class Roi:
    """Pixel-aligned box; (x, y) is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise BoundsError(f"roi has empty extent: w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0:
            raise BoundsError(f"roi origin out of range: x={self.x} y={self.y}")


@dataclass(frozen=True)
class Frame:
    """Interleaved 8-bit RGB, row-major."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        expect = self.width * self.height * 3
        if self.width <= 0 or self.height <= 0:
            raise BoundsError(f"frame has empty extent: {self.width}x{self.height}")
        if len(self.pixels) != expect:
            raise BoundsError(
                f"pixel buffer holds {len(self.pixels)} bytes, expected {expect}"
            )


def _skip_ppm_whitespace(data: bytes, pos: int) -> int:
    """Advance past whitespace and # comments, per the netpbm grammar."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in b" \t\r\n\x0b\x0c":
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    return pos


def _read_ppm_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    pos = _skip_ppm_whitespace(data, pos)
    start = pos
    while pos < len(data) and data[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise ParseError(f"expected {what} in ppm header", offset=start)
    return int(data[start:pos]), pos


def parse_ppm(data: bytes) -> Frame:
    """Parse one binary PPM (P6) image.

    Only maxval 255 is accepted. Raises ParseError naming the byte offset of
    whatever went wrong.
    """
    if data[:2] != b"P6":
        raise ParseError("not a P6 ppm (bad magic)", offset=0)
    width, pos = _read_ppm_int(data, 2, "width")
    height, pos = _read_ppm_int(data, pos, "height")
    maxval, pos = _read_ppm_int(data, pos, "maxval")
    if width <= 0 or height <= 0:
        raise ParseError(f"bad dimensions {width}x{height}", offset=2)
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval}, want 255", offset=pos)
    if pos >= len(data) or data[pos : pos + 1] not in b" \t\r\n":
        raise ParseError("missing whitespace after maxval", offset=pos)
    pos += 1
    expect = width * height * 3
    payload = data[pos : pos + expect]
    if len(payload) < expect:
        raise ParseError(
            f"truncated pixel data, have {len(payload)} of {expect} bytes",
            offset=pos + len(payload),
        )
    return Frame(width, height, bytes(payload))


def serialize_ppm(frame: Frame) -> bytes:
    return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + frame.pixels


def mean_channel(frame: Frame, roi: Roi, channel: str = "G") -> float:
    """Average one color channel over a box.

    The sum is integer-exact, so the result is the exact rational mean rendered
    in floating point. The box must lie fully inside the frame.
    """
    try:
        ch = CHANNELS[channel]
    except KeyError:
        raise ConfigError(f"unknown channel {channel!r}, want one of R, G, B") from None
    if roi.x + roi.w > frame.width or roi.y + roi.h > frame.height:
        raise BoundsError(
            f"roi {roi} exceeds frame {frame.width}x{frame.height}"
        )
    total = 0
    row_bytes = frame.width * 3
    x0 = roi.x * 3 + ch
    for row in range(roi.y, roi.y + roi.h):
        base = row * row_bytes + x0
        total += sum(frame.pixels[base : base + roi.w * 3 : 3])
    return total / (roi.w * roi.h)


def read_roi_sidecar(path) -> dict[int, Roi]:
    """Read the frame_index,x,y,w,h sidecar. Returns {frame_index: Roi}."""
    out: dict[int, Roi] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["frame_index", "x", "y", "w", "h"]:
            raise ParseError("bad roi sidecar header, want frame_index,x,y,w,h",
                             line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                idx, x, y, w, h = (int(c) for c in row)
            except ValueError:
                raise ParseError(f"bad roi row {row!r}", line=lineno, path=path) from None
            if idx < 0:
                raise ParseError(f"negative frame index {idx}", line=lineno, path=path)
            out[idx] = Roi(x, y, w, h)
    if not out:
        raise ParseError("roi sidecar has no rows", path=path)
    return out


def roi_track(sidecar: dict[int, Roi], n_frames: int) -> list[Roi]:
    """Resolve a box for every frame index, coasting over gaps.

    A frame before the first sidecar entry has no box to coast from; that is a
    configuration error.
    """
    track = []
    last = None
    for i in range(n_frames):
        last = sidecar.get(i, last)
        if last is None:
            raise ConfigError(f"frame {i} precedes the first roi sidecar entry")
        track.append(last)
    return track
