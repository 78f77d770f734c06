from __future__ import annotations

import numpy as np
import pytest

from pulseboard.errors import BoundsError, ConfigError, ParseError
from pulseboard.frames import (
    Frame,
    Roi,
    mean_channel,
    parse_ppm,
    read_roi_sidecar,
    roi_track,
    serialize_ppm,
)


def _random_frame(rng, w=32, h=24):
    return Frame(w, h, bytes(rng.integers(0, 256, w * h * 3, dtype=np.uint8)))


def test_ppm_round_trip():
    rng = np.random.default_rng(1)
    f = _random_frame(rng)
    assert parse_ppm(serialize_ppm(f)) == f


def test_ppm_header_comments_and_whitespace():
    body = bytes(range(12))
    data = b"P6 # cam0\n# frame dump\n 2\t2\n# maxval next\n255\n" + body
    f = parse_ppm(data)
    assert (f.width, f.height) == (2, 2)
    assert f.pixels == body


def test_ppm_bad_magic_names_offset():
    with pytest.raises(ParseError, match="offset 0"):
        parse_ppm(b"P5\n2 2\n255\n" + bytes(12))


def test_ppm_wrong_maxval_rejected():
    with pytest.raises(ParseError, match="maxval"):
        parse_ppm(b"P6\n2 2\n65535\n" + bytes(24))


def test_ppm_truncated_payload_names_offset():
    data = b"P6\n2 2\n255\n" + bytes(7)
    with pytest.raises(ParseError, match=r"truncated.*offset 18") as ei:
        parse_ppm(data)
    assert ei.value.offset == len(data)


def test_ppm_missing_header_field():
    with pytest.raises(ParseError, match="height"):
        parse_ppm(b"P6\n2\n")


def test_mean_channel_exact_small_case():
    # 2x2 green values 10, 20, 30, 41 -> exact mean 101/4
    px = bytearray(12)
    for i, g in enumerate((10, 20, 30, 41)):
        px[i * 3 + 1] = g
    f = Frame(2, 2, bytes(px))
    assert mean_channel(f, Roi(0, 0, 2, 2), "G") == 25.25


def test_mean_channel_matches_pixel_loop():
    rng = np.random.default_rng(7)
    f = _random_frame(rng)
    for _ in range(20):
        x = int(rng.integers(0, f.width - 1))
        y = int(rng.integers(0, f.height - 1))
        w = int(rng.integers(1, f.width - x + 1))
        h = int(rng.integers(1, f.height - y + 1))
        for ch, off in (("R", 0), ("G", 1), ("B", 2)):
            total = 0
            for yy in range(y, y + h):
                for xx in range(x, x + w):
                    total += f.pixels[(yy * f.width + xx) * 3 + off]
            assert mean_channel(f, Roi(x, y, w, h), ch) == total / (w * h)


def test_mean_channel_roi_out_of_bounds():
    f = _random_frame(np.random.default_rng(0), 8, 8)
    with pytest.raises(BoundsError):
        mean_channel(f, Roi(4, 4, 8, 2))
    with pytest.raises(ConfigError):
        mean_channel(f, Roi(0, 0, 2, 2), "X")


def test_roi_validation():
    with pytest.raises(BoundsError):
        Roi(0, 0, 0, 5)
    with pytest.raises(BoundsError):
        Roi(-1, 0, 5, 5)


def test_frame_payload_length_checked():
    with pytest.raises(BoundsError):
        Frame(2, 2, bytes(11))


def test_roi_sidecar_gap_reuses_last_box(tmp_path):
    p = tmp_path / "roi.csv"
    p.write_text("frame_index,x,y,w,h\n0,1,2,3,4\n3,5,6,7,8\n")
    sidecar = read_roi_sidecar(p)
    track = roi_track(sidecar, 5)
    assert track == [Roi(1, 2, 3, 4)] * 3 + [Roi(5, 6, 7, 8)] * 2


def test_roi_sidecar_missing_leading_entry(tmp_path):
    p = tmp_path / "roi.csv"
    p.write_text("frame_index,x,y,w,h\n2,1,1,4,4\n")
    with pytest.raises(ConfigError, match="frame 0"):
        roi_track(read_roi_sidecar(p), 4)


def test_roi_sidecar_bad_rows(tmp_path):
    p = tmp_path / "roi.csv"
    p.write_text("frame,x,y,w,h\n0,1,1,4,4\n")
    with pytest.raises(ParseError, match="line 1"):
        read_roi_sidecar(p)
    p.write_text("frame_index,x,y,w,h\n0,1,one,4,4\n")
    with pytest.raises(ParseError, match="line 2"):
        read_roi_sidecar(p)
