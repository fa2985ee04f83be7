import os

import numpy as np
import pytest

from conftest import random_frames
from rdbench.mediaio import (FrameBuffer, MediaError, VideoReader, VideoSpec, VideoWriter, parse_fps,
                             probe_stream, read_frame, write_video)


@pytest.mark.parametrize("bit_depth", [8, 10])
@pytest.mark.parametrize("ext", [".yuv", ".y4m"])
def test_round_trip_bit_exact(tmp_path, bit_depth, ext):
    spec = VideoSpec(32, 16, bit_depth, 30000, 1001)
    frames = random_frames(spec, 3, seed=bit_depth)
    path = tmp_path / f"v{ext}"
    out = write_video(frames, path)
    assert out.frame_count == 3
    with VideoReader(path, None if ext == ".y4m" else spec) as r:
        assert r.spec.geometry() == spec.geometry()
        assert len(r) == 3
        assert list(r) == frames
    # write what we read: identical bytes
    again = tmp_path / f"w{ext}"
    with VideoReader(path, None if ext == ".y4m" else spec) as r:
        write_video(r, again)
    assert again.read_bytes() == path.read_bytes()


def test_raw_10bit_is_little_endian_16bit(tmp_path):
    spec = VideoSpec(2, 2, 10)
    f = FrameBuffer.filled(spec, 0x3FF, 1, 2)
    path = tmp_path / "a.yuv"
    write_video([f], path)
    data = path.read_bytes()
    assert len(data) == spec.frame_size_bytes == 12
    assert data[:2] == b"\xff\x03"
    assert data[8:10] == b"\x01\x00"


def test_frame_size_formula():
    assert VideoSpec(7680, 4320, 10).frame_size_bytes == 7680 * 4320 * 3
    assert VideoSpec(3840, 2160, 8).frame_size_bytes == 3840 * 2160 * 3 // 2


def test_y4m_header_values(tmp_path):
    spec = VideoSpec(16, 8, 10, 60000, 1001)
    path = tmp_path / "h.y4m"
    write_video(random_frames(spec, 1), path)
    head = path.read_bytes().split(b"\n", 1)[0]
    assert head == b"YUV4MPEG2 W16 H8 F60000:1001 Ip A1:1 C420p10"
    assert probe_stream(path) == spec.with_frames(1)


@pytest.mark.parametrize("kw", [dict(width=3, height=2), dict(width=2, height=2, bit_depth=12),
                                dict(width=0, height=2), dict(width=2, height=2, fps_den=0),
                                dict(width=2, height=2, chroma="444")])
def test_invalid_specs(kw):
    with pytest.raises(MediaError):
        VideoSpec(**kw)


def test_sample_range_checked():
    spec = VideoSpec(2, 2, 10)
    with pytest.raises(MediaError):
        FrameBuffer.filled(spec, 1024)


def test_planes_read_only():
    f = FrameBuffer.filled(VideoSpec(4, 4), 7)
    with pytest.raises(ValueError):
        f.y[0, 0] = 1


def test_raw_size_must_divide(tmp_path):
    path = tmp_path / "bad.yuv"
    path.write_bytes(b"\0" * 100)
    with pytest.raises(MediaError, match="multiple of the frame size"):
        VideoReader(path, VideoSpec(4, 4))


def test_raw_needs_geometry(tmp_path):
    path = tmp_path / "x.yuv"
    path.write_bytes(b"\0" * 24)
    with pytest.raises(MediaError, match="width/height"):
        probe_stream(path)


def test_truncated_y4m(tmp_path):
    spec = VideoSpec(8, 8)
    path = tmp_path / "t.y4m"
    write_video(random_frames(spec, 2), path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(MediaError, match="truncated"):
        VideoReader(path)


def test_random_access_and_out_of_range(tmp_path):
    spec = VideoSpec(8, 4)
    frames = random_frames(spec, 5, seed=3)
    path = tmp_path / "r.y4m"
    write_video(frames, path)
    assert read_frame(path, 3) == frames[3]
    with VideoReader(path) as r:
        assert r.read_frame(0) == frames[0]
        with pytest.raises(IndexError):
            r.read_frame(5)


def test_mixed_specs_rejected(tmp_path):
    a = FrameBuffer.filled(VideoSpec(4, 4), 1)
    b = FrameBuffer.filled(VideoSpec(8, 4), 1)
    path = tmp_path / "m.y4m"
    with pytest.raises(MediaError, match="mixed"):
        write_video([a, b], path)
    assert not path.exists()
    assert not os.path.exists(f"{path}.part")


def test_empty_sequence_rejected(tmp_path):
    with pytest.raises(MediaError):
        write_video([], tmp_path / "e.y4m")
    with pytest.raises(MediaError):
        with VideoWriter(tmp_path / "e2.yuv"):
            pass


def test_interlaced_rejected(tmp_path):
    path = tmp_path / "i.y4m"
    path.write_bytes(b"YUV4MPEG2 W4 H4 F25:1 It C420jpeg\nFRAME\n" + b"\0" * 24)
    with pytest.raises(MediaError, match="interlaced"):
        VideoReader(path)


@pytest.mark.parametrize("text,expected", [("60", (60, 1)), ("60000/1001", (60000, 1001)),
                                           ("25:1", (25, 1)), ("59.94", (5994, 100))])
def test_parse_fps(text, expected):
    num, den = parse_fps(text)
    assert num * expected[1] == den * expected[0]


def test_frame_equality():
    spec = VideoSpec(4, 4)
    a = FrameBuffer.filled(spec, 5)
    b = FrameBuffer.filled(spec, 5)
    c = FrameBuffer.filled(spec, 6)
    assert a == b and a != c
    assert np.array_equal(FrameBuffer.from_bytes(a.to_bytes(), spec).y, a.y)
