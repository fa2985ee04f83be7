import os
import stat
import sys
import textwrap

import numpy as np
import pytest

from rdbench.mediaio import FrameBuffer, VideoSpec, write_video


def textured_frames(spec, n, seed=0, motion=2):
    """Smooth moving pattern plus mild noise; codec-friendly but not flat."""
    rng = np.random.default_rng(seed)
    h, w = spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w]
    scale = spec.max_value / 255
    out = []
    for t in range(n):
        y = 128 + 60 * np.sin((xx + motion * t) / 9.0) * np.cos(yy / 7.0) + rng.normal(0, 4, (h, w))
        ch, cw = spec.chroma_shape
        cy, cx = np.mgrid[0:ch, 0:cw]
        u = 128 + 20 * np.sin((cx + t) / 5.0)
        v = 128 + 20 * np.cos(cy / 4.0)
        planes = [np.clip(np.rint(p * scale), 0, spec.max_value).astype(spec.dtype) for p in (y, u, v)]
        out.append(FrameBuffer(*planes, spec))
    return out


def random_frames(spec, n, seed=0):
    rng = np.random.default_rng(seed)
    ch = spec.chroma_shape
    return [
        FrameBuffer(
            rng.integers(0, spec.max_value + 1, (spec.height, spec.width)).astype(spec.dtype),
            rng.integers(0, spec.max_value + 1, ch).astype(spec.dtype),
            rng.integers(0, spec.max_value + 1, ch).astype(spec.dtype),
            spec,
        )
        for _ in range(n)
    ]


@pytest.fixture
def make_video(tmp_path):
    def make(name="seq.y4m", width=64, height=32, frames=4, bit_depth=8, seed=0, kind="textured"):
        spec = VideoSpec(width, height, bit_depth, 60, 1)
        gen = textured_frames if kind == "textured" else random_frames
        path = tmp_path / name
        write_video(gen(spec, frames, seed), path)
        return str(path)

    return make


@pytest.fixture
def make_tool(tmp_path):
    """Write an executable Python script; returns its absolute path."""

    def make(name, body):
        path = tmp_path / "bin" / name
        path.parent.mkdir(exist_ok=True)
        path.write_text(f"#!{sys.executable}\n" + textwrap.dedent(body))
        path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
        return str(path)

    return make


# --- acceptance summary -----------------------------------------------------

_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE.append((marker.args[0], marker.args[1], report.outcome))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, outcome in sorted(_ACCEPTANCE):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status}  {title}")


os.environ.setdefault("RDBENCH_BACKEND", "numba")
