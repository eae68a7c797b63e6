"""Shared synthetic-data builders for the test suite."""

import numpy as np
import pytest

from trimm.bvh import BvhClip, BvhJoint

# collected by the acceptance tests, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion_report():
    def report(name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def make_skeleton() -> list[BvhJoint]:
    """Four-bone test skeleton: positioned root, two children, end site."""
    return [
        BvhJoint("Hips", None, np.zeros(3),
                 ("Xposition", "Yposition", "Zposition",
                  "Zrotation", "Xrotation", "Yrotation")),
        BvhJoint("Spine", 0, np.array([0.0, 10.0, 0.0]),
                 ("Zrotation", "Xrotation", "Yrotation")),
        BvhJoint("Head", 1, np.array([0.0, 15.0, 0.0]),
                 ("Zrotation", "Xrotation", "Yrotation")),
        BvhJoint("Head_end", 2, np.array([0.0, 8.0, 0.0]), (), True),
    ]


def make_clip(seed: int, seconds: float, fps: int = 60) -> BvhClip:
    """Smooth random motion on the test skeleton.

    Channels are sums of low-frequency sinusoids, so rotations stay far
    from gimbal lock and resampling is well behaved.
    """
    rng = np.random.default_rng(seed)
    joints = make_skeleton()
    n = max(2, int(round(seconds * fps)))
    t = np.arange(n) / fps
    frames = np.zeros((n, 12))
    for col in range(12):
        amp = 40.0 if col >= 3 else 5.0
        base = 0.0 if col >= 3 else (90.0 if col == 1 else 0.0)
        frames[:, col] = base
        for _ in range(3):
            freq = rng.uniform(0.2, 1.5)
            phase = rng.uniform(0, 2 * np.pi)
            frames[:, col] += rng.uniform(0.2, 1.0) * amp / 3 * np.sin(
                2 * np.pi * freq * t + phase
            )
    return BvhClip(joints=joints, frame_time=1.0 / fps, frames=frames)


def write_library(tmp_path, count: int = 8, seed: int = 0, fps: int = 60):
    """A directory of clip files with varied durations; returns the paths."""
    from trimm.bvh import write_bvh

    rng = np.random.default_rng(seed)
    lib = tmp_path / "library"
    lib.mkdir(exist_ok=True)
    paths = []
    for i in range(count):
        seconds = float(rng.uniform(1.2, 4.0))
        clip = make_clip(seed * 1000 + i, seconds, fps)
        path = lib / f"take_{i:03d}.bvh"
        path.write_text(write_bvh(clip))
        paths.append(path)
    return lib, paths


def random_unit_quaternion(rng) -> "UnitQuaternion":
    from trimm.rotation import UnitQuaternion

    v = rng.standard_normal(4)
    v /= np.linalg.norm(v)
    return UnitQuaternion(*v)
