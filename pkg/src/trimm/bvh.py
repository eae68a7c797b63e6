"""BVH 1.0 motion file parsing, writing, resampling and segmentation.

Covers the BEAT/ZEGGS corpus dialect: HIERARCHY / ROOT / JOINT / End Site /
MOTION / Frames: / Frame Time: keywords with whitespace-separated frame
rows. Units pass through unmodified (degrees / centimeters as authored).
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .blend import Pose, slerp
from .rotation import UnitQuaternion, euler_to_quaternion, quaternion_to_euler

log = logging.getLogger(__name__)

POSITION_CHANNELS = ("Xposition", "Yposition", "Zposition")
ROTATION_CHANNELS = ("Xrotation", "Yrotation", "Zrotation")
_VALID_CHANNELS = set(POSITION_CHANNELS) | set(ROTATION_CHANNELS)

MIN_SEGMENT_SECONDS = 0.8
MAX_SEGMENT_SECONDS = 20.0


class BvhParseError(ValueError):
    """Malformed BVH input; message carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class BvhJoint:
    name: str
    parent_index: int | None
    offset: np.ndarray
    channels: tuple[str, ...]
    is_end_site: bool = False

    @property
    def rotation_order(self) -> str:
        """Channel-order permutation of XYZ, e.g. 'ZXY'."""
        return "".join(ch[0] for ch in self.channels if ch.endswith("rotation"))

    @property
    def rotation_channel_offsets(self) -> list[int]:
        return [i for i, ch in enumerate(self.channels) if ch.endswith("rotation")]

    @property
    def position_channel_offsets(self) -> list[int]:
        return [i for i, ch in enumerate(self.channels) if ch.endswith("position")]


@dataclass
class BvhClip:
    joints: list[BvhJoint]
    frame_time: float
    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError("frames must be a 2-D matrix")
        if self.frame_time <= 0:
            raise ValueError("frame_time must be positive")
        if self.num_frames < 1:
            raise ValueError("clip needs at least one frame")
        if self.frames.shape[1] != self.total_channels:
            raise ValueError(
                f"frame width {self.frames.shape[1]} != declared channels {self.total_channels}"
            )

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def total_channels(self) -> int:
        return sum(len(j.channels) for j in self.joints)

    @property
    def duration(self) -> float:
        return self.num_frames * self.frame_time

    def channel_start(self, joint_index: int) -> int:
        return sum(len(j.channels) for j in self.joints[:joint_index])

    def animated_joint_indices(self) -> list[int]:
        return [i for i, j in enumerate(self.joints) if j.channels]

    def copy(self) -> "BvhClip":
        return BvhClip(list(self.joints), self.frame_time, self.frames.copy())


# ---------------------------------------------------------------------------
# parsing


class _Lines:
    def __init__(self, stream: TextIO):
        self.lines = stream.read().splitlines()
        self.pos = 0

    def next_tokens(self) -> tuple[list[str], int]:
        while self.pos < len(self.lines):
            self.pos += 1
            tokens = self.lines[self.pos - 1].split()
            if tokens:
                return tokens, self.pos
        return [], self.pos

    def peek_tokens(self) -> tuple[list[str], int]:
        save = self.pos
        tokens, line = self.next_tokens()
        self.pos = save
        return tokens, line


def parse_bvh(source: str | TextIO) -> BvhClip:
    """Parse BVH text into a clip; values kept exactly as parsed decimals."""
    stream = io.StringIO(source) if isinstance(source, str) else source
    lines = _Lines(stream)

    tokens, ln = lines.next_tokens()
    if tokens != ["HIERARCHY"]:
        raise BvhParseError("expected HIERARCHY header", ln)

    joints: list[BvhJoint] = []
    stack: list[int] = []  # joint indices whose blocks are open

    def parse_offset() -> np.ndarray:
        toks, line = lines.next_tokens()
        if not toks or toks[0] != "OFFSET" or len(toks) != 4:
            raise BvhParseError("expected OFFSET with 3 values", line)
        try:
            return np.array([float(v) for v in toks[1:]], dtype=np.float64)
        except ValueError:
            raise BvhParseError(f"non-numeric OFFSET value in {toks[1:]}", line) from None

    def expect_open() -> None:
        toks, line = lines.next_tokens()
        if toks != ["{"]:
            raise BvhParseError("expected '{'", line)

    tokens, ln = lines.next_tokens()
    if not tokens or tokens[0] != "ROOT" or len(tokens) < 2:
        raise BvhParseError("expected ROOT <name>", ln)

    pending = ("ROOT", " ".join(tokens[1:]))
    while True:
        kind, name = pending
        parent = stack[-1] if stack else None
        expect_open()
        if kind == "END":
            offset = parse_offset()
            joints.append(
                BvhJoint(name=name, parent_index=parent, offset=offset, channels=(), is_end_site=True)
            )
        else:
            if kind == "ROOT" and parent is not None:
                raise BvhParseError("ROOT inside another joint", lines.pos)
            offset = parse_offset()
            toks, line = lines.next_tokens()
            if not toks or toks[0] != "CHANNELS" or len(toks) < 2:
                raise BvhParseError("expected CHANNELS", line)
            try:
                count = int(toks[1])
            except ValueError:
                raise BvhParseError(f"non-integer channel count {toks[1]!r}", line) from None
            names = tuple(toks[2:])
            if len(names) != count:
                raise BvhParseError(
                    f"CHANNELS declares {count} but lists {len(names)}", line
                )
            if count not in (3, 6):
                raise BvhParseError(f"unsupported channel count {count}", line)
            bad = [ch for ch in names if ch not in _VALID_CHANNELS]
            if bad:
                raise BvhParseError(f"unknown channel name {bad[0]!r}", line)
            joints.append(
                BvhJoint(name=name, parent_index=parent, offset=offset, channels=names)
            )
        stack.append(len(joints) - 1)

        # descend / close blocks until the next joint or MOTION
        while True:
            toks, line = lines.next_tokens()
            if not toks:
                raise BvhParseError("unexpected end of file inside HIERARCHY", line)
            if toks[0] == "}":
                stack.pop()
                if not stack:
                    toks, line = lines.next_tokens()
                    if toks != ["MOTION"]:
                        raise BvhParseError("expected MOTION after hierarchy", line)
                    return _parse_motion(lines, joints)
                continue
            if toks[0] == "JOINT":
                if len(toks) < 2:
                    raise BvhParseError("JOINT without a name", line)
                pending = ("JOINT", " ".join(toks[1:]))
                break
            if toks[0] == "End" and len(toks) >= 2 and toks[1] == "Site":
                parent_name = joints[stack[-1]].name
                pending = ("END", f"{parent_name}_end")
                break
            raise BvhParseError(f"unexpected token {toks[0]!r} in HIERARCHY", line)


def _parse_motion(lines: _Lines, joints: list[BvhJoint]) -> BvhClip:
    toks, ln = lines.next_tokens()
    if len(toks) != 2 or toks[0] != "Frames:":
        raise BvhParseError("expected 'Frames: <count>'", ln)
    try:
        num_frames = int(toks[1])
    except ValueError:
        raise BvhParseError(f"non-integer frame count {toks[1]!r}", ln) from None
    if num_frames < 1:
        raise BvhParseError("frame count must be >= 1", ln)

    toks, ln = lines.next_tokens()
    if len(toks) != 3 or toks[0] != "Frame" or toks[1] != "Time:":
        raise BvhParseError("expected 'Frame Time: <seconds>'", ln)
    try:
        frame_time = float(toks[2])
    except ValueError:
        raise BvhParseError(f"non-numeric frame time {toks[2]!r}", ln) from None
    if frame_time <= 0:
        raise BvhParseError("frame time must be positive", ln)

    width = sum(len(j.channels) for j in joints)
    frames = np.empty((num_frames, width), dtype=np.float64)
    for row in range(num_frames):
        toks, ln = lines.next_tokens()
        if not toks:
            raise BvhParseError(f"missing frame row {row + 1} of {num_frames}", ln)
        if len(toks) != width:
            raise BvhParseError(
                f"frame row has {len(toks)} values, hierarchy declares {width} channels", ln
            )
        try:
            frames[row] = [float(v) for v in toks]
        except ValueError:
            bad = next(v for v in toks if not _is_float(v))
            raise BvhParseError(f"non-numeric frame token {bad!r}", ln) from None
    return BvhClip(joints=joints, frame_time=frame_time, frames=frames)


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# writing


def write_bvh(clip: BvhClip) -> str:
    """Render a clip back to BVH text; parse(write(clip)) round-trips."""
    out: list[str] = ["HIERARCHY"]
    children: dict[int | None, list[int]] = {}
    for i, j in enumerate(clip.joints):
        children.setdefault(j.parent_index, []).append(i)

    def emit(idx: int, depth: int) -> None:
        j = clip.joints[idx]
        pad = "\t" * depth
        if j.is_end_site:
            out.append(f"{pad}End Site")
            out.append(f"{pad}{{")
            out.append(f"{pad}\tOFFSET {_fmt3(j.offset)}")
            out.append(f"{pad}}}")
            return
        kind = "ROOT" if j.parent_index is None else "JOINT"
        out.append(f"{pad}{kind} {j.name}")
        out.append(f"{pad}{{")
        out.append(f"{pad}\tOFFSET {_fmt3(j.offset)}")
        out.append(f"{pad}\tCHANNELS {len(j.channels)} {' '.join(j.channels)}")
        for child in children.get(idx, []):
            emit(child, depth + 1)
        out.append(f"{pad}}}")

    roots = children.get(None, [])
    if len(roots) != 1:
        raise ValueError(f"clip must have exactly one root, found {len(roots)}")
    emit(roots[0], 0)

    out.append("MOTION")
    out.append(f"Frames: {clip.num_frames}")
    # 10 decimals keeps e.g. 1/120 s within 1e-9 across a round trip
    out.append(f"Frame Time: {clip.frame_time:.10f}")
    for row in clip.frames:
        out.append(" ".join(f"{v:.6f}" for v in row))
    return "\n".join(out) + "\n"


def _fmt3(vec: np.ndarray) -> str:
    return " ".join(f"{v:.6f}" for v in vec)


# ---------------------------------------------------------------------------
# resampling


def resample_clip(clip: BvhClip, target_frames: int) -> BvhClip:
    """Resample to `target_frames`: positions linearly, rotations by slerp.

    Endpoints are preserved exactly; total duration is preserved, so the
    output frame_time is duration / target_frames.
    """
    if target_frames < 2:
        raise ValueError("target_frames must be >= 2")
    n = clip.num_frames
    new_ft = clip.duration / target_frames
    if n == 1:
        return BvhClip(list(clip.joints), new_ft, np.repeat(clip.frames, target_frames, axis=0))
    if target_frames == n:
        return BvhClip(list(clip.joints), clip.frame_time, clip.frames.copy())

    # source positions for each output frame, endpoint-aligned
    src = np.linspace(0.0, n - 1, target_frames)
    src[0], src[-1] = 0.0, float(n - 1)
    lo = np.minimum(np.floor(src).astype(int), n - 2)
    frac = src - lo

    out = np.empty((target_frames, clip.total_channels), dtype=np.float64)
    for ji in clip.animated_joint_indices():
        joint = clip.joints[ji]
        base = clip.channel_start(ji)
        for off in joint.position_channel_offsets:
            col = clip.frames[:, base + off]
            out[:, base + off] = col[lo] * (1.0 - frac) + col[lo + 1] * frac
        rot_offsets = joint.rotation_channel_offsets
        if rot_offsets:
            order = joint.rotation_order
            quats = [_joint_quaternion(clip, ji, f) for f in range(n)]
            for t_idx in range(target_frames):
                f, u = lo[t_idx], frac[t_idx]
                q = quats[f] if u == 0.0 else slerp(quats[f], quats[f + 1], float(u))
                euler = quaternion_to_euler(q, order)
                by_axis = {"X": euler[0], "Y": euler[1], "Z": euler[2]}
                for off in rot_offsets:
                    out[t_idx, base + off] = by_axis[joint.channels[off][0]]
    # exact endpoints (slerp/back-conversion can wrap angles by 360)
    out[0] = clip.frames[0]
    out[-1] = clip.frames[-1]
    return BvhClip(list(clip.joints), new_ft, out)


def _joint_quaternion(clip: BvhClip, joint_index: int, frame: int) -> UnitQuaternion:
    joint = clip.joints[joint_index]
    base = clip.channel_start(joint_index)
    by_axis = {"X": 0.0, "Y": 0.0, "Z": 0.0}
    for off in joint.rotation_channel_offsets:
        by_axis[joint.channels[off][0]] = clip.frames[frame, base + off]
    return euler_to_quaternion(
        (by_axis["X"], by_axis["Y"], by_axis["Z"]), joint.rotation_order
    )


# ---------------------------------------------------------------------------
# segmentation


def segment_clips(
    clip: BvhClip, boundaries: list[tuple[float, float]]
) -> list[BvhClip]:
    """Cut `clip` at the given (start_s, end_s) spans.

    Segments shorter than 0.8 s or longer than 20 s are dropped and logged;
    inverted or overlapping boundary pairs raise.
    """
    duration = clip.duration
    prev_end = 0.0
    for start, end in boundaries:
        if end <= start:
            raise ValueError(f"inverted boundary pair ({start}, {end})")
        if start < prev_end:
            raise ValueError(f"boundaries overlap or are unsorted at ({start}, {end})")
        if end > duration + 1e-9:
            raise ValueError(f"boundary ({start}, {end}) exceeds clip duration {duration:.3f}")
        prev_end = end

    segments: list[BvhClip] = []
    for start, end in boundaries:
        f0 = int(round(start / clip.frame_time))
        f1 = min(int(round(end / clip.frame_time)), clip.num_frames)
        nframes = f1 - f0
        seg_duration = nframes * clip.frame_time
        if seg_duration < MIN_SEGMENT_SECONDS or seg_duration > MAX_SEGMENT_SECONDS:
            log.warning(
                "dropping segment (%.3f, %.3f): duration %.3f s outside [%.1f, %.1f]",
                start, end, seg_duration, MIN_SEGMENT_SECONDS, MAX_SEGMENT_SECONDS,
            )
            continue
        segments.append(BvhClip(list(clip.joints), clip.frame_time, clip.frames[f0:f1].copy()))
    return segments


# ---------------------------------------------------------------------------
# pose access


def frame_to_pose(clip: BvhClip, frame: int) -> Pose:
    """Extract per-joint quaternions and positioned channels for one frame."""
    rotations: list[UnitQuaternion] = []
    positions: dict[int, np.ndarray] = {}
    for pose_idx, ji in enumerate(clip.animated_joint_indices()):
        joint = clip.joints[ji]
        base = clip.channel_start(ji)
        rotations.append(_joint_quaternion(clip, ji, frame))
        pos_offsets = joint.position_channel_offsets
        if pos_offsets:
            vec = np.zeros(3)
            for off in pos_offsets:
                vec["XYZ".index(joint.channels[off][0])] = clip.frames[frame, base + off]
            positions[pose_idx] = vec
    return Pose(rotations=rotations, positions=positions)


def pose_at_time(clip: BvhClip, time_s: float) -> Pose:
    """Pose at an arbitrary time, nearest-frame, clamped to the clip."""
    frame = int(round(time_s / clip.frame_time))
    return frame_to_pose(clip, min(max(frame, 0), clip.num_frames - 1))


def pose_to_row(clip: BvhClip, pose: Pose) -> np.ndarray:
    """Inverse of :func:`frame_to_pose`: one channel row for the recorder."""
    row = np.zeros(clip.total_channels, dtype=np.float64)
    animated = clip.animated_joint_indices()
    if len(pose.rotations) != len(animated):
        raise ValueError(
            f"pose has {len(pose.rotations)} joints, skeleton has {len(animated)}"
        )
    for pose_idx, ji in enumerate(animated):
        joint = clip.joints[ji]
        base = clip.channel_start(ji)
        euler = quaternion_to_euler(pose.rotations[pose_idx], joint.rotation_order)
        by_axis = {"X": euler[0], "Y": euler[1], "Z": euler[2]}
        for off in joint.rotation_channel_offsets:
            row[base + off] = by_axis[joint.channels[off][0]]
        vec = pose.positions.get(pose_idx)
        if vec is not None:
            for off in joint.position_channel_offsets:
                row[base + off] = vec["XYZ".index(joint.channels[off][0])]
    return row
