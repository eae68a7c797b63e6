"""Live gesture pipeline: sentence ingestion, windowed prediction, graph
retrieval, transition scheduling, and frame-clocked pose emission.

One Engine owns a session: a sliding feature window feeding the fusion
model, the retrieval state (previous action feature), and the playback
state (active clip plus at most one pending transition). Offline scripts
run deterministically on a simulated clock; `serve` drives the same
engine from wall time over TCP with three cooperating roles (sentence
pacing, inference, frame emission) handing work through queues.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .blend import Pose, TransitionPlan, transition_pose
from .bvh import BvhClip, parse_bvh, pose_at_time, pose_to_row, resample_clip
from .features import (
    ACTION_DIM,
    DEFAULT_RESAMPLE_FRAMES,
    PcaModel,
    load_pca,
    pca_inverse,
)
from .graph import MotionGraph, constrained_search, load_graph
from .model import (
    FeatureWindow,
    ModelConfig,
    forward,
    load_checkpoint,
    slide_window,
)

log = logging.getLogger(__name__)

VALID_FPS = (30, 60, 120)


@dataclass
class EngineConfig:
    """Runtime knobs; structural sizes must agree with the loaded model."""

    window: int = 8
    d_text: int = 768
    d_audio: int = 512
    k: int = 10
    top_k: int = 10
    coverage_factor: float = 0.8
    overlap: float = 0.3
    fps: int = 60
    mfa: bool = False
    tsaa: bool = False
    mga: bool = False
    model_path: str | None = None
    graph_path: str | None = None
    pca_path: str | None = None
    clips_dir: str | None = None

    def __post_init__(self):
        for name in ("window", "d_text", "d_audio", "k", "top_k"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.fps not in VALID_FPS:
            raise ValueError(f"fps must be one of {VALID_FPS}")
        if self.coverage_factor < 0.0:
            raise ValueError("coverage_factor must be >= 0")
        if self.overlap <= 0.0:
            raise ValueError("overlap must be positive")


@dataclass
class IngestResult:
    """Outcome of one sentence: what got scheduled and how long it took."""

    node_id: int | None
    clip_duration: float
    relaxed: bool
    synthesized: bool
    predicted: np.ndarray
    timings: dict[str, float] = field(default_factory=dict)


class Engine:
    """Session-scoped pipeline around immutable model/graph/PCA artifacts."""

    def __init__(
        self,
        config: EngineConfig,
        params: dict[str, np.ndarray],
        model_cfg: ModelConfig,
        motion_graph: MotionGraph | None = None,
        pca: PcaModel | None = None,
        library: list[BvhClip] | None = None,
        template: BvhClip | None = None,
    ):
        if model_cfg.d_text != config.d_text or model_cfg.d_audio != config.d_audio:
            raise ValueError("model feature dims disagree with the engine config")
        if model_cfg.window != config.window:
            raise ValueError("model window size disagrees with the engine config")
        if model_cfg.out_dim != ACTION_DIM:
            raise ValueError(f"model head must emit {ACTION_DIM}-d features")
        if model_cfg.ablate_fusion != config.mfa or model_cfg.ablate_divided_attention != config.tsaa:
            raise ValueError("checkpoint ablation flags disagree with the engine config")
        if config.mga:
            if pca is None:
                raise ValueError("mga mode needs the PCA model to reconstruct poses")
        elif motion_graph is None:
            raise ValueError("graph mode needs a motion graph")

        self.config = config
        # column-major weights stream ~2x faster through the skinny
        # inference GEMMs; values are unchanged
        self.params = {
            k: np.asfortranarray(v) if v.ndim == 2 else v for k, v in params.items()
        }
        self.model_cfg = model_cfg
        self.graph = motion_graph
        self.pca = pca
        self.template = template if template is not None else (library[0] if library else None)
        if config.mga and self.template is None:
            raise ValueError("mga mode needs a skeleton template clip")
        if config.mga and self.pca is not None and self.template is not None:
            expected = DEFAULT_RESAMPLE_FRAMES * self.template.total_channels
            if self.pca.input_dim != expected:
                raise ValueError(
                    f"PCA input dim {self.pca.input_dim} does not match "
                    f"{DEFAULT_RESAMPLE_FRAMES} frames x {self.template.total_channels} channels"
                )
        self.library = self._prepare_library(library)
        self._lock = threading.Lock()
        self.reset()

    def _prepare_library(self, library: list[BvhClip] | None) -> list[BvhClip] | None:
        if library is None:
            return None
        if not library:
            raise ValueError("clip library is empty")
        names = [j.name for j in library[0].joints]
        out = []
        target_ft = 1.0 / self.config.fps
        for i, clip in enumerate(library):
            if [j.name for j in clip.joints] != names:
                raise ValueError(f"clip {i} skeleton differs from clip 0")
            if abs(clip.frame_time - target_ft) > 1e-9:
                clip = resample_clip(clip, max(2, round(clip.duration * self.config.fps)))
            out.append(clip)
        return out

    def reset(self) -> None:
        """Fresh session: zero window, no history, empty playback state."""
        dtype = self.params["head_w"].dtype
        self._window = FeatureWindow.zeros(self.model_cfg, dtype=dtype)
        self._last_feature: np.ndarray | None = None
        self._active: tuple[BvhClip, float] | None = None  # (clip, timeline start)
        self._pending: TransitionPlan | None = None
        self._frame_index = 0
        self._recorder_rows: list[np.ndarray] = []
        self._ingest_cursor = 0.0
        self._last_schedule = -np.inf
        self.relaxations = 0

    # ------------------------------------------------------------------
    # ingestion + inference

    def ingest_sentence(
        self,
        text_feat: np.ndarray,
        audio_feat: np.ndarray,
        audio_duration: float,
        at_time: float | None = None,
    ) -> IngestResult:
        """Slide the window, predict, retrieve (or synthesize), schedule.

        The first sentence has no retrieval history, so the anchor search
        runs on the prediction itself. An empty constrained result falls
        back to the unconstrained (duration > 0) search and is counted in
        `relaxations`.
        """
        text_feat = np.asarray(text_feat, dtype=np.float64).reshape(-1)
        audio_feat = np.asarray(audio_feat, dtype=np.float64).reshape(-1)
        if text_feat.shape[0] != self.config.d_text:
            raise ValueError(f"text feature must have {self.config.d_text} entries")
        if audio_feat.shape[0] != self.config.d_audio:
            raise ValueError(f"audio feature must have {self.config.d_audio} entries")
        if audio_duration <= 0.0:
            raise ValueError("audio_duration must be positive")
        if at_time is None:
            at_time = self._ingest_cursor

        t0 = time.perf_counter()
        self._window = slide_window(self._window, text_feat, audio_feat)
        predicted = np.asarray(forward(self.params, self.model_cfg, self._window), dtype=np.float64)
        t1 = time.perf_counter()

        relaxed = False
        if self.config.mga:
            node_id = None
            clip = self._clip_from_feature(predicted, audio_duration)
            duration = clip.duration
            self._last_feature = predicted
            t2 = time.perf_counter()
        else:
            assert self.graph is not None
            tau = self.config.coverage_factor * audio_duration
            prev = self._last_feature if self._last_feature is not None else predicted
            node_id = constrained_search(self.graph, prev, predicted, tau, self.config.top_k)
            if node_id is None:
                node_id = constrained_search(self.graph, prev, predicted, 0.0, self.config.top_k)
                relaxed = True
                self.relaxations += 1
                log.warning(
                    "no clip longer than %.3f s reachable; relaxed the duration filter", tau
                )
            if node_id is None:
                raise RuntimeError("graph search found no reachable node")
            node = self.graph.nodes[node_id]
            self._last_feature = node.feature
            duration = node.duration
            clip = self.library[node.clip_ref] if self.library is not None else None
            t2 = time.perf_counter()

        if clip is not None:
            with self._lock:
                self._schedule_clip(clip, at_time)
        t3 = time.perf_counter()
        self._ingest_cursor = at_time + audio_duration

        return IngestResult(
            node_id=node_id,
            clip_duration=float(duration),
            relaxed=relaxed,
            synthesized=self.config.mga,
            predicted=predicted,
            timings={
                "inference": t1 - t0,
                "search": t2 - t1,
                "blend": t3 - t2,
                "total": t3 - t0,
            },
        )

    def _clip_from_feature(self, feature: np.ndarray, duration: float) -> BvhClip:
        """Decode a predicted action feature straight into frames (no
        retrieval); the clip is stretched to cover the sentence."""
        assert self.pca is not None and self.template is not None
        flat = pca_inverse(self.pca, feature)
        rows = flat.reshape(DEFAULT_RESAMPLE_FRAMES, self.template.total_channels)
        return BvhClip(
            joints=list(self.template.joints),
            frame_time=duration / DEFAULT_RESAMPLE_FRAMES,
            frames=rows,
        )

    def _schedule_clip(self, clip: BvhClip, at_time: float) -> None:
        if at_time < self._last_schedule:
            raise ValueError("schedule times must be monotone")
        self._last_schedule = at_time
        if self._active is None:
            self._active = (clip, at_time)
            return
        self._resolve(at_time)
        if self._pending is not None:
            # a sentence landed mid-transition: cut to the incoming clip
            self._active = (self._pending.to_clip, self._pending.start_time)
            self._pending = None
        from_clip, from_start = self._active
        overlap = min(self.config.overlap, clip.duration)
        if overlap < 1.0 / self.config.fps:
            self._active = (clip, at_time)
            return
        # the outgoing clip may already be exhausted; its accessor then
        # holds the final pose, which is exactly what the blend should
        # start from
        self._pending = TransitionPlan(
            from_clip=from_clip,
            to_clip=clip,
            overlap=overlap,
            start_time=at_time,
            from_offset=min(at_time - from_start, from_clip.duration),
        )

    # ------------------------------------------------------------------
    # emission

    def _resolve(self, t: float) -> None:
        if self._pending is not None and t >= self._pending.start_time + self._pending.overlap:
            self._active = (self._pending.to_clip, self._pending.start_time)
            self._pending = None

    def pose_at_output(self, t: float) -> tuple[Pose, bool] | None:
        """Pose on the output timeline, or None before the first clip."""
        self._resolve(t)
        if self._pending is not None and t >= self._pending.start_time:
            return transition_pose(self._pending, pose_at_time, t - self._pending.start_time), False
        if self._active is None:
            return None
        clip, start = self._active
        local = t - start
        starved = local > clip.duration + 0.5 / self.config.fps
        return pose_at_time(clip, local), starved

    def emit_frames(self, until_time: float) -> list[str]:
        """All frames strictly before `until_time`, as JSON lines.

        Frame j sits at j/fps on the output timeline. Emitted poses are
        simultaneously appended to the BVH recorder. Before the first
        clip is scheduled the clock does not advance.
        """
        out: list[str] = []
        fps = self.config.fps
        with self._lock:
            while self._frame_index / fps < until_time - 1e-12:
                t = self._frame_index / fps
                got = self.pose_at_output(t)
                if got is None:
                    break
                pose, starved = got
                out.append(self._frame_json(self._frame_index, t, pose, starved))
                self._recorder_rows.append(pose_to_row(self.template, pose))
                self._frame_index += 1
        return out

    def _frame_json(self, index: int, t: float, pose: Pose, starved: bool) -> str:
        bones = []
        animated = self.template.animated_joint_indices()
        for pose_idx, ji in enumerate(animated):
            q = pose.rotations[pose_idx]
            pos = pose.positions.get(pose_idx)
            bones.append({
                "name": self.template.joints[ji].name,
                "pos": [0.0, 0.0, 0.0] if pos is None else [float(v) for v in pos],
                "quat": [q.w, q.x, q.y, q.z],
            })
        frame = {
            "frame": index,
            "timestamp_ms": t * 1000.0,
            "starved": starved,
            "bones": bones,
        }
        return json.dumps(frame, separators=(",", ":"))

    def recorder_clip(self) -> BvhClip:
        """Everything emitted so far as a BVH clip at the output rate."""
        if self.template is None or not self._recorder_rows:
            raise ValueError("nothing recorded yet")
        return BvhClip(
            joints=list(self.template.joints),
            frame_time=1.0 / self.config.fps,
            frames=np.stack(self._recorder_rows),
        )

    # ------------------------------------------------------------------
    # offline driving

    def run_script(
        self, sentences: list[tuple[np.ndarray, np.ndarray, float]]
    ) -> tuple[list[IngestResult], list[str]]:
        """Deterministic offline run: sentence i starts when the previous
        durations end; frames cover the summed duration exactly."""
        if not sentences:
            raise ValueError("script is empty")
        self.reset()
        results: list[IngestResult] = []
        lines: list[str] = []
        cursor = 0.0
        for text_feat, audio_feat, duration in sentences:
            results.append(self.ingest_sentence(text_feat, audio_feat, duration, at_time=cursor))
            cursor += duration
            lines.extend(self.emit_frames(cursor))
        return results, lines

    def measure_pipeline(
        self,
        sentences: list[tuple[np.ndarray, np.ndarray, float]],
        repetitions: int = 30,
    ) -> dict:
        """Wall-time the per-sentence stages over repeated scripted runs."""
        if not sentences:
            raise ValueError("cannot measure an empty script")
        if repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        stage_sums = {"inference": 0.0, "search": 0.0, "blend": 0.0, "total": 0.0}
        timings: list[tuple[str, float]] = []
        for rep in range(repetitions):
            self.reset()
            cursor = 0.0
            for i, (text_feat, audio_feat, duration) in enumerate(sentences):
                res = self.ingest_sentence(text_feat, audio_feat, duration, at_time=cursor)
                cursor += duration
                timings.append((f"rep{rep}.sentence{i}", res.timings["total"]))
                for name in stage_sums:
                    stage_sums[name] += res.timings[name]
        count = len(timings)
        return {
            "aits": metrics.aits(timings),
            "sentences": len(sentences),
            "repetitions": repetitions,
            "stage_seconds": {k: v / count for k, v in stage_sums.items()},
            "relaxations": self.relaxations,
        }


# ---------------------------------------------------------------------------
# artifact loading


def load_library(clips_dir) -> list[BvhClip]:
    """Parse every *.bvh under `clips_dir` in name order."""
    paths = sorted(Path(clips_dir).glob("*.bvh"))
    if not paths:
        raise FileNotFoundError(f"no .bvh files in {clips_dir}")
    return [parse_bvh(p.read_text()) for p in paths]


def load_engine(config: EngineConfig) -> Engine:
    """Build an Engine from the artifact paths in `config`.

    Structural model fields (dims, window, ablations) are taken from the
    checkpoint; the config's copies are overwritten to match.
    """
    if config.model_path is None:
        raise ValueError("config.model_path is required")
    params, model_cfg, _ = load_checkpoint(config.model_path)
    config.d_text = model_cfg.d_text
    config.d_audio = model_cfg.d_audio
    config.window = model_cfg.window
    config.mfa = model_cfg.ablate_fusion
    config.tsaa = model_cfg.ablate_divided_attention

    motion_graph = load_graph(config.graph_path) if config.graph_path else None
    pca = load_pca(config.pca_path) if config.pca_path else None
    library = load_library(config.clips_dir) if config.clips_dir else None
    return Engine(config, params, model_cfg, motion_graph, pca, library)


# ---------------------------------------------------------------------------
# TCP streaming

_POLL_SECONDS = 0.002


def serve(
    engine: Engine,
    sentences: list[tuple[np.ndarray, np.ndarray, float]],
    host: str = "127.0.0.1",
    port: int = 7060,
    once: bool = False,
    ready_callback=None,
) -> None:
    """Stream the scripted sentences to connecting clients in real time.

    Per connection, three roles run concurrently: a pacer that releases
    each sentence at its start time, an inference worker that owns the
    session state, and the emission loop that owns the frame clock and
    the socket. Newline-delimited JSON frames flow to the client.
    """
    total = sum(d for _, _, d in sentences)
    with socket.create_server((host, port)) as server:
        if ready_callback is not None:
            ready_callback(server.getsockname()[1])
        while True:
            conn, peer = server.accept()
            log.info("client %s connected", peer)
            try:
                _serve_client(engine, conn, sentences, total)
            finally:
                conn.close()
            if once:
                return


def _serve_client(engine: Engine, conn: socket.socket, sentences, total: float) -> None:
    engine.reset()
    feed: queue.Queue = queue.Queue()
    done = threading.Event()
    start = time.perf_counter()

    def pacer() -> None:
        cursor = 0.0
        for item in sentences:
            wait = start + cursor - time.perf_counter()
            if wait > 0:
                time.sleep(wait)
            feed.put((item, cursor))
            cursor += item[2]
        feed.put(None)

    def inference() -> None:
        while True:
            msg = feed.get()
            if msg is None:
                break
            (text_feat, audio_feat, duration), _ = msg
            now = time.perf_counter() - start
            engine.ingest_sentence(text_feat, audio_feat, duration, at_time=now)
        done.set()

    threads = [threading.Thread(target=pacer, daemon=True),
               threading.Thread(target=inference, daemon=True)]
    for th in threads:
        th.start()
    try:
        while True:
            now = time.perf_counter() - start
            for line in engine.emit_frames(min(now, total)):
                conn.sendall(line.encode("utf-8") + b"\n")
            if done.is_set() and now >= total:
                break
            time.sleep(_POLL_SECONDS)
    finally:
        for th in threads:
            th.join(timeout=5.0)
