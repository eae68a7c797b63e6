"""Command line entry points for the gesture pipeline.

Subcommands cover the artifact lifecycle: build-graph (clip library ->
graph/PCA files), train (feature files -> checkpoint), infer (offline
deterministic BVH synthesis), serve (real-time TCP streaming), eval
(metric reports), and mock-embed (deterministic stand-in features so the
whole pipeline runs without any pretrained encoder).

The TRIMM_CONFIG environment variable may point at a key=value file
whose entries override subcommand defaults (keys use the option names
with underscores; values parse as int/float/true/false/string).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import trmf
from .bvh import parse_bvh, segment_clips, write_bvh
from .features import (
    ACTION_DIM,
    DEFAULT_RESAMPLE_FRAMES,
    extract_action_feature,
    fit_pca,
    flatten_clip,
    save_pca,
)
from .graph import ActionNode, build_knn_graph, save_graph
from .metrics import (
    beat_align,
    diversity,
    extract_audio_beats,
    extract_motion_beats,
    fgd,
    read_wav,
)
from .model import (
    FeatureWindow,
    ModelConfig,
    TrainConfig,
    init_params,
    save_checkpoint,
    train,
)
from .runtime import EngineConfig, load_engine, serve

log = logging.getLogger(__name__)


def _emit(obj: dict) -> None:
    print(json.dumps(obj, separators=(",", ":")))


# ---------------------------------------------------------------------------
# build-graph


def _cmd_build_graph(args) -> int:
    paths = sorted(Path(args.bvh_dir).glob("*.bvh"))
    if not paths:
        raise FileNotFoundError(f"no .bvh files in {args.bvh_dir}")
    segments = []
    for path in paths:
        clip = parse_bvh(path.read_text())
        if args.segment_seconds:
            step = args.segment_seconds
            bounds, t = [], 0.0
            while t < clip.duration - 1e-9:
                bounds.append((t, min(t + step, clip.duration)))
                t += step
        else:
            bounds = [(0.0, clip.duration)]
        segments.extend(segment_clips(clip, bounds))
    if len(segments) < 2:
        raise ValueError(f"need at least 2 usable segments, got {len(segments)}")

    flats = np.stack([flatten_clip(seg, args.resample_frames) for seg in segments])
    pca = fit_pca(flats, ACTION_DIM)

    nodes = []
    for i, seg in enumerate(segments):
        feat = extract_action_feature(seg, pca, args.resample_frames)
        nodes.append(ActionNode(node_id=i, feature=feat.values, duration=feat.source_duration))
    graph = build_knn_graph(nodes, args.k)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_pca(out / "pca.trmf", pca)
    save_graph(out / "graph.trmf", graph)
    clips_dir = out / "clips"
    clips_dir.mkdir(exist_ok=True)
    for i, seg in enumerate(segments):
        (clips_dir / f"node_{i:05d}.bvh").write_text(write_bvh(seg))
    features = np.stack([n.feature for n in graph.nodes])
    durations = np.array([n.duration for n in graph.nodes])
    trmf.write_features(out / "motion.trmf", trmf.MODALITY_MOTION, features, durations)

    _emit({
        "nodes": len(graph),
        "k": graph.k,
        "pca_components": pca.output_dim,
        "out_dir": str(out),
    })
    return 0


# ---------------------------------------------------------------------------
# train


def _window_dataset(text: np.ndarray, audio: np.ndarray, targets: np.ndarray, n: int):
    """Sliding windows over the sentence sequence, zero-padded cold start."""
    dataset = []
    for i in range(text.shape[0]):
        t_rows = np.zeros((n, text.shape[1]), dtype=text.dtype)
        a_rows = np.zeros((n, audio.shape[1]), dtype=audio.dtype)
        lo = max(0, i - n + 1)
        t_rows[n - (i + 1 - lo):] = text[lo : i + 1]
        a_rows[n - (i + 1 - lo):] = audio[lo : i + 1]
        dataset.append((FeatureWindow(t_rows, a_rows), targets[i]))
    return dataset


def _cmd_train(args) -> int:
    _, text, _ = trmf.read_features(args.text, trmf.MODALITY_TEXT)
    _, audio, _ = trmf.read_features(args.audio, trmf.MODALITY_AUDIO)
    _, motion, _ = trmf.read_features(args.motion, trmf.MODALITY_MOTION)
    if not (text.shape[0] == audio.shape[0] == motion.shape[0]):
        raise ValueError(
            f"sentence counts disagree: text {text.shape[0]}, "
            f"audio {audio.shape[0]}, motion {motion.shape[0]}"
        )
    if motion.shape[1] != ACTION_DIM:
        raise ValueError(f"motion features must be {ACTION_DIM}-d, got {motion.shape[1]}")

    cfg = ModelConfig(
        d_text=text.shape[1],
        d_audio=audio.shape[1],
        d_model=args.d_model,
        n_layers=args.layers,
        n_heads=args.heads,
        window=args.window,
        ablate_fusion=args.mfa,
        ablate_divided_attention=args.tsaa,
    )
    params = init_params(cfg, seed=args.seed)
    dataset = _window_dataset(text, audio, motion, cfg.window)
    tcfg = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        decay=args.decay,
        seed=args.seed,
        max_steps=args.max_steps,
    )
    params, trace = train(params, cfg, dataset, tcfg)
    save_checkpoint(args.out, params, cfg)
    _emit({
        "steps": len(trace["step_loss"]),
        "first_loss": trace["step_loss"][0],
        "final_loss": trace["step_loss"][-1],
        "out": args.out,
    })
    return 0


# ---------------------------------------------------------------------------
# infer / serve


def _engine_from_args(args) -> "tuple":
    config = EngineConfig(
        k=args.k,
        top_k=args.top_k,
        coverage_factor=args.coverage,
        overlap=args.overlap,
        fps=args.fps,
        mga=args.mga,
        model_path=args.model,
        graph_path=args.graph,
        pca_path=args.pca,
        clips_dir=args.clips,
    )
    engine = load_engine(config)
    _, text, _ = trmf.read_features(args.text, trmf.MODALITY_TEXT)
    _, audio, durations = trmf.read_features(args.audio, trmf.MODALITY_AUDIO)
    if text.shape[0] != audio.shape[0]:
        raise ValueError("text and audio files carry different sentence counts")
    if np.any(durations <= 0):
        raise ValueError("audio durations must be positive")
    sentences = [(text[i], audio[i], float(durations[i])) for i in range(text.shape[0])]
    return engine, sentences


def _cmd_infer(args) -> int:
    engine, sentences = _engine_from_args(args)
    results, lines = engine.run_script(sentences)
    clip = engine.recorder_clip()
    Path(args.out).write_text(write_bvh(clip))
    if args.frames_out:
        Path(args.frames_out).write_text("".join(line + "\n" for line in lines))
    _emit({
        "sentences": len(sentences),
        "frames": len(lines),
        "duration_s": clip.duration,
        "relaxations": engine.relaxations,
        "out": args.out,
    })
    return 0


def _cmd_serve(args) -> int:
    engine, sentences = _engine_from_args(args)

    def ready(port: int) -> None:
        _emit({"listening": True, "host": args.host, "port": port})
        sys.stdout.flush()

    serve(engine, sentences, host=args.host, port=args.port, once=args.once,
          ready_callback=ready)
    if args.record:
        Path(args.record).write_text(write_bvh(engine.recorder_clip()))
    return 0


# ---------------------------------------------------------------------------
# eval


def _cmd_eval(args) -> int:
    ran_any = False
    if args.real_motion and args.generated_motion:
        _, real, _ = trmf.read_features(args.real_motion, trmf.MODALITY_MOTION)
        _, gen, _ = trmf.read_features(args.generated_motion, trmf.MODALITY_MOTION)
        _emit({"metric": "fgd", "value": fgd(real, gen)})
        subset = args.subset_size or gen.shape[0] // 2
        _emit({
            "metric": "diversity",
            "value": diversity(gen, subset, draws=args.draws, seed=args.seed),
            "subset_size": subset,
        })
        ran_any = True
    elif args.real_motion or args.generated_motion:
        raise ValueError("fgd needs both --real-motion and --generated-motion")

    if args.motion_bvh and args.audio_wav:
        clip = parse_bvh(Path(args.motion_bvh).read_text())
        samples, rate = read_wav(args.audio_wav)
        m_beats = extract_motion_beats(clip)
        a_beats = extract_audio_beats(samples, rate)
        value = beat_align(m_beats, a_beats, args.sigma) if m_beats else 0.0
        _emit({
            "metric": "beat_align",
            "value": value,
            "motion_beats": len(m_beats),
            "audio_beats": len(a_beats),
        })
        ran_any = True
    elif args.motion_bvh or args.audio_wav:
        raise ValueError("beat alignment needs both --motion-bvh and --audio-wav")

    if not ran_any:
        raise ValueError("nothing to evaluate; pass feature files and/or bvh+wav")
    return 0


# ---------------------------------------------------------------------------
# mock-embed


def _hash_rng(seed: int, kind: str, text: str) -> np.random.Generator:
    digest = hashlib.blake2b(
        f"{seed}:{kind}:{text}".encode("utf-8"), digest_size=8
    ).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def mock_embedding(seed: int, kind: str, text: str, dim: int) -> np.ndarray:
    """Deterministic unit-variance stand-in for a real encoder."""
    return _hash_rng(seed, kind, text).standard_normal(dim)


def _cmd_mock_embed(args) -> int:
    if args.script:
        sentences = [s for s in Path(args.script).read_text().splitlines() if s.strip()]
        if not sentences:
            raise ValueError(f"no sentences in {args.script}")
    elif args.sentences:
        sentences = [f"synthetic sentence {i:04d}" for i in range(args.sentences)]
    else:
        raise ValueError("pass --sentences N or --script FILE")
    if args.duration_min <= 0 or args.duration_max < args.duration_min:
        raise ValueError("need 0 < duration-min <= duration-max")

    text_vecs = np.stack([
        mock_embedding(args.seed, "text", s, args.d_text) for s in sentences
    ])
    audio_vecs = np.stack([
        mock_embedding(args.seed, "audio", s, args.d_audio) for s in sentences
    ])
    durations = np.array([
        _hash_rng(args.seed, "duration", s).uniform(args.duration_min, args.duration_max)
        for s in sentences
    ])
    starts = np.concatenate([[0.0], np.cumsum(durations)[:-1]])

    trmf.write_features(args.text_out, trmf.MODALITY_TEXT, text_vecs, starts)
    trmf.write_features(args.audio_out, trmf.MODALITY_AUDIO, audio_vecs, durations)
    _emit({
        "sentences": len(sentences),
        "d_text": args.d_text,
        "d_audio": args.d_audio,
        "total_duration_s": float(durations.sum()),
    })
    return 0


# ---------------------------------------------------------------------------
# parser plumbing


def _coerce(value: str):
    for caster in (int, float):
        try:
            return caster(value)
        except ValueError:
            pass
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    return value


def _apply_env_config(subparsers: dict[str, argparse.ArgumentParser]) -> None:
    path = os.environ.get("TRIMM_CONFIG")
    if not path:
        return
    pairs = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"TRIMM_CONFIG line {raw!r} is not key=value")
        key, value = line.split("=", 1)
        pairs[key.strip().replace("-", "_")] = _coerce(value.strip())
    for sub in subparsers.values():
        dests = {a.dest for a in sub._actions}
        sub.set_defaults(**{k: v for k, v in pairs.items() if k in dests})


def _add_engine_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--model", required=True, help="checkpoint TRMF file")
    sub.add_argument("--graph", help="motion graph TRMF file")
    sub.add_argument("--pca", help="PCA TRMF file")
    sub.add_argument("--clips", help="directory of node clips (BVH)")
    sub.add_argument("--text", required=True, help="text feature TRMF file")
    sub.add_argument("--audio", required=True, help="audio feature TRMF file")
    sub.add_argument("--fps", type=int, default=60, choices=(30, 60, 120))
    sub.add_argument("--k", type=int, default=10)
    sub.add_argument("--top-k", type=int, default=10)
    sub.add_argument("--coverage", type=float, default=0.8,
                     help="duration threshold as a fraction of sentence audio")
    sub.add_argument("--overlap", type=float, default=0.3, help="blend overlap seconds")
    sub.add_argument("--mga", action="store_true",
                     help="skip retrieval; decode predictions directly")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="trimm",
        description="Real-time co-speech gesture synthesis pipeline.",
        epilog="Set TRIMM_CONFIG to a key=value file to override subcommand "
               "defaults (keys are option names with underscores).",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    sub = subs.add_parser("build-graph", help="segment BVH clips into a motion graph")
    sub.add_argument("--bvh-dir", required=True)
    sub.add_argument("--out-dir", required=True)
    sub.add_argument("--k", type=int, default=10)
    sub.add_argument("--segment-seconds", type=float, default=0.0,
                     help="cut files into fixed-length atomic actions (0 = one per file)")
    sub.add_argument("--resample-frames", type=int, default=DEFAULT_RESAMPLE_FRAMES)
    sub.set_defaults(func=_cmd_build_graph)
    registry["build-graph"] = sub

    sub = subs.add_parser("train", help="train the fusion model on feature files")
    sub.add_argument("--text", required=True)
    sub.add_argument("--audio", required=True)
    sub.add_argument("--motion", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--epochs", type=int, default=10)
    sub.add_argument("--batch-size", type=int, default=256)
    sub.add_argument("--lr", type=float, default=1e-4)
    sub.add_argument("--decay", type=float, default=0.999)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--d-model", type=int, default=2048)
    sub.add_argument("--layers", type=int, default=6)
    sub.add_argument("--heads", type=int, default=1)
    sub.add_argument("--window", type=int, default=8)
    sub.add_argument("--max-steps", type=int, default=0)
    sub.add_argument("--mfa", action="store_true",
                     help="replace gated fusion with concatenation+projection")
    sub.add_argument("--tsaa", action="store_true",
                     help="replace divided attention with one self-attention per layer")
    sub.set_defaults(func=_cmd_train)
    registry["train"] = sub

    sub = subs.add_parser("infer", help="offline synthesis to BVH")
    _add_engine_args(sub)
    sub.add_argument("--out", required=True, help="output BVH path")
    sub.add_argument("--frames-out", help="also write JSON frame lines here")
    sub.set_defaults(func=_cmd_infer)
    registry["infer"] = sub

    sub = subs.add_parser("serve", help="stream frames over TCP in real time")
    _add_engine_args(sub)
    sub.add_argument("--host", default="127.0.0.1")
    sub.add_argument("--port", type=int, default=7060)
    sub.add_argument("--once", action="store_true", help="exit after one client")
    sub.add_argument("--record", help="write the emitted frames as BVH on exit")
    sub.set_defaults(func=_cmd_serve)
    registry["serve"] = sub

    sub = subs.add_parser("eval", help="metric reports as JSON lines")
    sub.add_argument("--real-motion", help="real motion-feature TRMF file")
    sub.add_argument("--generated-motion", help="generated motion-feature TRMF file")
    sub.add_argument("--subset-size", type=int, default=0)
    sub.add_argument("--draws", type=int, default=10)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--motion-bvh", help="motion clip for beat alignment")
    sub.add_argument("--audio-wav", help="mono 16/24-bit PCM WAV for beat alignment")
    sub.add_argument("--sigma", type=float, default=0.1)
    sub.set_defaults(func=_cmd_eval)
    registry["eval"] = sub

    sub = subs.add_parser("mock-embed", help="deterministic stand-in feature files")
    sub.add_argument("--sentences", type=int, default=0)
    sub.add_argument("--script", help="text file, one sentence per line")
    sub.add_argument("--text-out", required=True)
    sub.add_argument("--audio-out", required=True)
    sub.add_argument("--d-text", type=int, default=768)
    sub.add_argument("--d-audio", type=int, default=512)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--duration-min", type=float, default=1.2)
    sub.add_argument("--duration-max", type=float, default=3.0)
    sub.set_defaults(func=_cmd_mock_embed)
    registry["mock-embed"] = sub

    return parser, registry


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser, registry = build_parser()
    try:
        _apply_env_config(registry)
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
