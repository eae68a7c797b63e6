"""Corpus extraction: manifest in, three TRMF artifacts out.

Text vectors are written with global sentence start timestamps (files
laid end to end in manifest order); audio vectors carry per-sentence
durations. The audio encoder's frame series is resampled to a fixed
frame count, flattened, and PCA-reduced to the configured dimension;
the fitted PCA is exported alongside the features for reuse downstream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import trmf_io
from .audio import read_wav, sentence_durations, sentence_slices
from .manifest import ExtractionManifest, load_transcript
from .pca import AudioPca, fit_audio_pca

log = logging.getLogger(__name__)

TIMELINE_FRAMES = 32

TEXT_FILE = "text.trmf"
AUDIO_FILE = "audio.trmf"
PCA_FILE = "audio_pca.trmf"


@dataclass
class ExtractionResult:
    sentences: int
    text_dim: int
    audio_dim: int
    pca_input_dim: int
    total_duration_s: float
    out_dir: str


def resample_series(series: np.ndarray, frames: int = TIMELINE_FRAMES) -> np.ndarray:
    """Linear resample of a [f, d] series to exactly `frames` rows."""
    series = np.atleast_2d(np.asarray(series, dtype=np.float64))
    if series.shape[0] == 1:
        return np.repeat(series, frames, axis=0)
    src = np.linspace(0.0, 1.0, series.shape[0])
    dst = np.linspace(0.0, 1.0, frames)
    return np.stack([np.interp(dst, src, series[:, j])
                     for j in range(series.shape[1])], axis=1)


def collect_sentences(manifest: ExtractionManifest) -> tuple[list[str], list[np.ndarray], np.ndarray, np.ndarray]:
    """Walk the corpus once: sentences, per-sentence samples, starts, durations."""
    sentences: list[str] = []
    slices: list[np.ndarray] = []
    rates: list[int] = []
    starts: list[float] = []
    durations: list[float] = []
    offset = 0.0
    for entry in manifest.entries:
        lines = load_transcript(entry.transcript_path)
        if len(lines) != len(entry.boundaries):
            raise ValueError(
                f"{entry.transcript_path}: {len(lines)} sentences but "
                f"{len(entry.boundaries)} boundaries"
            )
        samples, rate = read_wav(entry.audio_path)
        file_duration = samples.shape[0] / rate
        sentences.extend(lines)
        slices.extend(sentence_slices(samples, rate, entry.boundaries))
        rates.extend([rate] * len(lines))
        starts.extend(offset + b for b in entry.boundaries)
        durations.extend(sentence_durations(samples, rate, entry.boundaries))
        offset += file_duration
    return sentences, list(zip(slices, rates)), np.asarray(starts), np.asarray(durations)


def encode_audio_matrix(
    clips: list[tuple[np.ndarray, int]], encoder, frames: int = TIMELINE_FRAMES
) -> np.ndarray:
    """Flattened fixed-length encoder features, one row per sentence."""
    rows = []
    for samples, rate in clips:
        series = encoder.encode(samples, rate)
        rows.append(resample_series(series, frames).reshape(-1))
    return np.stack(rows)


def run_extraction(
    manifest: ExtractionManifest,
    text_encoder,
    audio_encoder,
    pca: AudioPca | None = None,
) -> ExtractionResult:
    sentences, clips, starts, durations = collect_sentences(manifest)
    log.info("encoding %d sentences from %d files", len(sentences), len(manifest.entries))

    text_vectors = text_encoder.encode(sentences)
    if text_vectors.shape != (len(sentences), manifest.text_dim):
        raise ValueError(
            f"text encoder produced {text_vectors.shape}, expected "
            f"({len(sentences)}, {manifest.text_dim})"
        )

    flat = encode_audio_matrix(clips, audio_encoder)
    if pca is None:
        pca = fit_audio_pca(flat, manifest.audio_dim)
    if pca.output_dim != manifest.audio_dim:
        raise ValueError(
            f"PCA emits {pca.output_dim}-d vectors but manifest wants {manifest.audio_dim}"
        )
    audio_vectors = pca.transform(flat)

    out = manifest.out_dir
    trmf_io.write_features(out / TEXT_FILE, trmf_io.MODALITY_TEXT, text_vectors, starts)
    trmf_io.write_features(out / AUDIO_FILE, trmf_io.MODALITY_AUDIO, audio_vectors, durations)
    trmf_io.write_pca(out / PCA_FILE, pca.mean, pca.components)

    return ExtractionResult(
        sentences=len(sentences),
        text_dim=manifest.text_dim,
        audio_dim=manifest.audio_dim,
        pca_input_dim=pca.input_dim,
        total_duration_s=float(durations.sum()),
        out_dir=str(out),
    )
