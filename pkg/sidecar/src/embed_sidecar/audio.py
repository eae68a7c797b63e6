"""Mono PCM WAV loading and sentence slicing."""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Mono 16- or 24-bit PCM to float64 in [-1, 1); returns (samples, rate)."""
    with wave.open(str(path), "rb") as w:
        channels = w.getnchannels()
        width = w.getsampwidth()
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    if channels != 1:
        raise ValueError(f"{path}: expected mono audio, got {channels} channels")
    if width == 2:
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        as_bytes = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        ints = (
            as_bytes[:, 0].astype(np.int32)
            | (as_bytes[:, 1].astype(np.int32) << 8)
            | (as_bytes[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        samples = ints.astype(np.float64) / 8388608.0
    else:
        raise ValueError(f"{path}: unsupported sample width {width} bytes")
    return samples, rate


def sentence_slices(
    samples: np.ndarray, rate: int, boundaries: tuple[float, ...]
) -> list[np.ndarray]:
    """Split samples at the boundary times; the last slice runs to the end."""
    duration = samples.shape[0] / rate
    if boundaries[-1] >= duration:
        raise ValueError(
            f"last boundary {boundaries[-1]:.3f}s is past the audio end {duration:.3f}s"
        )
    edges = [int(round(b * rate)) for b in boundaries] + [samples.shape[0]]
    return [samples[a:b] for a, b in zip(edges, edges[1:])]


def sentence_durations(
    samples: np.ndarray, rate: int, boundaries: tuple[float, ...]
) -> np.ndarray:
    duration = samples.shape[0] / rate
    edges = list(boundaries) + [duration]
    return np.diff(np.asarray(edges, dtype=np.float64))
