"""Objective evaluation: inference latency, Frechet gesture distance,
diversity, and beat alignment.

All functions are pure; randomized ones take explicit seeds. The audio
side needs no external DSP stack: onsets come from a plain spectral-flux
detector over rfft frames, and WAV ingestion handles mono 16/24-bit PCM
through the stdlib wave module.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .bvh import BvhClip, frame_to_pose

DEFAULT_SIGMA = 0.1
_FLUX_FRAME = 1024
_FLUX_HOP = 512


@dataclass
class GaussianStats:
    """Moment summary of a feature set."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.covariance = np.asarray(self.covariance, dtype=np.float64)
        d = self.mean.shape[0]
        if self.covariance.shape != (d, d):
            raise ValueError("covariance shape must match the mean dimension")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-6):
            raise ValueError("covariance must be symmetric")

    @staticmethod
    def from_features(features: np.ndarray) -> "GaussianStats":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 2:
            raise ValueError("need a 2-D feature matrix with at least 2 rows")
        mean = features.mean(axis=0)
        cov = np.cov(features, rowvar=False)
        cov = np.atleast_2d(cov)
        return GaussianStats(mean=mean, covariance=0.5 * (cov + cov.T))


def aits(timings: list[tuple[str, float]]) -> float:
    """Average inference time per sentence: total seconds / sentence count."""
    if not timings:
        raise ValueError("aits needs at least one timed sentence")
    return float(sum(t for _, t in timings) / len(timings))


def _sqrtm_psd(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root by eigendecomposition.

    Eigenvalues below -1e-8 mean the input was not PSD and raise; small
    negatives from roundoff clamp to zero.
    """
    sym = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min(initial=0.0) < -1e-8:
        raise ValueError(f"matrix is not PSD (eigenvalue {eigvals.min()})")
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def fgd(real: np.ndarray, generated: np.ndarray) -> float:
    """Frechet distance between Gaussian fits of two feature sets.

    ||mu_r - mu_g||^2 + tr(C_r + C_g - 2 (C_r C_g)^{1/2}); the cross term
    uses tr((S C_g S)^{1/2}) with S = C_r^{1/2}, which equals the trace of
    the product root and keeps everything in symmetric eigensolves.
    """
    r = GaussianStats.from_features(real)
    g = GaussianStats.from_features(generated)
    if r.mean.shape != g.mean.shape:
        raise ValueError("feature sets must share the dimension")

    root_r = _sqrtm_psd(r.covariance)
    inner = root_r @ g.covariance @ root_r
    eigvals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    if eigvals.min(initial=0.0) < -1e-8:
        raise ValueError("covariance product has no real square root")
    cross = np.sqrt(np.clip(eigvals, 0.0, None)).sum()

    diff = r.mean - g.mean
    value = float(diff @ diff + np.trace(r.covariance) + np.trace(g.covariance) - 2.0 * cross)
    return max(value, 0.0) if value > -1e-8 else value


def diversity(
    features: np.ndarray, subset_size: int, draws: int = 10, seed: int = 0
) -> float:
    """Mean matched-row distance between disjoint random subsets.

    Each draw splits a random permutation into two disjoint subsets of
    subset_size rows and averages the L2 distance between matched rows;
    the result is the mean over draws. Deterministic under seed.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-D matrix")
    n = features.shape[0]
    if subset_size < 1 or 2 * subset_size > n:
        raise ValueError("subset_size must satisfy 1 <= subset_size <= n/2")
    if draws < 1:
        raise ValueError("draws must be positive")
    rng = np.random.default_rng(seed)
    totals = []
    for _ in range(draws):
        perm = rng.permutation(n)
        a = features[perm[:subset_size]]
        b = features[perm[subset_size : 2 * subset_size]]
        totals.append(np.linalg.norm(a - b, axis=1).mean())
    return float(np.mean(totals))


def velocity_envelope(clip: BvhClip) -> np.ndarray:
    """Per-frame motion speed: summed joint angular speeds plus root
    translational speed, one sample per consecutive frame pair."""
    if clip.num_frames < 3:
        raise ValueError("velocity envelope needs at least 3 frames")
    poses = [frame_to_pose(clip, i) for i in range(clip.num_frames)]
    env = np.zeros(clip.num_frames - 1)
    for i in range(clip.num_frames - 1):
        a, b = poses[i], poses[i + 1]
        speed = sum(qa.angle_to(qb) for qa, qb in zip(a.rotations, b.rotations))
        speed += float(np.linalg.norm(b.root_position - a.root_position))
        env[i] = speed / clip.frame_time
    return env


def extract_motion_beats(clip: BvhClip) -> list[float]:
    """Times of velocity-envelope local minima below the envelope median.

    Envelope sample i spans frames i..i+1, so beats are reported at the
    midpoint (i + 0.5) * frame_time.
    """
    env = velocity_envelope(clip)
    if env.size < 3:
        return []
    median = float(np.median(env))
    beats = []
    for i in range(1, env.size - 1):
        if env[i] < env[i - 1] and env[i] < env[i + 1] and env[i] < median:
            beats.append((i + 0.5) * clip.frame_time)
    return beats


def extract_audio_beats(samples: np.ndarray, sample_rate: float) -> list[float]:
    """Onset times from half-wave-rectified spectral flux.

    Hann-windowed rfft frames of 1024 samples at hop 512; flux peaks that
    are local maxima above mean + 1 std become onsets, stamped at the
    center of the later frame.
    """
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    if samples.size == 0:
        raise ValueError("audio is empty")
    if samples.size < 2 * _FLUX_FRAME:
        samples = np.pad(samples, (0, 2 * _FLUX_FRAME - samples.size))

    n_frames = 1 + (samples.size - _FLUX_FRAME) // _FLUX_HOP
    window = np.hanning(_FLUX_FRAME)
    mags = np.empty((n_frames, _FLUX_FRAME // 2 + 1))
    for i in range(n_frames):
        chunk = samples[i * _FLUX_HOP : i * _FLUX_HOP + _FLUX_FRAME]
        mags[i] = np.abs(np.fft.rfft(chunk * window))

    flux = np.maximum(mags[1:] - mags[:-1], 0.0).sum(axis=1)
    if flux.size < 3 or flux.max() <= 0.0:
        return []
    threshold = flux.mean() + flux.std()
    beats = []
    for j in range(1, flux.size - 1):
        if flux[j] > flux[j - 1] and flux[j] >= flux[j + 1] and flux[j] > threshold:
            # flux[j] compares frames j and j+1 of the STFT; stamp the
            # center of the later frame
            beats.append(((j + 1) * _FLUX_HOP + _FLUX_FRAME / 2) / sample_rate)
    return beats


def beat_align(
    motion_beats: list[float], audio_beats: list[float], sigma: float = DEFAULT_SIGMA
) -> float:
    """Mean Gaussian-kernel score of each motion beat against its nearest
    audio beat; 0 when there are no audio beats."""
    if not motion_beats:
        raise ValueError("motion_beats must be non-empty")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not audio_beats:
        return 0.0
    audio = np.asarray(audio_beats, dtype=np.float64)
    score = 0.0
    for b in motion_beats:
        gap = np.min(np.abs(audio - b))
        score += float(np.exp(-(gap * gap) / (2.0 * sigma * sigma)))
    return score / len(motion_beats)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Mono 16- or 24-bit PCM WAV to float64 samples in [-1, 1]."""
    with wave.open(str(path), "rb") as wf:
        channels = wf.getnchannels()
        width = wf.getsampwidth()
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    if channels != 1:
        raise ValueError(f"expected mono audio, got {channels} channels")
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        as_bytes = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3)
        ints = (
            as_bytes[:, 0].astype(np.int32)
            | (as_bytes[:, 1].astype(np.int32) << 8)
            | (as_bytes[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        data = ints.astype(np.float64) / float(1 << 23)
    else:
        raise ValueError(f"unsupported sample width {width} (need 16- or 24-bit PCM)")
    return data, rate
