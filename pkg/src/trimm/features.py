"""PCA compression of motion clips into fixed 750-d action features.

A clip is resampled to a fixed frame count, flattened row-major, and
projected with a PCA model fit on a corpus of such vectors. Rank-starved
fits (fewer samples or input dims than requested components) zero-pad
the trailing components so downstream consumers always see the full
width.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import trmf
from .bvh import BvhClip, resample_clip

log = logging.getLogger(__name__)

ACTION_DIM = 750
DEFAULT_RESAMPLE_FRAMES = 30


@dataclass
class PcaModel:
    """Affine projection x -> components @ (x - mean).

    components has orthonormal rows (zero rows when padded) and
    explained_variance is non-increasing over the real components.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.components = np.asarray(self.components, dtype=np.float64)
        self.explained_variance = np.asarray(self.explained_variance, dtype=np.float64)
        if self.components.ndim != 2 or self.components.shape[1] != self.mean.shape[0]:
            raise ValueError("components must be [output_dim, input_dim] matching mean")
        if self.explained_variance.shape[0] != self.components.shape[0]:
            raise ValueError("explained_variance length must match component count")

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]


@dataclass
class ActionFeature:
    """Compressed motion descriptor plus the source clip duration."""

    values: np.ndarray
    source_duration: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (ACTION_DIM,):
            raise ValueError(f"action feature must have {ACTION_DIM} entries")
        if self.source_duration <= 0.0:
            raise ValueError("source_duration must be positive")


def fit_pca(samples: np.ndarray, output_dim: int) -> PcaModel:
    """Eigendecomposition of the sample covariance, components by
    descending variance.

    Requesting more components than min(input_dim, n_samples) supports
    pads the remainder with zero rows and zero variances.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ValueError("samples must be a 2-D [n, input_dim] array")
    n, input_dim = samples.shape
    if n < 2:
        raise ValueError("need at least 2 samples to fit a covariance")
    if output_dim < 1:
        raise ValueError("output_dim must be positive")

    mean = samples.mean(axis=0)
    centered = samples - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    if eigvals[0] <= 1e-12:
        log.warning("fitting PCA on zero-variance data; all projections collapse")

    rank_limit = min(input_dim, n)
    real = min(output_dim, rank_limit)
    if output_dim > rank_limit:
        log.warning(
            "requested %d components but data supports %d; padding %d with zeros",
            output_dim, rank_limit, output_dim - rank_limit,
        )
    components = np.zeros((output_dim, input_dim))
    components[:real] = eigvecs[:, :real].T
    variance = np.zeros(output_dim)
    variance[:real] = eigvals[:real]

    # deterministic sign: the largest-magnitude entry of each row is positive
    for row in components[:real]:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance=variance)


def pca_project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise ValueError(f"expected input dim {model.input_dim}, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != model.output_dim:
        raise ValueError(f"expected output dim {model.output_dim}, got {y.shape[-1]}")
    return model.mean + y @ model.components


def flatten_clip(clip: BvhClip, resample_frames: int = DEFAULT_RESAMPLE_FRAMES) -> np.ndarray:
    """Time-normalize to a fixed frame count, then flatten row-major."""
    resampled = resample_clip(clip, resample_frames)
    return resampled.frames.reshape(-1).astype(np.float64)


def extract_action_feature(
    clip: BvhClip,
    model: PcaModel,
    resample_frames: int = DEFAULT_RESAMPLE_FRAMES,
) -> ActionFeature:
    if model.output_dim != ACTION_DIM:
        raise ValueError(f"action features require a {ACTION_DIM}-component model")
    values = pca_project(model, flatten_clip(clip, resample_frames))
    return ActionFeature(values=values, source_duration=clip.duration)


def save_pca(path, model: PcaModel) -> None:
    trmf.write_pca(path, model.mean, model.components)


def load_pca(path) -> PcaModel:
    """Explained variances are not persisted; loaded models report zeros."""
    mean, components = trmf.read_pca(path)
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance=np.zeros(components.shape[0]),
    )
