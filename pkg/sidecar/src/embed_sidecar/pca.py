"""Principal component reduction for flattened audio time-series.

SVD-based; components carry a deterministic sign (largest-magnitude
entry positive) and zero rows pad any rank deficit so the output dim is
always exactly as configured.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AudioPca:
    mean: np.ndarray          # [input_dim]
    components: np.ndarray    # [output_dim, input_dim], rows orthonormal or zero

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]

    def transform(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if rows.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim}-d rows, got {rows.shape[1]}")
        return (rows - self.mean) @ self.components.T


def fit_audio_pca(rows: np.ndarray, output_dim: int) -> AudioPca:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValueError("need a [samples, dim] matrix")
    if rows.shape[0] < 2:
        raise ValueError("need at least 2 samples to fit")
    if output_dim < 1:
        raise ValueError("output_dim must be positive")
    mean = rows.mean(axis=0)
    centered = rows - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    rank = int(np.sum(singular > 1e-12 * max(singular[0], 1.0)))
    keep = min(output_dim, rank)
    components = np.zeros((output_dim, rows.shape[1]))
    components[:keep] = vt[:keep]
    for row in components[:keep]:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return AudioPca(mean=mean, components=components)
