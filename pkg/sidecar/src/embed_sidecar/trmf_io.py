"""Writer for the TRMF container consumed by the gesture engine.

Implemented here from the format contract rather than imported, so the
two packages stay decoupled: magic "TRMF", u32 version (=1), u32
modality, little-endian payload. Feature payload: u32 dim, u32 count,
count*dim float32 vectors, count float64 times. PCA payload: u32
input_dim, u32 output_dim, float32 mean, float32 components. All
writes are atomic: a temp file in the target directory is renamed over
the destination only after a complete write.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"TRMF"
VERSION = 1

MODALITY_TEXT = 0
MODALITY_AUDIO = 1
MODALITY_PCA = 3

_HEADER = struct.Struct("<4sII")


def atomic_write(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def feature_payload(modality: int, vectors: np.ndarray, times: np.ndarray) -> bytes:
    vectors = np.asarray(vectors)
    times = np.asarray(times, dtype=np.float64)
    if modality not in (MODALITY_TEXT, MODALITY_AUDIO):
        raise ValueError(f"modality {modality} is not written by this tool")
    if vectors.ndim != 2:
        raise ValueError("feature vectors must be [count, dim]")
    if times.shape != (vectors.shape[0],):
        raise ValueError("need one timestamp per vector")
    buf = bytearray(_HEADER.pack(MAGIC, VERSION, modality))
    buf += struct.pack("<II", vectors.shape[1], vectors.shape[0])
    buf += np.ascontiguousarray(vectors, dtype="<f4").tobytes()
    buf += np.ascontiguousarray(times, dtype="<f8").tobytes()
    return bytes(buf)


def pca_payload(mean: np.ndarray, components: np.ndarray) -> bytes:
    mean = np.asarray(mean)
    components = np.asarray(components)
    if components.ndim != 2 or mean.shape != (components.shape[1],):
        raise ValueError("components must be [output_dim, input_dim] matching mean")
    buf = bytearray(_HEADER.pack(MAGIC, VERSION, MODALITY_PCA))
    buf += struct.pack("<II", components.shape[1], components.shape[0])
    buf += np.ascontiguousarray(mean, dtype="<f4").tobytes()
    buf += np.ascontiguousarray(components, dtype="<f4").tobytes()
    return bytes(buf)


def write_features(path: str | Path, modality: int, vectors: np.ndarray,
                   times: np.ndarray) -> None:
    atomic_write(path, feature_payload(modality, vectors, times))


def write_pca(path: str | Path, mean: np.ndarray, components: np.ndarray) -> None:
    atomic_write(path, pca_payload(mean, components))
