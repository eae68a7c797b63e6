"""TRMF binary container: the on-disk format for all persisted artifacts.

Layout: magic "TRMF", u32 version (=1), u32 modality code, then a
modality-specific payload. Everything little-endian.

Modalities: 0 text features, 1 audio features, 2 motion features,
3 PCA model, 4 checkpoint (named tensors), 5 motion graph.

Feature payloads are u32 dim, u32 count, count*dim f32 values, then
count f64 per-vector times. For text features the times are sentence
start timestamps; for audio features they carry per-sentence durations.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"TRMF"
VERSION = 1

MODALITY_TEXT = 0
MODALITY_AUDIO = 1
MODALITY_MOTION = 2
MODALITY_PCA = 3
MODALITY_CHECKPOINT = 4
MODALITY_GRAPH = 5

_HEADER = struct.Struct("<4sII")


class TrmfError(ValueError):
    pass


class Reader:
    """Sequential little-endian reader with truncation checks."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TrmfError(
                f"truncated file: needed {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def f32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").copy()

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").copy()

    def u32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<u4").copy()

    def done(self) -> bool:
        return self.pos == len(self.data)


class Writer:
    def __init__(self, modality: int):
        self.buf = bytearray(_HEADER.pack(MAGIC, VERSION, modality))

    def u32(self, value: int) -> None:
        self.buf += struct.pack("<I", value)

    def f64(self, value: float) -> None:
        self.buf += struct.pack("<d", value)

    def f32_array(self, values: np.ndarray) -> None:
        self.buf += np.ascontiguousarray(values, dtype="<f4").tobytes()

    def f64_array(self, values: np.ndarray) -> None:
        self.buf += np.ascontiguousarray(values, dtype="<f8").tobytes()

    def u32_array(self, values: np.ndarray) -> None:
        self.buf += np.ascontiguousarray(values, dtype="<u4").tobytes()

    def raw(self, data: bytes) -> None:
        self.buf += data

    def bytes(self) -> bytes:
        return bytes(self.buf)


def open_payload(data: bytes, expect_modality: int | None = None) -> tuple[int, Reader]:
    """Validate the header and return (modality, reader over the payload)."""
    if len(data) < _HEADER.size:
        raise TrmfError("truncated file: header incomplete")
    magic, version, modality = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TrmfError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise TrmfError(f"unsupported version {version}")
    if expect_modality is not None and modality != expect_modality:
        raise TrmfError(f"modality {modality}, expected {expect_modality}")
    reader = Reader(data)
    reader.pos = _HEADER.size
    return modality, reader


# ---------------------------------------------------------------------------
# feature files (modalities 0, 1, 2)


def write_features(
    path: str | Path, modality: int, vectors: np.ndarray, times: np.ndarray
) -> None:
    vectors = np.asarray(vectors)
    times = np.asarray(times, dtype=np.float64)
    if modality not in (MODALITY_TEXT, MODALITY_AUDIO, MODALITY_MOTION):
        raise TrmfError(f"{modality} is not a feature modality")
    if vectors.ndim != 2:
        raise TrmfError("feature vectors must be [count, dim]")
    if times.shape != (vectors.shape[0],):
        raise TrmfError("need one timestamp per vector")
    w = Writer(modality)
    w.u32(vectors.shape[1])
    w.u32(vectors.shape[0])
    w.f32_array(vectors)
    w.f64_array(times)
    Path(path).write_bytes(w.bytes())


def read_features(
    path: str | Path, expect_modality: int | None = None
) -> tuple[int, np.ndarray, np.ndarray]:
    modality, r = open_payload(Path(path).read_bytes(), expect_modality)
    if modality not in (MODALITY_TEXT, MODALITY_AUDIO, MODALITY_MOTION):
        raise TrmfError(f"modality {modality} is not a feature file")
    dim = r.u32()
    count = r.u32()
    vectors = r.f32_array(count * dim).reshape(count, dim)
    times = r.f64_array(count)
    if not r.done():
        raise TrmfError("trailing bytes after feature payload")
    return modality, vectors, times


# ---------------------------------------------------------------------------
# PCA model (modality 3)


def write_pca(path: str | Path, mean: np.ndarray, components: np.ndarray) -> None:
    mean = np.asarray(mean)
    components = np.asarray(components)
    if components.ndim != 2 or mean.shape != (components.shape[1],):
        raise TrmfError("components must be [output_dim, input_dim] matching mean")
    w = Writer(MODALITY_PCA)
    w.u32(components.shape[1])
    w.u32(components.shape[0])
    w.f32_array(mean)
    w.f32_array(components)
    Path(path).write_bytes(w.bytes())


def read_pca(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (mean [input_dim], components [output_dim, input_dim])."""
    _, r = open_payload(Path(path).read_bytes(), MODALITY_PCA)
    input_dim = r.u32()
    output_dim = r.u32()
    mean = r.f32_array(input_dim)
    components = r.f32_array(output_dim * input_dim).reshape(output_dim, input_dim)
    if not r.done():
        raise TrmfError("trailing bytes after PCA payload")
    return mean, components


# ---------------------------------------------------------------------------
# checkpoint (modality 4): named float32 tensors


def write_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    w = Writer(MODALITY_CHECKPOINT)
    w.u32(len(tensors))
    for name, tensor in tensors.items():
        raw = name.encode("utf-8")
        w.u32(len(raw))
        w.raw(raw)
        arr = np.asarray(tensor)
        w.u32(arr.ndim)
        for d in arr.shape:
            w.u32(d)
        w.f32_array(arr)
    Path(path).write_bytes(w.bytes())


def read_tensors(path: str | Path) -> dict[str, np.ndarray]:
    _, r = open_payload(Path(path).read_bytes(), MODALITY_CHECKPOINT)
    count = r.u32()
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        ndim = r.u32()
        shape = tuple(r.u32() for _ in range(ndim))
        size = int(np.prod(shape)) if shape else 1
        tensors[name] = r.f32_array(size).reshape(shape)
    if not r.done():
        raise TrmfError("trailing bytes after checkpoint payload")
    return tensors
