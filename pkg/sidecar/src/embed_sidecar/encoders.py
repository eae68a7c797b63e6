"""Pluggable sentence/audio encoders.

Two families: pretrained transformer encoders (require torch +
transformers and a locally cached model; anything missing raises
EncoderUnavailableError) and self-contained deterministic fallbacks
that keep the pipeline runnable on a sealed box. Text encoders map a
sentence list to [n, 768]; audio encoders map raw samples to a
[frames, dim] time series that extraction later flattens and reduces.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .manifest import TEXT_DIM


class EncoderUnavailableError(RuntimeError):
    """A pretrained model could not be loaded (missing deps, no cache)."""


class HashedTextEncoder:
    """Deterministic unit-variance sentence vectors keyed by content.

    A stand-in with the same interface and distributional footprint as a
    real sentence encoder: identical sentences map to identical vectors.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.dim = TEXT_DIM

    def encode(self, sentences: list[str]) -> np.ndarray:
        rows = []
        for s in sentences:
            if not s.strip():
                raise ValueError("cannot encode an empty sentence")
            digest = hashlib.blake2b(
                f"{self.seed}|{s}".encode("utf-8"), digest_size=8
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            rows.append(rng.standard_normal(self.dim))
        return np.stack(rows)


class SpectralAudioEncoder:
    """Log band-energy frames: 25 ms windows, 10 ms hop, `bands` outputs.

    Silence encodes to all-zero frames, so distinct content yields
    distinct features without any learned weights.
    """

    def __init__(self, bands: int = 64):
        if bands < 1:
            raise ValueError("bands must be positive")
        self.dim = bands

    def encode(self, samples: np.ndarray, rate: int) -> np.ndarray:
        if rate <= 0:
            raise ValueError("sample rate must be positive")
        win = max(2, int(round(0.025 * rate)))
        hop = max(1, int(round(0.010 * rate)))
        x = np.asarray(samples, dtype=np.float64)
        if x.shape[0] < win:
            x = np.pad(x, (0, win - x.shape[0]))
        starts = range(0, x.shape[0] - win + 1, hop)
        taper = np.hanning(win)
        frames = []
        for s in starts:
            spectrum = np.abs(np.fft.rfft(x[s : s + win] * taper)) ** 2
            edges = np.linspace(0, spectrum.shape[0], self.dim + 1).astype(int)
            banded = np.array([
                spectrum[a:b].mean() if b > a else 0.0
                for a, b in zip(edges, edges[1:])
            ])
            frames.append(np.log1p(banded))
        return np.stack(frames)


class PretrainedTextEncoder:
    """Final-layer [CLS] state of a cached transformer language model."""

    def __init__(self, model_name: str = "bert-base-uncased"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderUnavailableError(
                f"pretrained text encoder needs torch+transformers: {exc}"
            ) from exc
        try:
            self._tokenizer = AutoTokenizer.from_pretrained(model_name)
            self._model = AutoModel.from_pretrained(model_name)
        except Exception as exc:
            raise EncoderUnavailableError(
                f"could not load {model_name} (offline and not cached?): {exc}"
            ) from exc
        self._model.eval()
        self._torch = torch
        self.dim = int(self._model.config.hidden_size)

    def encode(self, sentences: list[str]) -> np.ndarray:
        if any(not s.strip() for s in sentences):
            raise ValueError("cannot encode an empty sentence")
        with self._torch.no_grad():
            batch = self._tokenizer(sentences, return_tensors="pt", padding=True,
                                    truncation=True)
            hidden = self._model(**batch).last_hidden_state
        return hidden[:, 0, :].numpy().astype(np.float64)


class PretrainedAudioEncoder:
    """Frame-level speech representations from a cached wav2vec2 model."""

    def __init__(self, model_name: str = "facebook/wav2vec2-base-960h"):
        try:
            import torch
            from transformers import Wav2Vec2Model
        except ImportError as exc:
            raise EncoderUnavailableError(
                f"pretrained audio encoder needs torch+transformers: {exc}"
            ) from exc
        try:
            self._model = Wav2Vec2Model.from_pretrained(model_name)
        except Exception as exc:
            raise EncoderUnavailableError(
                f"could not load {model_name} (offline and not cached?): {exc}"
            ) from exc
        self._model.eval()
        self._torch = torch
        self.dim = int(self._model.config.hidden_size)

    def encode(self, samples: np.ndarray, rate: int) -> np.ndarray:
        if rate != 16000:
            raise ValueError("wav2vec2 expects 16 kHz input")
        with self._torch.no_grad():
            wave = self._torch.as_tensor(samples, dtype=self._torch.float32)[None, :]
            hidden = self._model(wave).last_hidden_state
        return hidden[0].numpy().astype(np.float64)


TEXT_ENCODERS = {"hashed": HashedTextEncoder, "pretrained": PretrainedTextEncoder}
AUDIO_ENCODERS = {"spectral": SpectralAudioEncoder, "pretrained": PretrainedAudioEncoder}


def make_text_encoder(kind: str, seed: int = 0):
    if kind not in TEXT_ENCODERS:
        raise ValueError(f"unknown text encoder {kind!r}; choices {sorted(TEXT_ENCODERS)}")
    return HashedTextEncoder(seed=seed) if kind == "hashed" else PretrainedTextEncoder()


def make_audio_encoder(kind: str):
    if kind not in AUDIO_ENCODERS:
        raise ValueError(f"unknown audio encoder {kind!r}; choices {sorted(AUDIO_ENCODERS)}")
    return AUDIO_ENCODERS[kind]()
