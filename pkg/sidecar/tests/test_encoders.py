import numpy as np
import pytest

from embed_sidecar.encoders import (
    EncoderUnavailableError,
    HashedTextEncoder,
    SpectralAudioEncoder,
    make_audio_encoder,
    make_text_encoder,
)
from embed_sidecar.extract import resample_series
from embed_sidecar.pca import fit_audio_pca

from .conftest import RATE, speech_like


class TestHashedText:
    def test_shape_and_dtype(self):
        out = HashedTextEncoder().encode(["one", "two", "three"])
        assert out.shape == (3, 768)
        assert out.dtype == np.float64

    def test_same_sentence_identical(self):
        out = HashedTextEncoder(seed=4).encode(["repeat me", "repeat me"])
        assert np.array_equal(out[0], out[1])

    def test_different_sentences_differ(self):
        out = HashedTextEncoder().encode(["alpha", "beta"])
        assert not np.array_equal(out[0], out[1])

    def test_seed_changes_vectors(self):
        a = HashedTextEncoder(seed=0).encode(["alpha"])
        b = HashedTextEncoder(seed=1).encode(["alpha"])
        assert not np.array_equal(a, b)

    def test_deterministic_across_instances(self):
        a = HashedTextEncoder(seed=7).encode(["x y z"])
        b = HashedTextEncoder(seed=7).encode(["x y z"])
        assert np.array_equal(a, b)

    def test_empty_sentence_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            HashedTextEncoder().encode(["fine", "  "])


class TestSpectralAudio:
    def test_frame_series_shape(self):
        enc = SpectralAudioEncoder(bands=64)
        out = enc.encode(speech_like(1.0), RATE)
        # 25 ms window, 10 ms hop over 1 s
        assert out.shape == (98, 64)

    def test_silence_is_zero(self):
        out = SpectralAudioEncoder().encode(np.zeros(RATE), RATE)
        assert np.allclose(out, 0.0)

    def test_speech_differs_from_silence(self):
        enc = SpectralAudioEncoder()
        speech = enc.encode(speech_like(1.0), RATE)
        quiet = enc.encode(np.zeros(RATE), RATE)
        assert np.linalg.norm(speech - quiet) > 1.0

    def test_short_input_padded(self):
        out = SpectralAudioEncoder().encode(np.zeros(10), RATE)
        assert out.shape[0] == 1

    def test_deterministic(self):
        enc = SpectralAudioEncoder()
        x = speech_like(0.5, seed=9)
        assert np.array_equal(enc.encode(x, RATE), enc.encode(x, RATE))

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            SpectralAudioEncoder().encode(np.zeros(100), 0)


class TestResample:
    def test_fixed_frame_count(self):
        series = np.arange(50, dtype=float).reshape(10, 5)
        out = resample_series(series, 32)
        assert out.shape == (32, 5)
        np.testing.assert_allclose(out[0], series[0])
        np.testing.assert_allclose(out[-1], series[-1])

    def test_linear_ramp_preserved(self):
        ramp = np.linspace(0, 1, 7)[:, None]
        out = resample_series(ramp, 13)
        np.testing.assert_allclose(out[:, 0], np.linspace(0, 1, 13), atol=1e-12)

    def test_single_frame_tiled(self):
        out = resample_series(np.array([[3.0, 4.0]]), 8)
        assert out.shape == (8, 2)
        assert np.all(out == [3.0, 4.0])


class TestAudioPca:
    def test_orthonormal_rows(self):
        rng = np.random.default_rng(5)
        rows = rng.standard_normal((40, 12))
        pca = fit_audio_pca(rows, 6)
        gram = pca.components @ pca.components.T
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-10)

    def test_rank_deficit_pads_zero_rows(self):
        rng = np.random.default_rng(6)
        rows = rng.standard_normal((3, 10))
        pca = fit_audio_pca(rows, 8)
        assert pca.output_dim == 8
        assert np.allclose(pca.components[2:], 0.0)

    def test_transform_shape_and_centering(self):
        rng = np.random.default_rng(7)
        rows = rng.standard_normal((30, 9))
        pca = fit_audio_pca(rows, 4)
        out = pca.transform(rows)
        assert out.shape == (30, 4)
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-10)

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(8)
        rows = rng.standard_normal((25, 6))
        a = fit_audio_pca(rows, 3).components
        b = fit_audio_pca(rows.copy(), 3).components
        assert np.array_equal(a, b)
        for row in a:
            assert row[np.argmax(np.abs(row))] > 0

    def test_dim_validation(self):
        rng = np.random.default_rng(9)
        pca = fit_audio_pca(rng.standard_normal((5, 4)), 2)
        with pytest.raises(ValueError, match="4-d"):
            pca.transform(np.zeros((2, 7)))
        with pytest.raises(ValueError):
            fit_audio_pca(rng.standard_normal((1, 4)), 2)


class TestFactories:
    def test_known_kinds(self):
        assert make_text_encoder("hashed", seed=3).dim == 768
        assert make_audio_encoder("spectral").dim == 64

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown"):
            make_text_encoder("nope")
        with pytest.raises(ValueError, match="unknown"):
            make_audio_encoder("nope")

    def test_pretrained_unavailable_offline(self, monkeypatch):
        monkeypatch.setenv("HF_HUB_OFFLINE", "1")
        monkeypatch.setenv("TRANSFORMERS_OFFLINE", "1")
        try:
            enc = make_text_encoder("pretrained")
        except EncoderUnavailableError as exc:
            assert "could not load" in str(exc) or "needs torch" in str(exc)
        else:
            pytest.skip(f"pretrained model cached locally (dim {enc.dim})")
