"""Cross-component checks: files written here must parse in the engine package.

These tests exercise the one shared contract, the TRMF byte format, by
reading sidecar output through the engine's own reader.
"""

import numpy as np
import pytest

trimm_trmf = pytest.importorskip("trimm.trmf")
trimm_features = pytest.importorskip("trimm.features")

from embed_sidecar.encoders import HashedTextEncoder, SpectralAudioEncoder
from embed_sidecar.extract import AUDIO_FILE, PCA_FILE, TEXT_FILE, run_extraction
from embed_sidecar.manifest import load_manifest
from embed_sidecar.pca import fit_audio_pca


@pytest.fixture
def extracted(corpus, tmp_path):
    out = tmp_path / "conf"
    manifest = load_manifest(corpus, out)
    text_enc = HashedTextEncoder(seed=0)
    result = run_extraction(manifest, text_enc, SpectralAudioEncoder())
    sentences = ["hello there friend", "quite a fine day", "nothing to hear"]
    return {
        "out": out,
        "result": result,
        "text_vectors": text_enc.encode(sentences),
    }


class TestEngineReadsSidecarFiles:
    def test_text_features(self, extracted):
        modality, vectors, times = trimm_trmf.read_features(
            extracted["out"] / TEXT_FILE, expect_modality=0
        )
        assert modality == 0
        assert vectors.shape == (3, 768) and vectors.dtype == np.float32
        np.testing.assert_allclose(times, [0.0, 1.3, 2.6], atol=1e-9)

    def test_text_vectors_bit_exact(self, extracted):
        _, vectors, _ = trimm_trmf.read_features(
            extracted["out"] / TEXT_FILE, expect_modality=0
        )
        expected = np.asarray(extracted["text_vectors"], dtype="<f4")
        assert np.array_equal(vectors, expected)

    def test_audio_features(self, extracted):
        modality, vectors, times = trimm_trmf.read_features(
            extracted["out"] / AUDIO_FILE, expect_modality=1
        )
        assert modality == 1
        assert vectors.shape == (3, 512) and vectors.dtype == np.float32
        np.testing.assert_allclose(times, [1.3, 1.3, 1.5], atol=1e-9)

    def test_pca_model(self, extracted):
        pca = trimm_features.load_pca(extracted["out"] / PCA_FILE)
        assert pca.mean.shape == (32 * 64,)
        assert pca.components.shape == (512, 32 * 64)

    def test_wide_audio_variant(self, corpus, tmp_path):
        out = tmp_path / "wide"
        manifest = load_manifest(corpus, out, audio_dim=2048)
        run_extraction(manifest, HashedTextEncoder(seed=0), SpectralAudioEncoder())
        _, vectors, _ = trimm_trmf.read_features(out / AUDIO_FILE, expect_modality=1)
        assert vectors.shape == (3, 2048)
        pca = trimm_features.load_pca(out / PCA_FILE)
        assert pca.components.shape == (2048, 32 * 64)


class TestBitExactRoundTrip:
    def test_features_survive_engine_rewrite(self, extracted, tmp_path):
        src = extracted["out"] / TEXT_FILE
        modality, vectors, times = trimm_trmf.read_features(src, expect_modality=0)
        back = tmp_path / "back.trmf"
        trimm_trmf.write_features(back, modality, vectors, times)
        assert back.read_bytes() == src.read_bytes()

    def test_pca_values_match_fit(self, corpus, tmp_path):
        out = tmp_path / "out"
        manifest = load_manifest(corpus, out)
        run_extraction(manifest, HashedTextEncoder(seed=0), SpectralAudioEncoder())
        # refit on the same corpus: the stored model must be the f32 cast
        # of exactly this solution
        from embed_sidecar.extract import collect_sentences, encode_audio_matrix

        _, clips, _, _ = collect_sentences(manifest)
        rows = encode_audio_matrix(clips, SpectralAudioEncoder(), 32)
        refit = fit_audio_pca(rows, 512)
        pca = trimm_features.load_pca(out / PCA_FILE)
        assert np.array_equal(pca.mean, np.asarray(refit.mean, dtype="<f4"))
        assert np.array_equal(pca.components, np.asarray(refit.components, dtype="<f4"))
