import logging

import numpy as np
import pytest

from trimm.features import (
    ACTION_DIM,
    ActionFeature,
    PcaModel,
    extract_action_feature,
    fit_pca,
    flatten_clip,
    load_pca,
    pca_inverse,
    pca_project,
    save_pca,
)

from .conftest import make_clip


def svd_reference(samples, output_dim):
    """Independent principal directions via SVD of the centered matrix."""
    x = samples - samples.mean(axis=0)
    _, s, vt = np.linalg.svd(x, full_matrices=False)
    var = s**2 / (len(samples) - 1)
    return vt[:output_dim], var[:output_dim]


class TestFitPca:
    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(60)
        # anisotropic cloud with well-separated spectrum
        scales = np.array([10.0, 5.0, 2.0, 1.0, 0.5, 0.2])
        samples = rng.standard_normal((300, 6)) * scales + rng.uniform(-4, 4, 6)
        model = fit_pca(samples, 4)
        ref_dirs, ref_var = svd_reference(samples, 4)
        np.testing.assert_allclose(model.explained_variance, ref_var, rtol=1e-8)
        for ours, ref in zip(model.components, ref_dirs):
            # eigenvectors match up to sign
            assert min(np.abs(ours - ref).max(), np.abs(ours + ref).max()) < 1e-8

    def test_components_orthonormal(self):
        rng = np.random.default_rng(61)
        samples = rng.standard_normal((80, 12))
        model = fit_pca(samples, 12)
        np.testing.assert_allclose(
            model.components @ model.components.T, np.eye(12), atol=1e-10
        )

    def test_variance_descending(self):
        rng = np.random.default_rng(62)
        samples = rng.standard_normal((100, 9)) * np.arange(1, 10)
        model = fit_pca(samples, 9)
        ev = model.explained_variance
        assert all(a >= b - 1e-12 for a, b in zip(ev, ev[1:]))

    def test_mean_stored(self):
        rng = np.random.default_rng(63)
        samples = rng.standard_normal((50, 4)) + [1.0, -2.0, 3.0, 0.5]
        model = fit_pca(samples, 2)
        np.testing.assert_allclose(model.mean, samples.mean(axis=0), atol=1e-12)

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(64)
        samples = rng.standard_normal((60, 5)) * [3, 2, 1, 0.5, 0.1]
        a = fit_pca(samples, 3)
        b = fit_pca(samples.copy(), 3)
        np.testing.assert_array_equal(a.components, b.components)
        for row in a.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_rank_deficit_pads_with_zeros(self, caplog):
        rng = np.random.default_rng(65)
        samples = rng.standard_normal((4, 10))  # rank at most 4
        with caplog.at_level(logging.WARNING):
            model = fit_pca(samples, 8)
        assert model.components.shape == (8, 10)
        np.testing.assert_array_equal(model.components[4:], 0.0)
        np.testing.assert_array_equal(model.explained_variance[4:], 0.0)
        assert any("pad" in r.message or "rank" in r.message for r in caplog.records)

    def test_reconstruction_full_rank(self):
        rng = np.random.default_rng(66)
        samples = rng.standard_normal((40, 6))
        model = fit_pca(samples, 6)
        recon = pca_inverse(model, pca_project(model, samples))
        np.testing.assert_allclose(recon, samples, atol=1e-9)

    def test_projection_reduces_reconstruction_error_monotonically(self):
        rng = np.random.default_rng(67)
        samples = rng.standard_normal((100, 8)) * np.arange(8, 0, -1)
        errs = []
        for k in (1, 4, 8):
            model = fit_pca(samples, k)
            recon = pca_inverse(model, pca_project(model, samples))
            errs.append(np.linalg.norm(recon - samples))
        assert errs[0] > errs[1] > errs[2]

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            fit_pca(np.zeros((1, 5)), 2)

    def test_non_2d_rejected(self):
        with pytest.raises(ValueError):
            fit_pca(np.zeros(10), 2)

    def test_zero_variance_warns(self, caplog):
        samples = np.ones((5, 3))
        with caplog.at_level(logging.WARNING):
            fit_pca(samples, 2)
        assert any("variance" in r.message for r in caplog.records)


class TestPcaModel:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            PcaModel(mean=np.zeros(4), components=np.zeros((2, 5)),
                     explained_variance=np.zeros(2))
        with pytest.raises(ValueError):
            PcaModel(mean=np.zeros(5), components=np.zeros((2, 5)),
                     explained_variance=np.zeros(3))

    def test_project_dim_checked(self):
        model = PcaModel(np.zeros(4), np.eye(4)[:2], np.ones(2))
        with pytest.raises(ValueError):
            pca_project(model, np.zeros(5))
        with pytest.raises(ValueError):
            pca_inverse(model, np.zeros(3))


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(68)
        samples = rng.standard_normal((30, 7))
        model = fit_pca(samples, 3)
        p = tmp_path / "pca.trmf"
        save_pca(p, model)
        again = load_pca(p)
        # storage is float32; projections agree to that precision
        np.testing.assert_allclose(again.mean, model.mean, atol=1e-6)
        np.testing.assert_allclose(again.components, model.components, atol=1e-6)
        np.testing.assert_array_equal(again.explained_variance, 0.0)

    def test_loaded_model_projects(self, tmp_path):
        rng = np.random.default_rng(69)
        samples = rng.standard_normal((30, 7))
        model = fit_pca(samples, 3)
        p = tmp_path / "pca.trmf"
        save_pca(p, model)
        again = load_pca(p)
        np.testing.assert_allclose(
            pca_project(again, samples), pca_project(model, samples), atol=1e-4
        )


class TestActionFeatures:
    def test_flatten_shape(self):
        clip = make_clip(70, 2.0, fps=60)
        flat = flatten_clip(clip, resample_frames=30)
        assert flat.shape == (30 * clip.total_channels,)
        assert flat.dtype == np.float64

    def test_flatten_is_deterministic(self):
        clip = make_clip(71, 1.5)
        np.testing.assert_array_equal(flatten_clip(clip), flatten_clip(clip.copy()))

    def test_extract_requires_action_dim(self):
        clip = make_clip(72, 1.0)
        small = fit_pca(np.random.default_rng(0).standard_normal((10, 360)), 4)
        with pytest.raises(ValueError):
            extract_action_feature(clip, small)

    def test_extract_action_feature(self):
        clips = [make_clip(100 + i, 1.0 + 0.1 * i, fps=30) for i in range(6)]
        flats = np.stack([flatten_clip(c) for c in clips])
        model = fit_pca(flats, ACTION_DIM)
        feat = extract_action_feature(clips[0], model)
        assert feat.values.shape == (ACTION_DIM,)
        assert feat.source_duration == pytest.approx(clips[0].duration)

    def test_action_feature_validation(self):
        with pytest.raises(ValueError):
            ActionFeature(values=np.zeros(10), source_duration=1.0)
        with pytest.raises(ValueError):
            ActionFeature(values=np.zeros(ACTION_DIM), source_duration=0.0)
