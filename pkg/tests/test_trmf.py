import struct

import numpy as np
import pytest

from trimm import trmf


class TestHeader:
    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.trmf"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(trmf.TrmfError, match="magic"):
            trmf.read_features(p)

    def test_bad_version(self, tmp_path):
        p = tmp_path / "bad.trmf"
        p.write_bytes(trmf.MAGIC + struct.pack("<II", 99, trmf.MODALITY_TEXT))
        with pytest.raises(trmf.TrmfError, match="version"):
            trmf.read_features(p)

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "bad.trmf"
        p.write_bytes(b"TR")
        with pytest.raises(trmf.TrmfError, match="truncat"):
            trmf.read_features(p)

    def test_wrong_modality(self, tmp_path):
        p = tmp_path / "feat.trmf"
        trmf.write_features(p, trmf.MODALITY_TEXT, np.zeros((1, 4), np.float32), [0.0])
        with pytest.raises(trmf.TrmfError):
            trmf.read_features(p, expect_modality=trmf.MODALITY_AUDIO)
        with pytest.raises(trmf.TrmfError):
            trmf.read_pca(p)


class TestFeatures:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(50)
        vectors = rng.standard_normal((5, 768)).astype(np.float32)
        times = np.array([0.0, 1.5, 3.2, 4.4, 9.9])
        p = tmp_path / "text.trmf"
        trmf.write_features(p, trmf.MODALITY_TEXT, vectors, times)
        modality, got_v, got_t = trmf.read_features(p)
        assert modality == trmf.MODALITY_TEXT
        assert got_v.dtype == np.float32
        np.testing.assert_array_equal(got_v, vectors)
        np.testing.assert_array_equal(got_t, times)

    def test_bit_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(51)
        vectors = rng.standard_normal((3, 512)).astype(np.float32)
        times = rng.uniform(0, 10, 3)
        p1, p2 = tmp_path / "a.trmf", tmp_path / "b.trmf"
        trmf.write_features(p1, trmf.MODALITY_AUDIO, vectors, times)
        m, v, t = trmf.read_features(p1)
        trmf.write_features(p2, m, v, t)
        assert p1.read_bytes() == p2.read_bytes()

    def test_empty_set(self, tmp_path):
        p = tmp_path / "empty.trmf"
        trmf.write_features(p, trmf.MODALITY_MOTION,
                            np.zeros((0, 750), np.float32), np.zeros(0))
        _, v, t = trmf.read_features(p)
        assert v.shape == (0, 750)
        assert t.shape == (0,)

    def test_count_mismatch_rejected(self, tmp_path):
        with pytest.raises(trmf.TrmfError):
            trmf.write_features(tmp_path / "x.trmf", trmf.MODALITY_TEXT,
                                np.zeros((3, 4), np.float32), [0.0, 1.0])

    def test_non_feature_modality_rejected(self, tmp_path):
        with pytest.raises(trmf.TrmfError):
            trmf.write_features(tmp_path / "x.trmf", trmf.MODALITY_PCA,
                                np.zeros((1, 4), np.float32), [0.0])

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "feat.trmf"
        trmf.write_features(p, trmf.MODALITY_TEXT,
                            np.ones((2, 8), np.float32), [0.0, 1.0])
        data = p.read_bytes()
        p.write_bytes(data[:-4])
        with pytest.raises(trmf.TrmfError):
            trmf.read_features(p)

    def test_trailing_bytes_rejected(self, tmp_path):
        p = tmp_path / "feat.trmf"
        trmf.write_features(p, trmf.MODALITY_TEXT,
                            np.ones((2, 8), np.float32), [0.0, 1.0])
        p.write_bytes(p.read_bytes() + b"\x00\x00")
        with pytest.raises(trmf.TrmfError, match="trailing"):
            trmf.read_features(p)


class TestPca:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(52)
        mean = rng.standard_normal(16).astype(np.float32)
        comps = rng.standard_normal((4, 16)).astype(np.float32)
        p = tmp_path / "pca.trmf"
        trmf.write_pca(p, mean, comps)
        got_mean, got_comps = trmf.read_pca(p)
        np.testing.assert_array_equal(got_mean, mean)
        np.testing.assert_array_equal(got_comps, comps)

    def test_shape_mismatch_rejected(self, tmp_path):
        with pytest.raises(trmf.TrmfError):
            trmf.write_pca(tmp_path / "x.trmf", np.zeros(5), np.zeros((4, 16)))


class TestTensors:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(53)
        tensors = {
            "a.weight": rng.standard_normal((3, 4)).astype(np.float32),
            "a.bias": rng.standard_normal(4).astype(np.float32),
            "scalar": np.float32(2.5).reshape(()),
        }
        p = tmp_path / "ckpt.trmf"
        trmf.write_tensors(p, tensors)
        got = trmf.read_tensors(p)
        assert set(got) == set(tensors)
        for name in tensors:
            assert got[name].shape == tensors[name].shape
            np.testing.assert_array_equal(got[name], tensors[name])

    def test_zero_dim_tensor(self, tmp_path):
        p = tmp_path / "s.trmf"
        trmf.write_tensors(p, {"v": np.asarray(np.float32(7.0))})
        got = trmf.read_tensors(p)
        assert got["v"].shape == ()
        assert float(got["v"]) == 7.0

    def test_order_preserved(self, tmp_path):
        names = [f"t{i}" for i in range(6)]
        tensors = {n: np.full(2, i, np.float32) for i, n in enumerate(names)}
        p = tmp_path / "o.trmf"
        trmf.write_tensors(p, tensors)
        assert list(trmf.read_tensors(p)) == names

    def test_trailing_bytes_rejected(self, tmp_path):
        p = tmp_path / "ckpt.trmf"
        trmf.write_tensors(p, {"x": np.zeros(2, np.float32)})
        p.write_bytes(p.read_bytes() + b"junk")
        with pytest.raises(trmf.TrmfError, match="trailing"):
            trmf.read_tensors(p)


class TestReaderWriter:
    def test_scalar_round_trip(self):
        w = trmf.Writer(trmf.MODALITY_GRAPH)
        w.u32(42)
        w.f64(3.25)
        w.f32_array(np.arange(4, dtype=np.float32))
        w.u32_array(np.array([7, 8], np.uint32))
        w.f64_array(np.array([1.5, -2.5]))
        modality, r = trmf.open_payload(w.bytes(), trmf.MODALITY_GRAPH)
        assert modality == trmf.MODALITY_GRAPH
        assert r.u32() == 42
        assert r.f64() == 3.25
        np.testing.assert_array_equal(r.f32_array(4), np.arange(4, dtype=np.float32))
        np.testing.assert_array_equal(r.u32_array(2), [7, 8])
        np.testing.assert_array_equal(r.f64_array(2), [1.5, -2.5])
        assert r.done()

    def test_overread_raises(self):
        w = trmf.Writer(trmf.MODALITY_GRAPH)
        w.u32(1)
        _, r = trmf.open_payload(w.bytes())
        r.u32()
        with pytest.raises(trmf.TrmfError):
            r.u32()
