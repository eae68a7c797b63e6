import numpy as np
import pytest

from embed_sidecar.audio import read_wav, sentence_durations, sentence_slices
from embed_sidecar.manifest import (
    ExtractionManifest,
    ManifestEntry,
    load_manifest,
    load_transcript,
)

from .conftest import RATE, write_wav16


class TestLoadManifest:
    def test_basic(self, corpus, tmp_path):
        m = load_manifest(corpus, tmp_path / "out")
        assert len(m.entries) == 2
        assert m.entries[0].audio_path.name == "speech.wav"
        assert m.entries[0].boundaries == (0.0, 1.3)
        assert m.entries[1].boundaries == (0.0,)
        assert m.audio_dim == 512 and m.text_dim == 768

    def test_relative_paths_resolve_against_manifest_dir(self, corpus, tmp_path):
        m = load_manifest(corpus, tmp_path / "out")
        for e in m.entries:
            assert e.audio_path.exists() and e.transcript_path.exists()

    def test_wrong_column_count(self, tmp_path):
        bad = tmp_path / "bad.tsv"
        bad.write_text("only_two\tcolumns\n")
        with pytest.raises(ValueError, match="3 tab-separated"):
            load_manifest(bad, tmp_path / "out")

    def test_unsorted_boundaries(self, tmp_path):
        write_wav16(tmp_path / "a.wav", np.zeros(RATE))
        (tmp_path / "a.txt").write_text("x\ny\n")
        bad = tmp_path / "bad.tsv"
        bad.write_text("a.wav\ta.txt\t0.5,0.2\n")
        with pytest.raises(ValueError, match="ascending"):
            load_manifest(bad, tmp_path / "out")

    def test_negative_boundary(self, tmp_path):
        write_wav16(tmp_path / "a.wav", np.zeros(RATE))
        (tmp_path / "a.txt").write_text("x\n")
        bad = tmp_path / "bad.tsv"
        bad.write_text("a.wav\ta.txt\t-0.1\n")
        with pytest.raises(ValueError, match="negative"):
            load_manifest(bad, tmp_path / "out")

    def test_missing_transcript(self, tmp_path):
        write_wav16(tmp_path / "a.wav", np.zeros(RATE))
        bad = tmp_path / "bad.tsv"
        bad.write_text("a.wav\tnope.txt\t0.0\n")
        with pytest.raises(FileNotFoundError):
            load_manifest(bad, tmp_path / "out")

    def test_invalid_audio_dim(self, corpus, tmp_path):
        with pytest.raises(ValueError, match="audio_dim"):
            load_manifest(corpus, tmp_path / "out", audio_dim=300)

    def test_both_audio_dims_accepted(self, corpus, tmp_path):
        for dim in (512, 2048):
            assert load_manifest(corpus, tmp_path / "out", audio_dim=dim).audio_dim == dim

    def test_empty_manifest(self, tmp_path):
        empty = tmp_path / "empty.tsv"
        empty.write_text("# nothing\n")
        with pytest.raises(ValueError, match="no entries"):
            load_manifest(empty, tmp_path / "out")

    def test_entry_requires_boundaries(self, tmp_path):
        with pytest.raises(ValueError, match="boundaries"):
            ManifestEntry(tmp_path / "a.wav", tmp_path / "a.txt", ())

    def test_fixed_text_dim(self, corpus, tmp_path):
        m = load_manifest(corpus, tmp_path / "out")
        with pytest.raises(ValueError, match="768"):
            ExtractionManifest(entries=m.entries, out_dir=m.out_dir, text_dim=512)


class TestTranscript:
    def test_sentences(self, corpus):
        lines = load_transcript(corpus.parent / "speech.txt")
        assert lines == ["hello there friend", "quite a fine day"]

    def test_empty_line_rejected(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("first\n\nthird\n")
        with pytest.raises(ValueError, match="empty sentence"):
            load_transcript(p)

    def test_trailing_blank_lines_ignored(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("only one\n\n\n")
        assert load_transcript(p) == ["only one"]

    def test_empty_file(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_transcript(p)


class TestAudio:
    def test_wav_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        samples = rng.uniform(-0.9, 0.9, RATE)
        write_wav16(tmp_path / "x.wav", samples)
        back, rate = read_wav(tmp_path / "x.wav")
        assert rate == RATE
        assert np.abs(back - samples).max() <= 0.5 / 32768 + 1e-12

    def test_stereo_rejected(self, tmp_path):
        import wave
        with wave.open(str(tmp_path / "st.wav"), "wb") as w:
            w.setnchannels(2)
            w.setsampwidth(2)
            w.setframerate(RATE)
            w.writeframes(b"\x00" * 400)
        with pytest.raises(ValueError, match="mono"):
            read_wav(tmp_path / "st.wav")

    def test_slices_and_durations(self):
        samples = np.zeros(2 * RATE)
        slices = sentence_slices(samples, RATE, (0.0, 0.5, 1.25))
        assert [len(s) for s in slices] == [8000, 12000, 12000]
        durs = sentence_durations(samples, RATE, (0.0, 0.5, 1.25))
        np.testing.assert_allclose(durs, [0.5, 0.75, 0.75])

    def test_boundary_past_end(self):
        with pytest.raises(ValueError, match="past the audio end"):
            sentence_slices(np.zeros(RATE), RATE, (0.0, 1.5))
