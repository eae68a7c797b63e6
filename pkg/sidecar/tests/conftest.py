import wave

import numpy as np
import pytest

RATE = 16000


def write_wav16(path, samples, rate=RATE):
    data = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(data.tobytes())


def speech_like(seconds, seed=0, rate=RATE):
    """Band-limited tones with a syllable-ish amplitude envelope."""
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * rate)) / rate
    x = np.zeros_like(t)
    for _ in range(4):
        f = rng.uniform(120, 900)
        x += rng.uniform(0.1, 0.3) * np.sin(2 * np.pi * f * t + rng.uniform(0, 6.28))
    envelope = 0.55 + 0.45 * np.sin(2 * np.pi * 3.1 * t + 1.0)
    return x * envelope


@pytest.fixture
def corpus(tmp_path):
    """Two WAVs (speech-like and silent), transcripts, and a manifest."""
    write_wav16(tmp_path / "speech.wav", speech_like(2.6, seed=1))
    (tmp_path / "speech.txt").write_text("hello there friend\nquite a fine day\n")
    write_wav16(tmp_path / "quiet.wav", np.zeros(int(1.5 * RATE)))
    (tmp_path / "quiet.txt").write_text("nothing to hear\n")
    manifest = tmp_path / "corpus.tsv"
    manifest.write_text(
        "# toy corpus\n"
        "speech.wav\tspeech.txt\t0.0,1.3\n"
        "quiet.wav\tquiet.txt\t0.0\n"
    )
    return manifest
