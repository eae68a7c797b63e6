"""Extraction manifest: which audio goes with which transcript.

The manifest is a TSV file, one corpus item per line:

    path/to/audio.wav<TAB>path/to/transcript.txt<TAB>0.0,1.4,3.2

The third column lists sentence start times in seconds, one per
transcript line, sorted ascending. Relative paths resolve against the
manifest's own directory. Blank lines and '#' comments are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

TEXT_DIM = 768
AUDIO_DIMS = (512, 2048)


@dataclass(frozen=True)
class ManifestEntry:
    audio_path: Path
    transcript_path: Path
    boundaries: tuple[float, ...]

    def __post_init__(self):
        if not self.boundaries:
            raise ValueError(f"{self.audio_path}: no sentence boundaries")
        if any(b < 0 for b in self.boundaries):
            raise ValueError(f"{self.audio_path}: negative boundary")
        if any(b2 <= b1 for b1, b2 in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError(f"{self.audio_path}: boundaries must be strictly ascending")


@dataclass
class ExtractionManifest:
    entries: list[ManifestEntry]
    out_dir: Path
    text_dim: int = TEXT_DIM
    audio_dim: int = 512
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            raise ValueError("manifest has no entries")
        if self.text_dim != TEXT_DIM:
            raise ValueError(f"text_dim is fixed at {TEXT_DIM}")
        if self.audio_dim not in AUDIO_DIMS:
            raise ValueError(f"audio_dim must be one of {AUDIO_DIMS}")
        for e in self.entries:
            if not e.transcript_path.exists():
                raise FileNotFoundError(f"transcript missing: {e.transcript_path}")
            if not e.audio_path.exists():
                raise FileNotFoundError(f"audio missing: {e.audio_path}")


def _parse_boundaries(field_text: str, lineno: int) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in field_text.split(",") if tok.strip())
    except ValueError as exc:
        raise ValueError(f"manifest line {lineno}: bad boundary list: {exc}") from None


def load_manifest(path: str | Path, out_dir: str | Path, audio_dim: int = 512) -> ExtractionManifest:
    path = Path(path)
    base = path.parent
    entries = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise ValueError(
                f"manifest line {lineno}: expected 3 tab-separated columns, got {len(cols)}"
            )
        audio, transcript, bounds = cols
        entries.append(ManifestEntry(
            audio_path=(base / audio).resolve() if not Path(audio).is_absolute() else Path(audio),
            transcript_path=(base / transcript).resolve()
            if not Path(transcript).is_absolute() else Path(transcript),
            boundaries=_parse_boundaries(bounds, lineno),
        ))
    return ExtractionManifest(entries=entries, out_dir=Path(out_dir), audio_dim=audio_dim)


def load_transcript(path: Path) -> list[str]:
    """Sentences, one per line; an all-whitespace line is an error."""
    lines = path.read_text(encoding="utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    sentences = []
    for i, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            raise ValueError(f"{path}: empty sentence at line {i}")
        sentences.append(text)
    if not sentences:
        raise ValueError(f"{path}: transcript is empty")
    return sentences
