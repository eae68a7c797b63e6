"""Batch extraction of sentence-level text and audio features.

Reads a TSV manifest of (audio, transcript, sentence boundaries) rows,
encodes each sentence with pluggable text/audio encoders, reduces the
audio time-series with PCA, and writes TRMF feature files that the
gesture engine consumes directly. The engine is a separate package;
the only shared contract is the TRMF byte format.
"""

__version__ = "0.1.0"
