"""Command line entry point: `embed-sidecar extract`."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .encoders import EncoderUnavailableError, make_audio_encoder, make_text_encoder
from .extract import run_extraction
from .manifest import AUDIO_DIMS, load_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-sidecar",
        description="Batch-extract sentence text/audio features into TRMF files.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("extract", help="run extraction over a manifest")
    sub.add_argument("--manifest", required=True, help="TSV of audio/transcript/boundaries")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--audio-dim", type=int, default=512, choices=AUDIO_DIMS)
    sub.add_argument("--text-encoder", default="hashed", choices=("hashed", "pretrained"))
    sub.add_argument("--audio-encoder", default="spectral", choices=("spectral", "pretrained"))
    sub.add_argument("--seed", type=int, default=0, help="seed for the hashed text encoder")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        manifest = load_manifest(args.manifest, args.out, audio_dim=args.audio_dim)
        text_encoder = make_text_encoder(args.text_encoder, seed=args.seed)
        audio_encoder = make_audio_encoder(args.audio_encoder)
        result = run_extraction(manifest, text_encoder, audio_encoder)
    except (ValueError, OSError, KeyError, EncoderUnavailableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(dataclasses.asdict(result), separators=(",", ":")))
    return 0


if __name__ == "__main__":
    sys.exit(main())
