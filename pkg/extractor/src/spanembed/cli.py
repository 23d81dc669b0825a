"""Command line for the span-embedding extractor.

    spanembed extract --corpus x.jsonl --model bert-base-uncased --pooling mean --out x.aemb

The bare `extract` console script is an alias for the single subcommand.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .extract import POOLINGS, ExtractError, extract


def _add_extract_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", required=True, help="corpus JSONL file")
    parser.add_argument("--model", required=True, help="encoder model id or local path")
    parser.add_argument("--pooling", choices=POOLINGS, default="mean")
    parser.add_argument("--out", required=True, help="output .aemb store path")
    parser.add_argument("--layer", type=int, default=-1,
                        help="encoder hidden layer (-1 = final)")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--max-length", type=int, default=512)


def _run(args: argparse.Namespace) -> int:
    corpus = Path(args.corpus)
    if not corpus.exists():
        print(f"error: corpus not found: {corpus}", file=sys.stderr)
        return 1
    try:
        report = extract(
            corpus, args.model, args.pooling, Path(args.out),
            layer=args.layer, batch_size=args.batch_size, max_length=args.max_length,
        )
    except ExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        f"wrote {report.n_written} vectors (dim {report.dim}) from "
        f"{report.n_sentences} sentences to {args.out}; "
        f"{len(report.skipped)} span(s) skipped"
    )
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING)
    parser = argparse.ArgumentParser(prog="spanembed")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_extract_args(sub.add_parser("extract", help="embed corpus spans into a store"))
    return _run(parser.parse_args(argv))


def main_extract(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING)
    parser = argparse.ArgumentParser(prog="extract")
    _add_extract_args(parser)
    return _run(parser.parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
