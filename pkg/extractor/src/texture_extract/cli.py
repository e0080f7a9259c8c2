"""texture-extract: belief-field files from a frozen infilling model."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import make_sample_corpus
from .extract import CONDITIONS, DEFAULT_GRID, ExtractionJob, run_job
from .oracles import ExtractionError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texture-extract",
        description="Produce canonical belief-field files by querying a frozen "
        "masked/infilling model over a context-radius grid.",
    )
    parser.add_argument("--corpus", help="input text file")
    parser.add_argument(
        "--model",
        default="counts",
        help="belief oracle: 'counts' (count model fit on the corpus), "
        "'counts:<path>' (fit on another text), or 'hf:<name-or-path>' "
        "(transformers fill-mask checkpoint, e.g. hf:distilroberta-base)",
    )
    parser.add_argument("--slots", type=int, default=200, help="slots to sample")
    parser.add_argument("--grid", default=",".join(map(str, DEFAULT_GRID)),
                        help="comma-separated context radii")
    parser.add_argument("--k", type=int, default=20, help="top-k per side for the support")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--condition", choices=CONDITIONS, default="real")
    parser.add_argument("--out", help="output belief-field JSON")
    parser.add_argument(
        "--write-sample-corpus",
        metavar="PATH",
        help="write the bundled deterministic sample corpus to PATH and exit",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.write_sample_corpus:
        Path(args.write_sample_corpus).write_text(make_sample_corpus(), encoding="utf-8")
        print(f"sample corpus -> {args.write_sample_corpus}")
        return 0
    if not args.corpus or not args.out:
        print("error: --corpus and --out are required", file=sys.stderr)
        return 2
    try:
        job = ExtractionJob(
            corpus=args.corpus,
            model=args.model,
            slots=args.slots,
            grid=tuple(int(r) for r in args.grid.split(",")),
            k=args.k,
            seed=args.seed,
            condition=args.condition,
        )
        n = run_job(job, args.out)
    except (ExtractionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    print(f"extract: {n} slots ({args.condition}) -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
