"""CLI entry point: run the extractor from a JSON config."""

from __future__ import annotations

import argparse
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lop-extract",
        description="Extract an LOPF feature cloud from a posed RGB-D sequence "
                    "using real image-text and sentence encoders.",
    )
    parser.add_argument("--config", required=True, help="JSON extractor config")
    args = parser.parse_args(argv)

    from .pipeline import ExtractorConfig, extract
    from .sequence import ExtractError

    try:
        summary = extract(ExtractorConfig.load(args.config))
    except ExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"extracted {summary['points']} points "
        f"(dv={summary['dv']}, ds={summary['ds']}) from {summary['frames']} frames\n"
        f"cloud -> {summary['cloud']}\nscene -> {summary['scene']}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
