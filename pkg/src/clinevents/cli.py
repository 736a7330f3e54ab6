"""Command-line entry point; one subcommand per pipeline stage.

Exit codes: 0 success, 2 config error, 3 provider error, 4 data error.
Failures print a machine-readable error JSON to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import PipelineConfig, load_config, validate
from .errors import ClinEventsError, ConfigError, ProviderError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_DATA = 4

STAGES = {
    "chunk": pipeline.run_chunk,
    "retrieve": pipeline.run_retrieve,
    "annotate": pipeline.run_annotate,
    "clean": pipeline.run_clean,
    "bin": pipeline.run_bin,
    "pairs": pipeline.run_pairs,
    "sequences": pipeline.run_sequences,
    "stats": pipeline.run_stats,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clinevents",
        description="Extract temporally anchored clinical events from free-text notes.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--input", help="directory holding notes.jsonl and queries.jsonl")
    common.add_argument("--notes", help="notes file (csv or jsonl)")
    common.add_argument("--queries", help="queries file (csv or jsonl)")
    common.add_argument("--output", help="output directory")
    common.add_argument("--seed", type=int, help="override the split seed")
    common.add_argument("-v", "--verbose", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "split", "all"):
        sub.add_parser(name, parents=[common])
    conc = sub.add_parser("concordance", parents=[common])
    conc.add_argument("--reference", required=True, help="reference annotation file")
    conc.add_argument("--candidate", required=True, help="candidate annotation file")
    conc.add_argument("--max-distance", type=float, default=0.1,
                      help="cosine distance threshold for event matching")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.input:
        base = Path(args.input)
        for stem, attr in (("notes", "notes"), ("queries", "queries")):
            for ext in ("jsonl", "csv"):
                candidate = base / f"{stem}.{ext}"
                if candidate.exists():
                    setattr(cfg.inputs, attr, str(candidate))
                    break
    if args.notes:
        cfg.inputs.notes = args.notes
    if args.queries:
        cfg.inputs.queries = args.queries
    if args.output:
        cfg.output_dir = args.output
    if args.seed is not None:
        cfg.split.seed = args.seed
    validate(cfg)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        if args.command == "all":
            pipeline.run_all(cfg, seed=args.seed)
        elif args.command == "split":
            pipeline.run_split(cfg, seed=args.seed)
        elif args.command == "concordance":
            pipeline.run_concordance(
                cfg, args.reference, args.candidate, max_distance=args.max_distance
            )
        else:
            STAGES[args.command](cfg)
    except ClinEventsError as exc:
        code = (
            EXIT_CONFIG if isinstance(exc, ConfigError)
            else EXIT_PROVIDER if isinstance(exc, ProviderError)
            else EXIT_DATA
        )
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if isinstance(exc, ConfigError):
            payload["field"] = exc.field
        print(json.dumps(payload), file=sys.stderr)
        return code
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
