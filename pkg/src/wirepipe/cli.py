"""Command-line interface: one subcommand per stage plus the one-shot run.

Exit codes separate the failure classes a caller can act on: 2 for usage
errors (argparse), 3 for configuration errors, 4 for unreadable or invalid
input data, 5 for anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from typing import Optional, Sequence

from .config import ConfigError, load_config
from .corpus import RecordError
from .dedup import DedupError
from .embed import EmbedError
from .entitylink import LinkError
from .evalreport import MetricError
from .georef import GeorefError
from .ingest import IngestError
from .pipeline import STAGES, StageResult, run_pipeline
from .wirefilter import FilterError

EXIT_CONFIG = 3
EXIT_INPUT = 4
EXIT_INTERNAL = 5

# Everything raised when input files are missing, malformed, or inconsistent.
_INPUT_ERRORS = (
    IngestError,
    RecordError,
    DedupError,
    EmbedError,
    FilterError,
    GeorefError,
    LinkError,
    MetricError,
    json.JSONDecodeError,
    OSError,
)

_COMMANDS = (
    ("ingest", "validate inputs and write a load report"),
    ("embed", "write article, mention, and KB vectors plus mention rows"),
    ("dedup", "cluster reproductions of the same source article"),
    ("filter", "label clusters wire, too-small, template, weather, or nonwire"),
    ("georef", "resolve each cluster's dateline to a place"),
    ("link", "coreference mentions per date and link them to the KB"),
    ("eval", "score clusters (and verdicts) against gold labels"),
    ("report", "write statistics CSVs and the final newswire dataset"),
    ("tune-dedup", "pick the dedup similarity threshold from labeled pairs"),
    ("tune-nomatch", "pick the no-match threshold from annotated links"),
    ("pipeline", "run every stage in order"),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wirepipe",
        description="Reconstruct a deduplicated wire-service archive.",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, help_text in _COMMANDS:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", required=True, help="TOML config file")
        sub.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key by dotted path (repeatable)",
        )
        sub.add_argument(
            "--workers",
            type=int,
            default=None,
            help="worker count hint; results are identical for any value",
        )
        sub.add_argument(
            "--method",
            choices=("all", "lsh"),
            default=None,
            help="dedup pairing method",
        )
        sub.add_argument(
            "--embeddings",
            default=None,
            metavar="SPEC",
            help="embedding provider: baseline or file:<path>",
        )
    return parser


def _format_result(result: StageResult) -> str:
    parts = " ".join(f"{k}={v}" for k, v in sorted(result.counts.items()))
    return f"{result.stage}: {parts}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    # Dedicated flags are sugar for --set and take precedence over it.
    if args.method is not None:
        overrides.append(f"method={args.method}")
    if args.embeddings is not None:
        overrides.append(f"provider={args.embeddings}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")

    try:
        config = load_config(args.config, overrides)
        if args.command == "pipeline":
            results = run_pipeline(config)
        else:
            results = [STAGES[args.command](config)]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _INPUT_ERRORS as exc:
        print(f"input error ({args.command}): {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        print(f"internal error ({args.command}):", file=sys.stderr)
        traceback.print_exc()
        return EXIT_INTERNAL

    for result in results:
        print(_format_result(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
