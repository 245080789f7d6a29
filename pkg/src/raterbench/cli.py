"""Batch command-line front end: fixture generation, four-cycle reports,
and ad-hoc queries, all headless.

Exit codes: 0 success, 2 usage errors (bad arguments, query syntax,
unknown columns), 3 data errors (missing or malformed files), 4
infeasible fixture specs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import fixture, ingest, query, report
from .errors import (
    DataFormatError,
    InfeasibleSpecError,
    QuerySyntaxError,
    ToolError,
    UnknownColumnError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4


def _resolve_spec_path(value: str) -> Path:
    path = Path(value)
    if path.exists():
        return path
    if "/" not in value and "\\" not in value:
        return fixture.bundled_spec_path(value)
    raise DataFormatError(f"fixture spec file not found: {value}")


def cmd_generate(args) -> int:
    spec = fixture.FixtureSpec.from_file(_resolve_spec_path(args.spec))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    result = fixture.generate_fixture(spec, args.out, basename=args.basename)
    summary = {
        "data_path": str(result.data_path),
        "manifest_path": str(result.manifest_path),
        "config_path": str(result.config_path),
        **result.summary,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    dataset = ingest.load(ingest.manifest_from_file(args.manifest))
    config = report.load_config(args.config) if args.config else None
    if config is not None:
        if args.threshold is not None:
            config["threshold"] = args.threshold
        if args.tie_policy is not None:
            config["tie_policy"] = args.tie_policy
    document = report.build_report(dataset, config)
    if args.format == "text":
        rendered = report.render_text(document)
    else:
        rendered = json.dumps(document, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(rendered)
    return EXIT_OK


def cmd_query(args) -> int:
    dataset = ingest.load(ingest.manifest_from_file(args.manifest))
    dataset = ingest.derive_all(dataset, args.tie_policy or "positive")
    selection = query.select(args.query, dataset)
    print(len(selection))
    if not args.count_only:
        for key in selection.keys:
            print(key.label())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raterbench",
        description="Analyze multi-annotator labels against model predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_generate = sub.add_parser("generate", help="generate a fixture from a declarative spec")
    p_generate.add_argument("--spec", required=True, help="spec JSON path or bundled name (e.g. table1)")
    p_generate.add_argument("--out", required=True, help="output directory")
    p_generate.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p_generate.add_argument("--basename", default="fixture", help="output file basename")
    p_generate.set_defaults(func=cmd_generate)

    p_report = sub.add_parser("report", help="run analysis cycles I-IV and emit a report")
    p_report.add_argument("--manifest", required=True, help="ingest manifest JSON")
    p_report.add_argument("--config", default=None, help="report config JSON (defaults from schema)")
    p_report.add_argument("--out", default=None, help="write the report to a file instead of stdout")
    p_report.add_argument("--threshold", type=float, default=None, help="binarization threshold override")
    p_report.add_argument("--tie-policy", choices=ingest.TIE_POLICIES, default=None)
    p_report.add_argument("--format", choices=("json", "text"), default="json")
    p_report.set_defaults(func=cmd_report)

    p_query = sub.add_parser("query", help="evaluate a textual query against a dataset")
    p_query.add_argument("--manifest", required=True, help="ingest manifest JSON")
    p_query.add_argument("--count-only", action="store_true", help="print only the match count")
    p_query.add_argument("--tie-policy", choices=ingest.TIE_POLICIES, default=None)
    p_query.add_argument("query", help="query text, e.g. \"agree_count_any == 4\"")
    p_query.set_defaults(func=cmd_query)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (QuerySyntaxError, UnknownColumnError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleSpecError as exc:
        print(f"infeasible spec: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ToolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
