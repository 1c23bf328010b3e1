"""Command-line entry point.

Exit codes: 0 success, 2 validation failed, 64 usage error, 70 internal
error, 74 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluation, ledger
from .claims import BadAliasTarget, build_lexicon
from .config import ConfigError, load_config
from .gateway import BackendError
from .oracle import analyze
from .orchestrator import (IoFailure, RunConfig, StageFailure, append_runlog, builtin_workflow, postprocess,
                           run_workflow, write_summary_csv)
from .prompts import TemplateError
from .validator import validate

EX_OK, EX_VALIDATION, EX_USAGE, EX_SOFTWARE, EX_IOERR = 0, 2, 64, 70, 74


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise SystemExit(status)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trendscribe", description="Financial delta tables to validated report commentary.")
    parser.add_argument("--config", help="INI config file with paths, rules and backends")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="raw two-period observations -> delta CSV")
    p.add_argument("--observations", required=True, help="raw CSV: business_area,product_line,region,period,value")
    p.add_argument("--period-a", help="earlier period label (default: first in sort order)")
    p.add_argument("--period-b", help="later period label (default: second in sort order)")
    p.add_argument("--out", required=True, help="delta CSV to write")

    p = sub.add_parser("analyze", help="delta CSV -> trend analysis JSON")
    p.add_argument("--deltas", required=True, help="preaggregated delta CSV")
    p.add_argument("--out", help="JSON file to write (default: stdout)")

    p = sub.add_parser("generate", help="run a workflow and write the summary")
    p.add_argument("--deltas", required=True, help="preaggregated delta CSV")
    p.add_argument("--workflow", required=True, choices=["WF-A", "WF-B", "WF-C"], help="workflow shape")
    p.add_argument("--backend", default="mock", help="backend name from the config (default: mock)")
    p.add_argument("--out", required=True, help="summary text file to write")
    p.add_argument("--csv", help="sentence CSV to write (default: <out>.csv)")
    p.add_argument("--runlog", help="JSON Lines run log to append to (default: from config)")
    p.add_argument("--include-table-downstream", action="store_true",
                   help="WF-A: give downstream agents the table as well as the previous output")
    p.add_argument("--regenerate", type=int, default=0, choices=[0, 1, 2],
                   help="regenerate the final stage up to N times when validation fails")

    p = sub.add_parser("validate", help="check a summary against a delta table")
    p.add_argument("--summary", required=True, help="summary text file")
    p.add_argument("--deltas", required=True, help="preaggregated delta CSV")
    p.add_argument("--out", help="report JSON file to write (default: stdout)")

    p = sub.add_parser("evaluate", help="batch-compare generated and reference summaries")
    p.add_argument("--pairs", required=True, help="directory of <name>.gen.txt / <name>.ref.txt files")
    p.add_argument("--tables", help="directory of <name>.table.csv files (default: --pairs)")
    p.add_argument("--out", required=True, help="metrics CSV to write")
    p.add_argument("--markdown", help="optional markdown report to write")
    p.add_argument("--workers", type=int, default=1, help="parallel evaluation threads")

    p = sub.add_parser("simulate-chain", help="Monte-Carlo error propagation through a mock chain")
    p.add_argument("--stages", type=int, required=True, help="chain depth")
    p.add_argument("--fault-rate", type=float, required=True, help="per-stage corruption probability")
    p.add_argument("--trials", type=int, default=1000, help="number of trials")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--fault-class", default="inject_ungrounded_entity", help="fault class injected on corruption")
    p.add_argument("--out", help="result JSON file to write (default: stdout)")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _ingest(args, cfg) -> int:
    obs = ledger.load_observations(args.observations, "raw")
    periods = sorted(obs.periods)
    a = args.period_a or (periods[0] if periods else None)
    b = args.period_b or (periods[1] if len(periods) > 1 else None)
    if a is None or b is None:
        raise UsageError("cannot infer both periods; pass --period-a and --period-b")
    table = ledger.compute_contributions(ledger.compute_delta_table(obs, a, b))
    ledger.write_delta_table(table, args.out)
    return EX_OK


def _analyze(args, cfg) -> int:
    table = ledger.load_delta_table(args.deltas)
    _emit(analyze(table, cfg.oracle).to_json() + "\n", args.out)
    return EX_OK


def _generate(args, cfg) -> int:
    table = ledger.load_delta_table(args.deltas)
    if args.backend not in cfg.backends:
        raise UsageError(f"unknown backend {args.backend!r}; known: {', '.join(sorted(cfg.backends))}")
    spec = builtin_workflow(args.workflow, args.backend, args.include_table_downstream)
    run_cfg = RunConfig(backends=cfg.backends, template_dir=cfg.template_dir, oracle=cfg.oracle, rules=cfg.rules,
                        regenerate_on_failure=args.regenerate)
    record = run_workflow(spec, table, run_cfg)
    out = Path(args.out)
    out.write_text(record.final_summary + "\n", encoding="utf-8")
    _, rows = postprocess(record.final_summary, summary_id=out.stem)
    write_summary_csv(rows, args.csv or out.with_suffix(out.suffix + ".csv"))
    append_runlog(record, args.runlog or cfg.runlog_path)
    if record.validation is not None:
        logging.getLogger(__name__).info("validation verdict: %s", record.validation.verdict)
    return EX_OK


def _validate(args, cfg) -> int:
    table = ledger.load_delta_table(args.deltas)
    lexicon = build_lexicon(table, cfg.alias_file)
    summary = Path(args.summary).read_text(encoding="utf-8")
    report = validate(summary, table, analyze(table, cfg.oracle), cfg.rules, lexicon)
    _emit(report.to_json() + "\n", args.out)
    return EX_OK if report.verdict == "pass" else EX_VALIDATION


def _evaluate(args, cfg) -> int:
    result = evaluation.batch_evaluate(args.pairs, args.tables, cfg.oracle, cfg.rules, workers=args.workers)
    result.write_csv(args.out)
    if args.markdown:
        Path(args.markdown).write_text(result.markdown(), encoding="utf-8")
    return EX_OK


def _simulate(args, cfg) -> int:
    try:
        result = evaluation.chain_fault_experiment(args.stages, args.fault_rate, args.trials, args.seed,
                                                   args.fault_class, cfg.rules)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(json.dumps(result.__dict__, indent=2) + "\n", args.out)
    return EX_OK


COMMANDS = {
    "ingest": _ingest,
    "analyze": _analyze,
    "generate": _generate,
    "validate": _validate,
    "evaluate": _evaluate,
    "simulate-chain": _simulate,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EX_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"trendscribe: {exc}", file=sys.stderr)
        return EX_USAGE
    except (ConfigError, BadAliasTarget) as exc:
        print(f"trendscribe: config error: {exc}", file=sys.stderr)
        return EX_USAGE
    except (OSError, IoFailure, ledger.LedgerError, evaluation.MissingCounterpart) as exc:
        print(f"trendscribe: {exc}", file=sys.stderr)
        return EX_IOERR
    except (StageFailure, BackendError, TemplateError) as exc:
        print(f"trendscribe: {exc}", file=sys.stderr)
        return EX_SOFTWARE
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).exception("internal error")
        print(f"trendscribe: internal error: {exc}", file=sys.stderr)
        return EX_SOFTWARE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
