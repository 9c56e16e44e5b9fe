from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Any, Sequence

from betatherm.config import load_config
from betatherm.errors import BetaThermError
from betatherm.jobs import job_from_mapping, load_job_mapping
from betatherm.pipeline import CommandOptions, engine_config_for, run_pipeline
from betatherm.storage import dumps

log = logging.getLogger("betatherm")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default="", help="Job file (JSON). CLI flags override its fields.")
    p.add_argument("--beta", default=None, help="Numeric beta > 1 (float or decimal string).")
    p.add_argument("--digits", default=None, help="Eventually periodic x^beta, e.g. '(10)' or '1(100)'.")
    p.add_argument("--json", action="store_true", help="Print the result as JSON instead of a table.")
    p.add_argument("--depth", type=int, default=None, help="Cylinder depth k.")
    p.add_argument("--tol", type=float, default=None, help="Power-iteration tolerance.")
    p.add_argument("--seed", type=int, default=None, help="Seed for sampled checks.")
    p.add_argument("--out", default=None, help="Output directory for CSV/JSON artifacts (created if missing).")
    p.add_argument("--profile", choices=["reference", "quick"], default=None)
    return p


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    common = _common()
    parser = argparse.ArgumentParser(prog="betatherm", description="Thermodynamic formalism on beta-shifts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand", parents=[common], help="Digits of x^beta or of a greedy expansion.")
    p.add_argument("--n", type=int, default=16)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--greedy", action="store_true", help="Greedy expansion of --alpha (default 1).")
    mode.add_argument("--quasi", action="store_true", help="Quasi-greedy expansion of 1 (default).")
    p.add_argument("--alpha", default="1")

    p = sub.add_parser("admissible", parents=[common], help="Parry admissibility of a word or sequence.")
    p.add_argument("--word", default=None)
    p.add_argument("--sequence", default=None, help="Eventually periodic sequence, e.g. '1(0)'.")
    p.add_argument("--transpose", action="store_true", help="Check on the transpose shift.")

    p = sub.add_parser("language", parents=[common], help="Enumerate admissible words of length n.")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--transpose", action="store_true")

    p = sub.add_parser("spectrum", parents=[common], help="Perron eigendata of L_tA at one t.")
    p.add_argument("--t", type=float, default=1.0)

    p = sub.add_parser("involution", parents=[common], help="Kernel, transpose potential and coupling checks.")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--pairs", default=None, help="random:N or file:<path>.")

    p = sub.add_parser("zerotemp", parents=[common], help="t -> inf sweep: m, V, V^T, gamma.")
    p.add_argument("--t-grid", default=None, help="start:stop:geometric[:ratio] or a comma list.")
    p.add_argument("--csv", default=None, help="Alias of --out.")

    p = sub.add_parser("ldp", parents=[common], help="Cylinder large-deviation limits against sup I.")
    p.add_argument("--t-grid", default=None)
    p.add_argument("--cylinder", action="append", default=None, help="Cylinder word; repeatable.")

    p = sub.add_parser("oracle", parents=[common], help="Best periodic-orbit mean up to a period.")
    p.add_argument("--max-period", type=int, default=None)

    return parser.parse_args(argv)


def job_mapping(args: argparse.Namespace) -> dict[str, Any]:
    """Job file fields with CLI flags layered on top."""
    raw: dict[str, Any] = load_job_mapping(args.config) if args.config else {}
    if args.beta is not None or args.digits is not None:
        beta: dict[str, Any] = {}
        if args.beta is not None:
            beta["value"] = args.beta
        if args.digits is not None:
            beta["digits"] = args.digits
        raw["beta"] = beta
    if args.tol is not None:
        tols = raw.get("tolerances")
        raw["tolerances"] = {**tols, "tol": args.tol} if isinstance(tols, dict) else {"tol": args.tol}
    flags = {
        "depth": args.depth,
        "seed": args.seed,
        "out": args.out or getattr(args, "csv", None),
        "profile": args.profile,
        "t_grid": getattr(args, "t_grid", None),
        "pairs": getattr(args, "pairs", None),
        "cylinders": getattr(args, "cylinder", None),
        "p_max": getattr(args, "max_period", None),
    }
    raw.update({k: v for k, v in flags.items() if v is not None})
    return raw


def command_options(args: argparse.Namespace) -> CommandOptions:
    return CommandOptions(
        n=getattr(args, "n", 16),
        greedy=getattr(args, "greedy", False),
        alpha=getattr(args, "alpha", "1"),
        word=getattr(args, "word", None),
        sequence=getattr(args, "sequence", None),
        transpose=getattr(args, "transpose", False),
        count_only=getattr(args, "count_only", False),
        t=getattr(args, "t", 1.0),
    )


def _setup_logging() -> None:
    level = getattr(logging, os.getenv("BETATHERM_LOG_LEVEL", "INFO").strip().upper(), logging.INFO)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s %(message)s", force=True)


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    _setup_logging()

    try:
        base = load_config()
        job = job_from_mapping(job_mapping(args), dps=base.working_dps)
        config = engine_config_for(job, base)
        log.info("[%s] %s profile=%s seed=%d", args.command, job.spec.describe(), config.profile, config.seed)
        result = run_pipeline(job, args.command, config, command_options(args))
    except BetaThermError as e:
        log.error("[error] %s: %s", type(e).__name__, e)
        return e.exit_code

    print(dumps(result.payload) if args.json else result.text)
    if result.failure is not None:
        log.error("[error] %s: %s", type(result.failure).__name__, result.failure)
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
