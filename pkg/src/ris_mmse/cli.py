"""Command-line simulator: RMSE sweeps, SE sweeps and the gradient checker.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 gradient-check failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .config import load_config
from .errors import NumericalError, ValidationError
from .sweeps import run_gradcheck, run_rmse_sweep, run_se_sweep


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage problems are validation errors
        raise ValidationError(message)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="path to a key = value config file")
    sub.add_argument("--out", help="output CSV path (overrides config)")
    sub.add_argument("--seed", type=int, help="master seed")
    sub.add_argument("--trials", type=int, help="Monte-Carlo trials per sweep point")
    sub.add_argument("--preset", choices=("desk", "paper"), default="desk")
    sub.add_argument("--workers", type=int, help="worker processes for the trial loop")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ris-mmse", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    rmse = subs.add_parser("rmse-sweep", help="channel-estimation RMSE sweep")
    _add_common(rmse)
    rmse.add_argument("--trace-out", help="also write the phase-optimization trace CSV")

    se = subs.add_parser("se-sweep", help="spectral-efficiency sweep")
    _add_common(se)

    grad = subs.add_parser("gradcheck", help="derivative oracle suite")
    _add_common(grad)
    return parser


def _overrides(args) -> dict:
    out = {}
    if args.out is not None:
        out["output"] = args.out
    if args.seed is not None:
        out["seed"] = args.seed
    if args.trials is not None:
        out["trials"] = args.trials
    if args.workers is not None:
        out["workers"] = args.workers
    if getattr(args, "trace_out", None) is not None:
        out["trace_output"] = args.trace_out
    return out


def main(argv: Optional[list] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "gradcheck":
            report = run_gradcheck(instances=args.trials or 50, seed=args.seed or 0)
            text = report.format()
            print(text)
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text + "\n")
            return 0 if report.ok else 3

        cfg = load_config(path=args.config, preset=args.preset, overrides=_overrides(args))
        if cfg.output is None:
            raise ValidationError("no output path: pass --out or set 'output' in the config")
        if args.command == "rmse-sweep":
            result = run_rmse_sweep(cfg)
        else:
            result = run_se_sweep(cfg)
        print(f"wrote {len(result.rows)} rows to {cfg.output}")
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
