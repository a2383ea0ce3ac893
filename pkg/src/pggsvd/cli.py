"""``pggsvd`` command line: sweeps, convergence traces and GSVD fixture checks.

Exit codes: 0 success, 1 unwritable output, 2 configuration error,
3 numerical-invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .channel import load_fixture
from .config import ConfigError, ExperimentConfig, load_config
from .matcore import GsvdError, invariant_report
from .miengine import MiCapError
from .pg_inst import ConditionError, DecouplingError
from .sweep import emit_csv, emit_json, run_convergence, run_sweep

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3

TRACE_COLUMNS = ("scheme", "seed", "restart", "iteration", "objective")
SUMMARY_COLUMNS = ("scheme", "seed", "best_restart", "iterations", "converged",
                   "iterations_to_99pct", "final_objective")


def _parser():
    p = argparse.ArgumentParser(prog="pggsvd", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--emit", choices=("csv", "json"), default="csv")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory (default: config 'output', else stdout)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--constellation", default=None, help="override the config constellation")
    common.add_argument("--M", type=int, default=None, dest="M", help="override the config order M")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("sweep", parents=[common], help="secrecy rate versus SNR")
    s.add_argument("--config", type=Path, required=True)
    c = sub.add_parser("converge", parents=[common], help="objective per iteration at one SNR")
    c.add_argument("--config", type=Path, required=True)
    c.add_argument("--snr", type=float, required=True)
    g = sub.add_parser("gsvd-check", help="verify GSVD invariants on a stored channel pair")
    g.add_argument("--fixture", type=Path, required=True)
    return p


def _config(args):
    cfg = load_config(args.config)
    if args.constellation is not None or args.M is not None:
        raw = dict(cfg.raw)
        if args.constellation is not None:
            raw["constellation"] = args.constellation
        if args.M is not None:
            raw["M"] = args.M
        cfg = ExperimentConfig.from_dict(raw)
    if args.threads < 1:
        raise ConfigError("--threads: must be at least 1")
    return cfg


def _write(outputs, out_dir):
    if out_dir is None:
        for _, text in outputs:
            sys.stdout.write(text)
        return
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in outputs:
        (out_dir / name).write_text(text)


def _out_dir(args, cfg):
    if args.out is not None:
        return args.out
    return cfg["output"]


def cmd_sweep(args):
    cfg = _config(args)
    result = run_sweep(cfg, threads=args.threads)
    if args.emit == "csv":
        outputs = [("sweep.csv", emit_csv(result.rows))]
    else:
        outputs = [("sweep.json", emit_json(result))]
    _write(outputs, _out_dir(args, cfg))


def cmd_converge(args):
    cfg = _config(args)
    trace, summary = run_convergence(cfg, args.snr, threads=args.threads)
    if args.emit == "csv":
        outputs = [("trace.csv", emit_csv(trace, TRACE_COLUMNS)),
                   ("summary.csv", emit_csv(summary, SUMMARY_COLUMNS))]
    else:
        outputs = [("converge.json", emit_json({"config": cfg.raw, "snr_db": args.snr,
                                                "trace": trace, "summary": summary}))]
    _write(outputs, _out_dir(args, cfg))


def cmd_gsvd_check(args):
    try:
        H_ba, H_ea, manifest = load_fixture(args.fixture)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"fixture {args.fixture}: {exc}") from None
    report = invariant_report(H_ba, H_ea)
    report["fixture"] = str(args.fixture)
    sys.stdout.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return EXIT_OK if report["ok"] else EXIT_INVARIANT


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {"sweep": cmd_sweep, "converge": cmd_converge, "gsvd-check": cmd_gsvd_check}[args.command]
    try:
        code = handler(args)
    except (ConfigError, ConditionError, MiCapError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GsvdError, DecouplingError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
