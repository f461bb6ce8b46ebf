"""Command line entry point: ``slowfast <subcommand> --config cfg.json``.

Exit status 0 when every requested check passes, 1 on an assertion failure
and 2 on a configuration error.
"""
from __future__ import annotations

import argparse
import sys

from .config import load_raw, resolve
from .exceptions import ConfigError, SlowFastError
from .runner import run_pipeline, run_sweep

SUBCOMMANDS = {
    "run": None,
    "simulate": [],
    "classify": ["classify"],
    "certify-slow": ["certify-slow"],
    "construct-fast": ["construct-fast"],
    "check-quotients": ["quotient-check"],
    "sweep": None,
}


def _parser():
    ap = argparse.ArgumentParser(prog="slowfast", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="artifact directory (overrides output.dir)")
        sp.add_argument("--seed", type=int, help="seed for sampled constants")
        sp.add_argument("--store-states", action="store_true", help="write per-mode coefficients to the CSV")
    return ap


def _apply_flags(raw: dict, args, command: str) -> dict:
    raw = dict(raw)
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        raw["seed"] = args.seed
    if args.store_states:
        raw["output"] = {**raw.get("output", {}), "store_states": True}
    if args.out:
        raw["output"] = {**raw.get("output", {}), "dir": args.out}
    analyses = SUBCOMMANDS[command]
    if analyses is not None:
        raw["analyses"] = analyses
    return raw


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        raw = _apply_flags(load_raw(args.config), args, args.command)
        if args.command == "sweep":
            out = resolve(raw)["output"]["dir"]
            index = run_sweep(raw, out)
            print(f"sweep: {len(index['points'])} points -> {out}/index.json")
            return 0 if index["pass"] else 1
        cfg = resolve(raw)
        out = cfg["output"]["dir"]
        report = run_pipeline(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SlowFastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, res in report["results"].items():
        print(f"{name}: {'pass' if res['pass'] else 'FAIL'}")
    if not report["pass"]:
        print(f"see {out}/report.json", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
