"""Command line front end: ``run``, ``explore`` and ``oracle``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from cfuc import scenario
from cfuc.oracle import run_oracle_suite
from cfuc.sim import ExplorationBudgetExceeded

BEGIN = "----- BEGIN REPORT -----"
END = "----- END REPORT -----"


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cfuc", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run one scenario and write a JSON report")
    r.add_argument("--config", required=True, help="scenario file or bundled scenario name")
    r.add_argument("--seed", type=_seed, default=None, help="overrides schedule.seed")
    r.add_argument("--report", required=True, type=Path)
    r.add_argument("--figures", type=Path, default=None, help="directory for PNG figures")
    r.add_argument("--quiet", action="store_true", help="do not echo the report to stdout")

    e = sub.add_parser("explore", help="check every interleaving up to a depth")
    e.add_argument("--config", required=True)
    e.add_argument("--depth", type=int, required=True)
    e.add_argument("--report", required=True, type=Path)
    e.add_argument("--budget", type=int, default=2_000_000, help="max interleavings")
    e.add_argument("--finish", type=int, default=0,
                   help="steps allowed to run each branch to completion after the depth bound")

    o = sub.add_parser("oracle", help="cross-check the trace algebra exhaustively")
    o.add_argument("--max-len", type=int, required=True)
    o.add_argument("--pair-total", type=int, default=None,
                   help="total length for pairs and sets (default: max-len)")

    sub.add_parser("list", help="list bundled scenarios")
    return ap


def _load(arg: str):
    try:
        return scenario.load_config(scenario.resolve_config(arg))
    except scenario.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    res = scenario.run_config(cfg, args.seed)
    text = scenario.dumps_report(res.report)
    args.report.parent.mkdir(parents=True, exist_ok=True)
    args.report.write_text(text)
    if args.figures is not None:
        from cfuc import plots

        stem = f"{cfg.name}-seed{res.seed}"
        for p in plots.render(res.record, args.figures, stem):
            print(f"figure: {p}")
    if not args.quiet:
        print(BEGIN)
        print(text, end="")
        print(END)
    for v in res.verdicts:
        print(f"{'PASS' if v.holds else 'FAIL'} {v.property}")
    return 0 if res.ok else 1


def cmd_explore(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return 2
    if args.depth < 1:
        print("error: --depth must be positive", file=sys.stderr)
        return 2
    try:
        out = scenario.explore_config(cfg, args.depth, args.budget, args.finish)
    except ExplorationBudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    args.report.parent.mkdir(parents=True, exist_ok=True)
    args.report.write_text(scenario.dumps_report(out))
    c = out["counts"]
    print(f"interleavings={c['interleavings']} passed={c['passed']} failed={c['failed']} "
          f"truncated={c['truncated']}")
    if out["first_counterexample"]:
        print("first counterexample:")
        print(json.dumps(out["first_counterexample"], indent=2))
    return 0 if out["ok"] else 1


def cmd_oracle(args) -> int:
    if args.max_len < 0:
        print("error: --max-len must be non-negative", file=sys.stderr)
        return 2
    rep = run_oracle_suite(args.max_len, args.pair_total, progress=print)
    for k, v in sorted(rep.counts.items()):
        print(f"{k}: {v} instances")
    if rep.mismatches:
        print("mismatch:", json.dumps(rep.mismatches[0]))
        return 1
    print("all checks agree")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "run":
        return cmd_run(args)
    if args.verb == "explore":
        return cmd_explore(args)
    if args.verb == "oracle":
        return cmd_oracle(args)
    for name in scenario.BUNDLED:
        print(name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
