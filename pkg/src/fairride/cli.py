"""Command-line entry point.

    fairride simulate --config world.yaml [--seed N] [--policy P] [--out DIR] [--set key=value ...]
    fairride compare RUN_A RUN_B
    fairride golden [NAME]
    fairride bench [--repeats N] [--csv PATH]

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import yaml

from . import __version__
from .config import POLICIES, ConfigError, load_config
from .fairness import improvement

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
OUT_ENV = "FAIRRIDE_OUT"


class UsageError(Exception):
    pass


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(value)
    return out


def _default_out(cfg) -> Path:
    root = Path(os.environ.get(OUT_ENV, "runs"))
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    return root / f"{cfg.policy}-seed{cfg.seed}-{stamp}"


def cmd_simulate(args) -> int:
    from .sim import run

    overrides = _parse_set(args.set or [])
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.policy is not None:
        overrides["policy"] = args.policy
    try:
        cfg, _ = load_config(args.config, overrides)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {args.config}")
    out = Path(args.out) if args.out else _default_out(cfg)
    extra = {"config_path": str(Path(args.config).resolve()), "overrides": overrides}
    report = run(cfg, out, extra)
    s = report.summary()
    print(f"policy={s['policy']} seed={s['seed']} total_utility={s['total_utility']} final_gini={s['final_gini']:.4f} "
          f"completed={s['completed']} expired={s['expired']} mean_wait_min={s['mean_wait_minutes']:.2f}")
    print(f"outputs written to {out}")
    return EXIT_OK


def _load_summary(run_dir: str) -> dict:
    path = Path(run_dir) / "summary.json"
    if not path.is_file():
        raise UsageError(f"no summary.json in {run_dir}")
    return json.loads(path.read_text())


def compare_rows(a: dict, b: dict) -> list[tuple[str, float, float, float]]:
    """Improvement of run ``a`` (proposed) over run ``b`` (baseline), in percent.

    Gini and waiting time are sign-flipped so that positive always means better.
    """
    if a.get("demand_hash") != b.get("demand_hash"):
        raise UsageError("runs were driven by different demand (demand_hash mismatch)")
    rows = []
    for name, key, flip in (("utility", "total_utility", False), ("gini", "final_gini", True), ("wait", "mean_wait_minutes", True)):
        p, q = float(a[key]), float(b[key])
        if q == 0:
            imp = 0.0 if p == 0 else float("nan")
        else:
            imp = improvement(p, q)
        rows.append((name, p, q, (-imp if flip else imp) + 0.0))
    return rows


def cmd_compare(args) -> int:
    rows = compare_rows(_load_summary(args.run_a), _load_summary(args.run_b))
    print(f"# I = (P - B) / B * 100 with P = {args.run_a}, B = {args.run_b}; gini and wait sign-flipped (positive = better)")
    print("metric,proposed,baseline,improvement_pct")
    for name, p, q, imp in rows:
        print(f"{name},{p:g},{q:g},{imp:+.2f}")
    return EXIT_OK


def cmd_golden(args) -> int:
    from .golden import GOLDENS, check

    names = [args.name] if args.name else list(GOLDENS)
    if args.name and args.name not in GOLDENS:
        raise UsageError(f"unknown fixture {args.name!r}; choose from {', '.join(GOLDENS)}")
    failed = 0
    for name in names:
        ok, diff = check(name)
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        if not ok:
            failed += 1
            sys.stdout.write(diff)
    return EXIT_RUNTIME if failed else EXIT_OK


def cmd_bench(args) -> int:
    from .bench import DEFAULT_SIDES, run_bench

    sides = tuple(args.sides) if args.sides else DEFAULT_SIDES
    rows, r2 = run_bench(sides, repeats=args.repeats)
    print("side,cells,median_ms,max_ms,route_cells")
    for r in rows:
        print(f"{r.side},{r.cells},{r.median_s * 1e3:.3f},{r.max_s * 1e3:.3f},{r.route_len}")
    worst = max(r.max_s for r in rows)
    print(f"# linear fit R^2 = {r2:.4f}; slowest query = {worst * 1e3:.3f} ms")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("side", "cells", "median_s", "max_s", "route_cells"))
            w.writerows((r.side, r.cells, repr(r.median_s), repr(r.max_s), r.route_len) for r in rows)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fairride", description="Fair route recommendation for ridesharing fleets.")
    p.add_argument("--version", action="version", version=f"fairride {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one simulation and write CSV/JSON outputs")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--policy", choices=POLICIES)
    s.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./runs, plus a run name)")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config field, dotted keys allowed")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="percentage improvement of one run over a baseline run")
    c.add_argument("run_a", help="proposed run directory")
    c.add_argument("run_b", help="baseline run directory")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("golden", help="run the worked-example fixtures against their expected outputs")
    g.add_argument("name", nargs="?")
    g.set_defaults(func=cmd_golden)

    b = sub.add_parser("bench", help="query time against grid size")
    b.add_argument("--repeats", type=int, default=21)
    b.add_argument("--sides", type=int, nargs="+")
    b.add_argument("--csv")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"fairride: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"fairride: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
