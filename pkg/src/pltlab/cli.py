"""Command line entry point.

Exit codes: 0 completed run (whatever the verdicts), 2 invalid input,
3 completed run whose report flags censoring overflow.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, canned_config, canned_names, parse_config
from .experiments import (
    EXIT_INVALID,
    EXIT_OK,
    MergeError,
    compare_sets,
    default_out,
    find_set,
    load_run,
    merge_reports,
    run_experiment,
    write_outputs,
)

THREADS_ENV = "PLTLAB_THREADS"


def _read_config(source: str) -> dict:
    path = Path(source)
    if path.suffix != ".json" and not path.exists():
        return canned_config(source)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    return data


def _apply_overrides(data: dict, args) -> dict:
    data = copy.deepcopy(data)
    if not isinstance(data, dict):
        return data
    if args.seed is not None:
        data["seed"] = args.seed
    if args.shards is not None:
        data["shards"] = args.shards
    if args.samples is not None:
        data["samples"] = args.samples
    return data


def _summary_line(exp: dict) -> str:
    kind = exp["kind"]
    parts = [f"{exp['experiment_id']} ({kind}, n={exp['samples']})"]
    for row in exp["rows"]:
        r = row.get("radius")
        if kind == "plt":
            parts.append(f"r={r}: ks_hit={row['hitting'].get('ks')} ks_ret={row['return'].get('ks')} plt={row['plt']}")
        elif kind == "short-return":
            parts.append(f"r={r}: mass(K={row['K']})={row['short_return_mass']:.4f}+-{row['sigma']:.4f}"
                         f" ks={row['return'].get('ks')}")
        elif kind == "kac":
            parts.append(f"r={r}: mean={row['mean']:.4f}+-{row['sigma']:.4f} ok={row['verdict']}")
        elif kind == "delayed-moments":
            parts.append(f"r={r} m={row['orders']}: {row['estimate']:.4f}+-{row['sigma']:.4f}"
                         f" target={row['target']:.4f} ok={row['verdict']}")
        elif kind == "d-metric":
            parts.append(f"r={r} deleted={row['deleted_mass']}: D={row['D']:.5f}+-{row['band']:.5f}"
                         f" bound={row['bound']:.3f} ok={row['verdict']}")
    for c in exp["conditions"]:
        parts.append(f"{c['condition']}[{c['parameter']}]: {c['estimate']} +- {c['uncertainty']} ok={c['verdict']}")
    return "\n  ".join(parts)


def _run(args, kinds: tuple | None = None, need_checkers: bool = False) -> int:
    if args.threads is not None:
        os.environ[THREADS_ENV] = str(args.threads)
    cfg = parse_config(_apply_overrides(_read_config(args.config), args))
    if kinds and cfg.kind not in kinds:
        raise ConfigError(f"this command runs kinds {', '.join(kinds)}; config has kind {cfg.kind!r}")
    if (need_checkers or cfg.kind == "conditions") and not cfg.checkers:
        raise ConfigError("no checkers configured")
    result = run_experiment(cfg, args.shard_index)
    out = Path(args.out) if args.out else default_out(cfg)
    if args.shard_index is not None and not args.out:
        out = out / f"shard-{args.shard_index}"
    write_outputs(result, out)
    for exp in result.report["experiments"]:
        print(_summary_line(exp))
    print(f"wrote {out}")
    flags = result.report["flags"]
    if flags["censoring_overflow"]:
        print("censoring overflow: at least one sample set has censor rate >= 1%", file=sys.stderr)
    return result.exit_code


def _merge(args) -> int:
    result = merge_reports(args.reports)
    out = Path(args.out)
    write_outputs(result, out)
    for exp in result.report["experiments"]:
        print(_summary_line(exp))
    if result.report["flags"]["mixed_seed"]:
        print("note: merged runs use different seeds", file=sys.stderr)
    print(f"wrote {out}")
    return result.exit_code


def _compare(args) -> int:
    a = find_set(load_run(args.a), args.id_a, args.radius_a)
    b = find_set(load_run(args.b), args.id_b, args.radius_b)
    text = json.dumps(compare_sets(a, b), sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _list(args) -> int:
    for name in canned_names():
        print(name)
    return EXIT_OK


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", help="config path or canned config name")
    p.add_argument("--seed", type=int)
    p.add_argument("--shards", type=int)
    p.add_argument("--shard-index", type=int, help="run only this shard")
    p.add_argument("--samples", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help=f"worker threads (default from ${THREADS_ENV}, else 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pltlab", description="Return-time statistics experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "run any experiment config"),
                        ("plt", "run a plt or short-return experiment"),
                        ("check-conditions", "run the condition checkers of a config")):
        _run_args(sub.add_parser(name, help=help_))
    m = sub.add_parser("merge", help="merge shard or experiment outputs")
    m.add_argument("reports", nargs="+", help="output directories or report.json files")
    m.add_argument("--out", required=True)
    c = sub.add_parser("compare-laws", help="D metric and two-sample KS between two sample sets")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--id-a")
    c.add_argument("--id-b")
    c.add_argument("--radius-a", type=float)
    c.add_argument("--radius-b", type=float)
    c.add_argument("--out")
    sub.add_parser("list", help="list canned configs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _run(args)
        if args.command == "plt":
            return _run(args, ("plt", "short-return"))
        if args.command == "check-conditions":
            return _run(args, need_checkers=True)
        if args.command == "merge":
            return _merge(args)
        if args.command == "compare-laws":
            return _compare(args)
        return _list(args)
    except (ConfigError, MergeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
