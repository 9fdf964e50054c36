"""Run canned experiment configs through the CLI and print a one-line summary per run.

    python3 scripts/run_canned.py                     # every canned config
    python3 scripts/run_canned.py kac-golden kac-cat --samples 20000 --out runs
"""

import argparse
import json
import time
from pathlib import Path

from pltlab.cli import main
from pltlab.config import canned_names


def summarize(out: Path) -> str:
    rep = json.loads((out / "report.json").read_text())
    parts = []
    for exp in rep["experiments"]:
        verdicts = [r["verdict"] for r in exp["rows"] + exp["conditions"] if "verdict" in r]
        parts.append(f"{exp['experiment_id']}: {sum(map(bool, verdicts))}/{len(verdicts)} verdicts")
    flags = [k for k, v in rep["flags"].items() if v]
    return "; ".join(parts) + (f" flags={flags}" if flags else "")


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="canned config names (default: all)")
    ap.add_argument("--samples", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--shards", type=int)
    ap.add_argument("--out", type=Path, default=Path("runs"))
    args = ap.parse_args(argv)
    worst = 0
    for name in args.names or canned_names():
        out = args.out / name
        cli = ["simulate", name, "--out", str(out)]
        for flag in ("samples", "seed", "shards"):
            if getattr(args, flag) is not None:
                cli += [f"--{flag}", str(getattr(args, flag))]
        t = time.time()
        code = main(cli)
        worst = max(worst, code)
        line = summarize(out) if (out / "report.json").exists() else "no report"
        print(f"[exit {code}] {name} ({time.time() - t:.1f}s) {line}")
    return worst


if __name__ == "__main__":
    raise SystemExit(run())
