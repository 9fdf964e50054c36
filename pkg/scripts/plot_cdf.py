"""Plot empirical return-time CDFs from a run directory against the exponential law.

    python3 scripts/plot_cdf.py runs/cat-x-golden-plt --out plt.png

Needs matplotlib, which the package itself does not depend on.
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path: Path):
    curves = defaultdict(lambda: ([], [], []))
    with open(path / "cdf.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["experiment_id"], row["flavor"], float(row["radius"]))
            t, emp, exp = curves[key]
            t.append(float(row["t"]))
            emp.append(float(row["empirical"]))
            exp.append(float(row["exponential"]))
    return curves


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("run", type=Path)
    ap.add_argument("--out", type=Path, default=Path("cdf.png"))
    args = ap.parse_args(argv)
    curves = load(args.run)
    fig, ax = plt.subplots(figsize=(7, 5))
    for (eid, flavor, radius), (t, emp, exp) in sorted(curves.items()):
        ax.step(t, emp, where="post", label=f"{eid} {flavor} r={radius:g}")
    t, _, exp = next(iter(curves.values()))
    ax.plot(t, exp, "k--", label="1 - exp(-t)")
    ax.set_xlabel("rescaled time t")
    ax.set_ylabel("CDF")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
