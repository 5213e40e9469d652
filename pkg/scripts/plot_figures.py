"""Plot CSV tables written by ``atomvol`` (illustration only).

matplotlib is not a dependency of the package; install it separately.

    python scripts/plot_figures.py smile.csv [more.csv ...] --y iv --out smile.png
"""

from __future__ import annotations

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def load(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("tables", nargs="+")
    ap.add_argument("--x", default="x")
    ap.add_argument("--y", action="append", help="column(s) to plot; default iv")
    ap.add_argument("--out", required=True)
    ns = ap.parse_args()
    fig, ax = plt.subplots(figsize=(6, 4))
    for path in ns.tables:
        t = load(path)
        for col in ns.y or ["iv"]:
            ax.plot(t[ns.x], t[col], label=f"{path}:{col}")
    ax.set_xlabel(ns.x)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(ns.out, dpi=150)


if __name__ == "__main__":
    main()
