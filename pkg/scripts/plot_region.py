"""Render a ``mergelab region`` CSV as a scatter of classified (E, C) pairs.

    mergelab region --state psi.json --grid E:-1:3:0.05 C:-1:3:0.05 --out region.csv
    python3 scripts/plot_region.py region.csv region.png

Needs the ``plot`` extra (matplotlib).
"""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLORS = {"excluded": "#d9d9d9", "unknown": "#9ecae1", "achievable": "#08519c"}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv")
    parser.add_argument("out")
    parser.add_argument("--title", default="")
    args = parser.parse_args(argv)

    points = {label: ([], []) for label in COLORS}
    with open(args.csv, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            es, cs = points[row["classification"]]
            es.append(float(row["E"]))
            cs.append(float(row["C"]))

    fig, ax = plt.subplots(figsize=(5, 5))
    for label, (es, cs) in points.items():
        if es:
            ax.scatter(es, cs, s=6, marker="s", color=COLORS[label], label=label, linewidths=0)
    ax.axhline(0, color="k", lw=0.5)
    ax.axvline(0, color="k", lw=0.5)
    ax.set_xlabel("E (ebits per copy)")
    ax.set_ylabel("C (cobits per copy)")
    if args.title:
        ax.set_title(args.title)
    ax.legend(loc="upper right", markerscale=3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
