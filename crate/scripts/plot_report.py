#!/usr/bin/env python3
"""Plot report.csv files written by `sheq` as log2(error) against level.

Usage: plot_report.py OUT_DIR [OUT_DIR ...] [--output FILE]

Each series gets its error bars (two standard errors) and, where the
report carries a fitted slope, the fitted line.
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402


def plot_dir(ax, directory: Path):
    df = pd.read_csv(directory / "report.csv")
    for label, rows in df.groupby("study", sort=False):
        rows = rows[rows.error_rms > 0]
        if rows.empty:
            continue
        level = rows.level.to_numpy()
        err = rows.error_rms.to_numpy()
        lo = np.log2(np.maximum(err - 2 * rows.stderr.to_numpy(), err * 1e-3))
        hi = np.log2(err + 2 * rows.stderr.to_numpy())
        y = np.log2(err)
        name = f"{directory.name}/{label}" if len(df.study.unique()) > 1 else directory.name
        slope = rows.slope.iloc[0]
        if pd.notna(slope):
            name += f" (slope {slope:.3f})"
        line = ax.errorbar(level, y, yerr=[y - lo, hi - y], marker="o", capsize=3, label=name)
        if pd.notna(slope):
            # least-squares line through the plotted points with the reported slope
            intercept = np.mean(y + slope * level)
            ax.plot(level, intercept - slope * level, "--", color=line[0].get_color(), alpha=0.6)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("dirs", nargs="+", type=Path)
    parser.add_argument("--output", type=Path, default=Path("report.png"))
    args = parser.parse_args()
    fig, ax = plt.subplots(figsize=(7, 5))
    for d in args.dirs:
        plot_dir(ax, d)
    ax.set_xlabel("refinement level")
    ax.set_ylabel("log2 error (max over time of RMS)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
