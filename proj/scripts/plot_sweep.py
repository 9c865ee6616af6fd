#!/usr/bin/env python3
"""Overlay mean test accuracy (± std) from one or more sweep.csv files.

    python3 scripts/plot_sweep.py runs/cnn/sweep.csv runs/rafcnn/sweep.csv -o fig.png
"""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("tables", nargs="+")
    ap.add_argument("-o", "--out", default="sweep.png")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for path in args.tables:
        df = pd.read_csv(path).sort_values("value")
        label = f"{df.model.iloc[0]} ({df.dataset.iloc[0]})"
        ax.errorbar(df.value, df.mean_accuracy, yerr=df.std_accuracy, marker="o", capsize=3, label=label)
        ax.set_xlabel(df.axis.iloc[0])
    ax.set_ylabel("test accuracy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
