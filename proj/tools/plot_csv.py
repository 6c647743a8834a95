#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Static line charts from cfisac CSV output.

    plot_csv.py rate_vs_L rate_vs_L.csv rate_vs_L.png
    plot_csv.py convergence convergence.csv convergence.png
    plot_csv.py rate_vs_crlb_threshold thresholds.csv thresholds.png
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def rate_vs_L(df, ax):
    for (nt, tau), g in df.groupby(["N_t", "tau_p"]):
        g = g.sort_values("L")
        ax.plot(g["L"], g["cf_sum_rate"], "-o", label=f"N_t={nt}, tau_p={tau}")
        ax.plot(g["L"], g["mc_sum_rate"], "x", color=ax.lines[-1].get_color())
    ax.set_xlabel("L")
    ax.set_ylabel("sum rate [bit/s/Hz]")


def convergence(df, ax):
    df = df[df["status"] == "ok"]
    for L, g in df.groupby("L"):
        mean = g.groupby("iter")["sum_rate"].mean()
        ax.plot(mean.index, mean.values, "-o", label=f"L={L}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("sum rate [bit/s/Hz]")


def rate_vs_crlb_threshold(df, ax):
    df = df[df["status"] == "ok"]
    for L, g in df.groupby("L"):
        m = g.groupby("crlb_threshold_db")[["sca_sum_rate", "heuristic_sum_rate"]].mean()
        ax.plot(m.index, m["sca_sum_rate"], "-o", label=f"SCA, L={L}")
        ax.plot(m.index, m["heuristic_sum_rate"], "--", color=ax.lines[-1].get_color(), label=f"heuristic, L={L}")
    ax.set_xlabel("CRLB threshold [dB]")
    ax.set_ylabel("sum rate [bit/s/Hz]")


def main():
    kinds = {"rate_vs_L": rate_vs_L, "convergence": convergence, "rate_vs_crlb_threshold": rate_vs_crlb_threshold}
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("kind", choices=sorted(kinds))
    p.add_argument("csv")
    p.add_argument("png")
    a = p.parse_args()
    fig, ax = plt.subplots(figsize=(6, 4))
    kinds[a.kind](pd.read_csv(a.csv), ax)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(a.png, dpi=120)


if __name__ == "__main__":
    main()
