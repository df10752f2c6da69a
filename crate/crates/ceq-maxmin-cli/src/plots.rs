//! Plot scripts emitted next to the CSV outputs. They are plain standalone
//! Python (csv + matplotlib) so figures are batch artifacts of the run
//! directory, not something rendered in-process.

pub const PLOT_RATES: &str = r#"#!/usr/bin/env python3
"""Ergodic sum/min rate curves from rates.csv.

Usage: python3 plot_rates.py [--x AXIS] [--metric sum_rate|min_rate] [--out FILE]
AXIS defaults to the first sweep column with more than one distinct value.
"""
import argparse
import collections
import csv
import math

AXES = ["k_users", "n_bs", "n_sc", "p_bs_dbm", "est_error"]

def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--csv", default="rates.csv")
    ap.add_argument("--x", default=None)
    ap.add_argument("--metric", default="sum_rate", choices=["sum_rate", "min_rate"])
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    with open(args.csv) as f:
        reader = csv.DictReader(line for line in f if not line.startswith('#'))
        rows = [r for r in reader if r["status"] == "ok"]
    if not rows:
        raise SystemExit("no ok rows in " + args.csv)

    x_axis = args.x
    if x_axis is None:
        for a in AXES:
            if len({r[a] for r in rows}) > 1:
                x_axis = a
                break
        else:
            x_axis = AXES[0]

    series = collections.defaultdict(lambda: collections.defaultdict(list))
    for r in rows:
        label = f'{r["algorithm"]} (b={r["b"]})'
        val = float(r[args.metric])
        if math.isfinite(val):
            series[label][float(r[x_axis])].append(val)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label in sorted(series):
        pts = sorted(series[label].items())
        xs = [x for x, _ in pts]
        ys = [sum(v) / len(v) for _, v in pts]
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel(x_axis)
    ax.set_ylabel(args.metric.replace("_", " ") + " [b/s/Hz]")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    out = args.out or f"{args.metric}_vs_{x_axis}.png"
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print("wrote", out)

if __name__ == "__main__":
    main()
"#;

pub const PLOT_BER: &str = r#"#!/usr/bin/env python3
"""Per-user uncoded BER from linksim.csv, averaged over realizations.

Usage: python3 plot_ber.py [--out FILE]
"""
import argparse
import collections
import csv

def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--csv", default="linksim.csv")
    ap.add_argument("--out", default="ber.png")
    args = ap.parse_args()

    per_alg = collections.defaultdict(list)
    with open(args.csv) as f:
        for r in csv.DictReader(f):
            if r["kind"] == "ber":
                per_alg[r["algorithm"]].append(float(r["value"]))
    if not per_alg:
        raise SystemExit("no ber rows in " + args.csv)

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    labels = sorted(per_alg)
    means = [sum(per_alg[l]) / len(per_alg[l]) for l in labels]
    ax.bar(range(len(labels)), means)
    ax.set_xticks(range(len(labels)), labels, rotation=30, ha="right", fontsize=8)
    ax.set_yscale("log")
    ax.set_ylabel("mean uncoded BER")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print("wrote", args.out)

if __name__ == "__main__":
    main()
"#;
