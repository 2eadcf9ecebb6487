#!/usr/bin/env python3
"""Heatmap of a cross-validated grid written by `cadcost grid`.

Reads the `depth,lr,mean_mae` CSV, pivots it to max_depth x learning_rate
and saves a PNG. With --check the CSV is only validated (no matplotlib
needed).
"""

import argparse
import csv
import math
import sys


def load_grid(path):
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ["depth", "lr", "mean_mae"]:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        cells = {}
        for row in reader:
            depth, lr, mae = int(row["depth"]), float(row["lr"]), float(row["mean_mae"])
            if not math.isfinite(mae):
                raise ValueError(f"non-finite MAE in {row}")
            if (depth, lr) in cells:
                raise ValueError(f"duplicate cell {depth}, {lr}")
            cells[(depth, lr)] = mae
    depths = sorted({d for d, _ in cells})
    lrs = sorted({lr for _, lr in cells})
    if len(cells) != len(depths) * len(lrs):
        raise ValueError("grid is not a full depth x lr product")
    grid = [[cells[(d, lr)] for lr in lrs] for d in depths]
    return depths, lrs, grid


def plot(depths, lrs, grid, out):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(1.4 * len(lrs) + 2, 1.0 * len(depths) + 1.5))
    im = ax.imshow(grid, cmap="viridis_r", aspect="auto")
    ax.set_xticks(range(len(lrs)), [f"{lr:g}" for lr in lrs])
    ax.set_yticks(range(len(depths)), [str(d) for d in depths])
    ax.set_xlabel("learning_rate")
    ax.set_ylabel("max_depth")
    for i, row in enumerate(grid):
        for j, v in enumerate(row):
            ax.text(j, i, f"{v:.3f}", ha="center", va="center", color="white", fontsize=8)
    fig.colorbar(im, ax=ax, label="mean CV MAE")
    fig.tight_layout()
    fig.savefig(out, dpi=120)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("grid_csv")
    p.add_argument("-o", "--out", default="grid_heatmap.png")
    p.add_argument("--check", action="store_true", help="validate the CSV only")
    args = p.parse_args(argv)
    try:
        depths, lrs, grid = load_grid(args.grid_csv)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    best = min((v, d, lr) for d, row in zip(depths, grid) for lr, v in zip(lrs, row))
    print(f"{len(depths)}x{len(lrs)} grid, best max_depth={best[1]} learning_rate={best[2]:g} MAE={best[0]:.4f}")
    if not args.check:
        plot(depths, lrs, grid, args.out)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
