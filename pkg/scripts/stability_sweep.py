#!/usr/bin/env python3
"""Sweep the discrete inf-sup stability constant over a fine order grid.

Usage:
    python3 scripts/stability_sweep.py [--steps 320] [--n-alphas 49] [--out sweep.csv]

Prints an aligned table of c(alpha, K) and, when --out is given, writes the
same data as CSV. The constant is bounded away from zero uniformly in K for
each fixed order, but degenerates as the order approaches 1.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from fracpg.temporal import stability_constant


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, nargs="+", default=[20, 80, 320])
    parser.add_argument("--n-alphas", type=int, default=19)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    alphas = np.linspace(0.05, 0.95, args.n_alphas)
    rows = []
    header = ["alpha"] + [f"K={k}" for k in args.steps]
    print("  ".join(f"{name:>10s}" for name in header))
    for alpha in alphas:
        constants = [stability_constant(float(alpha), k) for k in args.steps]
        rows.append([float(alpha)] + constants)
        print(f"{alpha:10.3f}  " + "  ".join(f"{c:10.6f}" for c in constants))

    if args.out:
        with open(args.out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
