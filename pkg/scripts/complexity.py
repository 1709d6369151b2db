"""Variable counts of the STL encodings as the horizon grows.

For each reference formula, semantics and mode, fits ``count = a + b N`` over
the requested horizons and prints the slope and R^2 of the least-squares fit.

    python3 scripts/complexity.py --dt 0.1 --horizons 10 20 30 40
"""
import argparse

import numpy as np

from stlmpc.benchmarks import reference_formulas
from stlmpc.encoder import count_variables


def r_squared(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return slope, 1.0 if ss_tot == 0 else 1.0 - np.sum(resid ** 2) / ss_tot


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=0.1)
    ap.add_argument("--horizons", type=int, nargs="+", default=[10, 20, 30, 40])
    args = ap.parse_args()

    print(f"{'formula':8} {'sem':6} {'mode':6} {'binaries':>40} {'slope':>7} {'R^2':>9}")
    for name, phi in reference_formulas().items():
        for sem in ("bool", "robust"):
            for mode in ("finite", "lasso"):
                counts = [count_variables(phi, N, sem, args.dt, mode).binaries for N in args.horizons]
                slope, r2 = r_squared(args.horizons, counts)
                print(f"{name:8} {sem:6} {mode:6} {str(counts):>40} {slope:7.2f} {r2:9.6f}")


if __name__ == "__main__":
    main()
