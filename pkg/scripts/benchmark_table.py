"""Open-loop synthesis on the four reference formulas, Boolean and robust.

Prints one row per (formula, semantics): model size, cost, monitor robustness,
whether optimality was proven, and wall time.

    python3 scripts/benchmark_table.py --nodes 2000
"""
import argparse

from stlmpc.benchmarks import N, reference_formulas, reference_system
from stlmpc.encoder import EncodingParams
from stlmpc.milp import SolverConfig
from stlmpc.synthesis import L1InputNorm, SolverLimitError, open_loop


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-N", type=int, default=N)
    ap.add_argument("--target", type=float, default=0.1, help="robustness floor for the robust runs")
    ap.add_argument("--nodes", type=int, default=2000, help="branch-and-bound node budget per solve")
    ap.add_argument("--backend", choices=["bnb", "highs"], default="bnb")
    args = ap.parse_args()

    sys = reference_system()
    solver = SolverConfig(node_limit=args.nodes, backend=args.backend)
    print(f"{'formula':8} {'sem':6} {'bin':>5} {'cont':>5} {'rows':>5} {'cost':>9} {'rho':>8} {'proof':>6} {'time':>7}")
    for name, phi in reference_formulas().items():
        for sem in ("bool", "robust"):
            params = EncodingParams(N=args.N, semantics=sem, target=args.target if sem == "robust" else None)
            try:
                res = open_loop(sys, None, None, args.N, phi, L1InputNorm(), params, solver=solver)
            except SolverLimitError:
                print(f"{name:8} {sem:6} budget exhausted without a trajectory")
                continue
            d = res.diagnostics
            print(f"{name:8} {sem:6} {d['binaries']:5d} {d['continuous']:5d} {d['constraints']:5d} "
                  f"{d['objective']:9.4f} {d['monitor_robustness']:8.4f} "
                  f"{'yes' if d['proven_optimal'] else 'no':>6} {d['wall_time']:7.2f}")


if __name__ == "__main__":
    main()
