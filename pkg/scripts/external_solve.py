"""Export a synthesis MILP as an LP file, solve it with HiGHS, check the result.

The LP text is read back, handed to ``scipy.optimize.milp`` (HiGHS), and the
solution is mapped onto the original model by variable name.  The decoded run
is then checked with the monitor.

    python3 scripts/external_solve.py --formula phi4 --semantics robust --lp phi4.lp
"""
import argparse
from pathlib import Path

import numpy as np

from stlmpc.benchmarks import N, reference_formulas, reference_system
from stlmpc.encoder import EncodingParams, encode
from stlmpc.milp import Solution, SolverConfig, export_lp, read_lp, solve
from stlmpc.synthesis import L1InputNorm, apply_cost, check_run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--formula", default="phi4", choices=sorted(reference_formulas()))
    ap.add_argument("--semantics", choices=["bool", "robust"], default="robust")
    ap.add_argument("--target", type=float, default=0.1)
    ap.add_argument("-N", type=int, default=N)
    ap.add_argument("--lp", help="keep the LP file at this path")
    ap.add_argument("--time-limit", type=float, default=300.0)
    args = ap.parse_args()

    phi = reference_formulas()[args.formula]
    target = args.target if args.semantics == "robust" else None
    art = encode(reference_system(), phi, EncodingParams(N=args.N, semantics=args.semantics, target=target))
    apply_cost(art, L1InputNorm())
    text = export_lp(art.model)
    if args.lp:
        Path(args.lp).write_text(text)
    external = read_lp(text)
    sol = solve(external, SolverConfig(backend="highs", time_limit=args.time_limit))
    print(f"HiGHS: {sol.status.value}, objective {sol.objective_value:.6g}, "
          f"{external.num_binaries} binaries, {external.num_constraints} rows")
    if sol.assignment is None:
        raise SystemExit(3)
    index = {v.name: v.id for v in external.variables}
    x = np.array([sol.assignment[index[v.name]] for v in art.model.variables])
    run = art.decode(Solution(sol.status, x, sol.objective_value))
    ok, rho = check_run(run, phi, args.semantics, target)
    print(f"monitor: {'accepts' if ok else 'REJECTS'} the decoded run, robustness {rho:.6g}")
    raise SystemExit(0 if ok else 4)


if __name__ == "__main__":
    main()
