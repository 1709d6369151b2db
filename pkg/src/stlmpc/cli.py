"""Command-line front end: ``stlmpc {monitor,encode,synth,mpc}``.

Exit codes: 0 success (monitor: satisfied), 1 monitor says unsatisfied,
2 usage / parse / IO / horizon error, 3 no trajectory at this horizon
(infeasible, or an MPC step failed), 4 the independent monitor rejected a
synthesized run, 5 solver budget exhausted without a trajectory.

Every file written starts with ``#`` comment lines holding the fully resolved
configuration, so a run can be reproduced from its outputs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .encoder import EncodingError, EncodingParams, Mode, Semantics, encode, encode_snn_lp
from .formula import FormulaError, is_bounded
from .milp import SolverConfig, export_lp
from .parser import parse
from .semantics import HorizonError, robustness, satisfies
from .synthesis import (
    InfeasibleError,
    MaxRobustness,
    SolverLimitError,
    SynthesisError,
    VerificationError,
    apply_cost,
    as_mpc_formula,
    exact_predictor,
    mpc,
    mpc_horizon,
    open_loop,
    parse_cost,
)
from .trace import AffineSystem, TraceError, TrivialSystem, format_trace_csv, load_system, read_trace_csv

EXIT_OK, EXIT_UNSAT, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_UNVERIFIED, EXIT_LIMIT = 0, 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    formula: str
    system: str | None = None
    trivial: int | None = None
    trace: str | None = None
    N: int | None = None
    dt: float | None = None
    mode: str = "finite"
    semantics: str = "bool"
    target: float | None = None
    eps: float = 1e-4
    cost: str = "l1"
    snn_lp: bool = False
    soften: bool = False
    export_lp: str | None = None
    out: str | None = None
    diagnostics: str | None = None
    disturbances: str | None = None
    x0: list[float] | None = None
    steps: int | None = None
    horizon: int | None = None
    nodes: int = 1_000_000
    time_limit: float | None = None
    backend: str = "bnb"
    seed: int = 0
    formula_text: str = field(default="", repr=False)

    def header(self) -> list[str]:
        data = {k: v for k, v in asdict(self).items() if k != "formula_text"}
        data["formula"] = self.formula_text
        return ["stlmpc " + json.dumps(data, sort_keys=True)]


# -- argument handling ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stlmpc", description="STL monitoring, MILP encoding and synthesis")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_system=True):
        sp.add_argument("--formula", required=True, help="formula text or a file containing it")
        if needs_system:
            g = sp.add_mutually_exclusive_group(required=True)
            g.add_argument("--system", help="affine system JSON file")
            g.add_argument("--trivial", type=int, metavar="n", help="dynamics-free system x = u of dimension n")
            sp.add_argument("--dt", type=float, help="sample time of --trivial (default 1.0)")
            sp.add_argument("--x0", type=_floats, help="initial state, comma separated")
            sp.add_argument("--disturbances", help="CSV with columns w1..we (one row per sample)")

    def solving(sp):
        sp.add_argument("--nodes", type=int, default=1_000_000, help="branch-and-bound node budget")
        sp.add_argument("--time-limit", type=float, default=None, help="solver time budget in seconds")
        sp.add_argument("--backend", choices=["bnb", "highs"], default="bnb")
        sp.add_argument("--seed", type=int, default=0, help="recorded for reproducibility")

    def encoding(sp):
        sp.add_argument("-N", type=int, required=True, help="horizon in samples")
        sp.add_argument("--mode", choices=["finite", "lasso"], default="finite")
        sp.add_argument("--semantics", choices=["bool", "robust"], default="bool")
        sp.add_argument("--target", type=float, default=None, help="robustness floor (robust semantics)")
        sp.add_argument("--eps", type=float, default=1e-4)
        sp.add_argument("--snn-lp", action="store_true", help="binary-free encoding for SNN formulas")

    m = sub.add_parser("monitor", help="evaluate a formula on a trace")
    common(m, needs_system=False)
    m.add_argument("--trace", required=True)

    e = sub.add_parser("encode", help="write the MILP for a formula as an LP file")
    common(e)
    encoding(e)
    e.add_argument("--export-lp", help="LP output path")
    e.add_argument("--out", help="alias of --export-lp")
    e.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("synth", help="open-loop synthesis")
    common(s)
    encoding(s)
    solving(s)
    s.add_argument("--cost", choices=["l1", "linf", "maxrob"], default="l1")
    s.add_argument("--out", help="trace CSV output")
    s.add_argument("--diagnostics", help="diagnostics CSV output")
    s.add_argument("--export-lp", help="also write the model as an LP file")

    c = sub.add_parser("mpc", help="receding-horizon control for G phi_mpc")
    common(c)
    solving(c)
    c.add_argument("--steps", type=int, required=True, help="number of committed inputs")
    c.add_argument("--horizon", type=int, default=None, help="H in samples (default: bound of phi_mpc)")
    c.add_argument("--eps", type=float, default=1e-4)
    c.add_argument("--cost", choices=["l1", "linf", "maxrob"], default="l1")
    c.add_argument("--soften", action="store_true", help="penalise floor violations instead of aborting")
    c.add_argument("--out", help="realized trace CSV output")
    c.add_argument("--diagnostics", help="per-step diagnostics CSV output")
    return p


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def resolve(args: argparse.Namespace) -> RunConfig:
    """Validate flags and build the :class:`RunConfig` (no computation yet)."""
    cfg = RunConfig(command=args.command, formula=args.formula)
    for name in ("system", "trivial", "trace", "N", "dt", "mode", "semantics", "target", "eps", "cost",
                 "snn_lp", "soften", "export_lp", "out", "diagnostics", "disturbances", "x0", "steps",
                 "horizon", "nodes", "time_limit", "backend", "seed"):
        if hasattr(args, name) and getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    if cfg.command == "encode" and cfg.export_lp is None:
        cfg.export_lp = cfg.out
    if cfg.command == "encode" and cfg.export_lp is None:
        raise UsageError("encode needs --export-lp <path>")
    if cfg.trivial is not None:
        if cfg.trivial < 1:
            raise UsageError("--trivial needs a positive dimension")
        cfg.dt = 1.0 if cfg.dt is None else cfg.dt
        if not cfg.dt > 0:
            raise UsageError("--dt must be positive")
    elif cfg.dt is not None and cfg.command != "monitor":
        raise UsageError("--dt applies to --trivial systems only (affine systems carry their own dt)")
    if cfg.N is not None and cfg.N < 1:
        raise UsageError("-N must be at least 1")
    if cfg.steps is not None and cfg.steps < 1:
        raise UsageError("--steps must be at least 1")
    if cfg.nodes < 1:
        raise UsageError("--nodes must be positive")
    if cfg.cost == "maxrob" and cfg.command == "synth" and cfg.semantics != "robust":
        raise UsageError("--cost maxrob needs --semantics robust")
    if cfg.snn_lp and cfg.mode != "finite":
        raise UsageError("--snn-lp supports --mode finite only")
    if cfg.target is not None and cfg.semantics != "robust":
        raise UsageError("--target needs --semantics robust")
    path = Path(cfg.formula)
    cfg.formula_text = _strip_comments(path.read_text() if _is_file(path) else cfg.formula)
    return cfg


def _is_file(path: Path) -> bool:
    try:
        return path.is_file()
    except OSError:
        return False


def _strip_comments(text: str) -> str:
    return "\n".join(line for line in text.splitlines() if not line.lstrip().startswith("#")).strip()


def _system(cfg: RunConfig):
    if cfg.trivial is not None:
        return TrivialSystem(cfg.trivial, cfg.dt)
    return load_system(cfg.system)


def _disturbances(cfg: RunConfig, sys) -> np.ndarray | None:
    if cfg.disturbances is None:
        return None
    lines = [ln for ln in Path(cfg.disturbances).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    cols = [i for i, h in enumerate(header) if h.startswith("w")]
    if len(cols) != sys.e:
        raise TraceError(f"disturbance file has {len(cols)} w-columns, system needs {sys.e}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        try:
            rows.append([float(row[i]) for i in cols])
        except (ValueError, IndexError):
            raise TraceError(f"row {lineno}: malformed disturbance row") from None
    return np.array(rows).reshape(-1, sys.e)


def _solver(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(backend=cfg.backend, node_limit=cfg.nodes, time_limit=cfg.time_limit)


def _params(cfg: RunConfig) -> EncodingParams:
    return EncodingParams(N=cfg.N, mode=Mode(cfg.mode), semantics=Semantics(cfg.semantics),
                          eps=cfg.eps, target=cfg.target)


def _write(path: str | None, text: str, out) -> None:
    if path is None or path == "-":
        out.write(text)
    else:
        Path(path).write_text(text)


# -- commands -------------------------------------------------------------------------


def cmd_monitor(cfg: RunConfig, out) -> int:
    phi = parse(cfg.formula_text)
    run = read_trace_csv(cfg.trace)
    ok = satisfies(run, phi, 0)
    rho = robustness(run, phi, 0)
    print(f"{'sat' if ok else 'unsat'}, rho={rho:+.6g}", file=out)
    return EXIT_OK if ok else EXIT_UNSAT


def cmd_encode(cfg: RunConfig, out) -> int:
    phi = parse(cfg.formula_text)
    sys_ = _system(cfg)
    params = _params(cfg)
    w = _disturbances(cfg, sys_)
    x0 = cfg.x0
    if x0 is None and isinstance(sys_, AffineSystem):
        raise UsageError("an affine system needs --x0")
    if cfg.snn_lp:
        params = EncodingParams(N=params.N, mode=params.mode, semantics=Semantics.ROBUST,
                                eps=params.eps, target=params.target)
        art = encode_snn_lp(sys_, phi, params, x0=x0, w=w)
    else:
        art = encode(sys_, phi, params, x0=x0, w=w)
    model = art.model
    text = "".join(f"\\ {line}\n" for line in cfg.header()) + export_lp(model)
    Path(cfg.export_lp).write_text(text)
    side = {"config": json.loads(cfg.header()[0].split(" ", 1)[1]), **art.variable_map()}
    Path(str(cfg.export_lp) + ".map.json").write_text(json.dumps(side, indent=1, sort_keys=True) + "\n")
    print(f"binaries: {model.num_binaries}", file=out)
    print(f"continuous: {model.num_variables - model.num_binaries}", file=out)
    print(f"constraints: {model.num_constraints}", file=out)
    print(f"stl binaries: {art.stl_counts.binaries}", file=out)
    print(f"stl continuous: {art.stl_counts.continuous}", file=out)
    return EXIT_OK


def _diag_csv(header: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    if rows:
        keys = list(rows[0])
        for r in rows[1:]:
            keys += [k for k in r if k not in keys]
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n", restval="")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def cmd_synth(cfg: RunConfig, out) -> int:
    phi = parse(cfg.formula_text)
    sys_ = _system(cfg)
    x0 = cfg.x0
    if x0 is None and isinstance(sys_, AffineSystem):
        raise UsageError("an affine system needs --x0")
    w = _disturbances(cfg, sys_)
    cost = parse_cost(cfg.cost)
    params = _params(cfg)
    if isinstance(cost, MaxRobustness) and params.semantics != Semantics.ROBUST:
        raise UsageError("--cost maxrob needs --semantics robust")
    if cfg.export_lp:
        art = encode(sys_, phi, params, x0=x0, w=w)
        apply_cost(art, cost)
        Path(cfg.export_lp).write_text("".join(f"\\ {ln}\n" for ln in cfg.header()) + export_lp(art.model))
    try:
        res = open_loop(sys_, x0, w, cfg.N, phi, cost, params, solver=_solver(cfg), snn_lp=cfg.snn_lp)
    except InfeasibleError:
        print("infeasible: no trajectory at this horizon", file=out)
        return EXIT_INFEASIBLE
    except SolverLimitError as exc:
        print(f"solver limit: {exc}", file=out)
        return EXIT_LIMIT
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=out)
        return EXIT_UNVERIFIED
    d = res.diagnostics
    header = cfg.header()
    _write(cfg.out, format_trace_csv(res.run, header), out)
    if cfg.diagnostics:
        row = {k: d[k] for k in ("status", "objective", "binaries", "continuous", "constraints", "nodes",
                                 "monitor_robustness", "verified", "proven_optimal", "loop_index")}
        row["wall_time"] = f"{d['wall_time']:.6f}"
        Path(cfg.diagnostics).write_text(_diag_csv(header, [row]))
    status = "optimal" if d["proven_optimal"] else "feasible (budget exhausted before proving optimality)"
    print(f"verified: {status}, cost={d['objective']:.9g}, rho={d['monitor_robustness']:+.6g}",
          file=sys.stderr if cfg.out in (None, "-") else out)
    return EXIT_OK


def cmd_mpc(cfg: RunConfig, out) -> int:
    phi = as_mpc_formula(parse(cfg.formula_text))
    if not is_bounded(phi):
        raise UsageError("mpc needs G phi_mpc (or phi_mpc) with a bounded phi_mpc")
    sys_ = _system(cfg)
    x0 = cfg.x0
    if x0 is None and isinstance(sys_, AffineSystem):
        raise UsageError("an affine system needs --x0")
    w = _disturbances(cfg, sys_)
    if sys_.e and w is None:
        raise UsageError("a system with disturbances needs --disturbances")
    H = mpc_horizon(phi, sys_.dt, cfg.horizon)
    predictor = exact_predictor(w, 2 * H + 1) if sys_.e else None
    params = EncodingParams(N=2 * H, semantics=Semantics.ROBUST, eps=cfg.eps)
    res = mpc(sys_, x0, phi, parse_cost(cfg.cost), predictor, cfg.steps, params, w_true=w, H=H,
              solver=_solver(cfg), soften=cfg.soften)
    header = cfg.header() + [f"H={H}"]
    if cfg.diagnostics:
        Path(cfg.diagnostics).write_text(_diag_csv(header, [s.row() for s in res.steps]))
    if not res.completed:
        print(f"mpc aborted at step {res.failed_step}: no trajectory at this horizon ({res.message})", file=out)
        return EXIT_INFEASIBLE
    if res.violations:
        print(f"monitor rejects the realized run at offsets {res.violations}", file=out)
        return EXIT_UNVERIFIED
    _write(cfg.out, format_trace_csv(res.run, header), out)
    print(f"verified: phi_mpc holds at all {res.checked_offsets} checked offsets",
          file=sys.stderr if cfg.out in (None, "-") else out)
    return EXIT_OK


COMMANDS = {"monitor": cmd_monitor, "encode": cmd_encode, "synth": cmd_synth, "mpc": cmd_mpc}


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = resolve(args)
        return COMMANDS[cfg.command](cfg, out)
    except (UsageError, FormulaError, TraceError, HorizonError, EncodingError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SynthesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    raise SystemExit(main())
