"""CPLEX LP-format export (and a reader for the subset we write)."""
from __future__ import annotations

import math
import re
from pathlib import Path

from .model import MilpModel, Sense, VarKind

_CONST_VAR = "__const_one"


def _num(v: float) -> str:
    return format(v, ".17g")


def _terms(expr: dict[int, float], names: list[str]) -> str:
    parts = []
    for var, coef in expr.items():
        if coef == 0.0:
            continue
        sign = "-" if coef < 0 else "+"
        parts.append(f"{sign} {_num(abs(coef))} {names[var]}")
    if not parts:
        return ""
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[1:]


def _wrap(text: str, width: int = 200) -> str:
    """LP readers limit line length; break long expressions between terms."""
    if len(text) <= width:
        return text
    lines, line = [], ""
    for tok in re.split(r" (?=[+-] )", text):
        if line and len(line) + len(tok) + 1 > width:
            lines.append(line)
            line = tok
        else:
            line = f"{line} {tok}" if line else tok
    lines.append(line)
    return "\n   ".join(lines)


def export_lp(model: MilpModel, path: str | Path | None = None) -> str:
    """Render ``model`` in LP format; write it to ``path`` if given."""
    names = [v.name for v in model.variables]
    out = [f"\\ {model.name}", "Maximize" if model.maximize else "Minimize"]
    obj = _terms(model.objective, names)
    need_const = any(not any(c != 0.0 for c in con.expr.values()) for con in model.constraints)
    if model.objective_constant != 0.0:
        need_const = True
        const = f"{'+' if model.objective_constant >= 0 else '-'} {_num(abs(model.objective_constant))} {_CONST_VAR}"
        obj = f"{obj} {const}" if obj else const.lstrip("+ ")
    out.append(" obj: " + _wrap(obj or f"0 {names[0] if names else _CONST_VAR}"))
    if not names:
        need_const = True
    out.append("Subject To")
    for con in model.constraints:
        lhs = _terms(con.expr, names) or f"0 {_CONST_VAR}"
        out.append(f" {con.name}: {_wrap(lhs)} {con.sense.value} {_num(con.rhs)}")
    out.append("Bounds")
    for v in model.variables:
        if v.kind == VarKind.BINARY and v.lower == 0.0 and v.upper == 1.0:
            continue
        out.append(" " + _bound_line(v.name, v.lower, v.upper))
    if need_const:
        out.append(f" {_CONST_VAR} = 1")
    binaries = [v.name for v in model.variables if v.kind == VarKind.BINARY]
    if binaries:
        out.append("Binaries")
        for i in range(0, len(binaries), 10):
            out.append(" " + " ".join(binaries[i:i + 10]))
    out.append("End")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _bound_line(name: str, lo: float, hi: float) -> str:
    if lo == hi:
        return f"{name} = {_num(lo)}"
    if math.isinf(lo) and math.isinf(hi):
        return f"{name} free"
    left = "-inf" if math.isinf(lo) else _num(lo)
    right = "+inf" if math.isinf(hi) else _num(hi)
    return f"{left} <= {name} <= {right}"


_SECTION = re.compile(r"^(minimize|maximize|subject to|bounds|binaries|binary|end)$", re.I)


def _parse_expr(text: str) -> dict[str, float]:
    expr: dict[str, float] = {}
    for m in re.finditer(r"([+-]?)\s*(\d[\d.eE+\-]*)?\s*([A-Za-z_][\w.\[\]]*)", text):
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        expr[m.group(3)] = expr.get(m.group(3), 0.0) + sign * coef
    return expr


def read_lp(text: str) -> MilpModel:
    """Parse LP text produced by :func:`export_lp` back into a model."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("\\")]
    # join continuation lines (indented three spaces beyond a statement)
    stmts: list[str] = []
    for ln in lines:
        if ln.startswith("   ") and stmts:
            stmts[-1] += " " + ln.strip()
        else:
            stmts.append(ln.strip())
    section = None
    maximize = False
    obj: dict[str, float] = {}
    cons: list[tuple[str, dict[str, float], str, float]] = []
    bounds: dict[str, tuple[float, float]] = {}
    binaries: list[str] = []
    order: list[str] = []

    def see(names):
        for n in names:
            if n not in order and n != _CONST_VAR:
                order.append(n)

    for st in stmts:
        if _SECTION.match(st):
            section = st.lower()
            if section == "maximize":
                maximize = True
            continue
        if section in ("minimize", "maximize"):
            obj = _parse_expr(st.split(":", 1)[1])
            see(obj)
        elif section == "subject to":
            name, body = st.split(":", 1)
            m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)$", body.strip())
            expr = _parse_expr(m.group(1))
            see(expr)
            cons.append((name.strip(), expr, m.group(2), float(m.group(3))))
        elif section == "bounds":
            toks = st.split()
            if len(toks) == 2 and toks[1] == "free":
                bounds[toks[0]] = (-math.inf, math.inf)
            elif len(toks) == 3 and toks[1] == "=":
                bounds[toks[0]] = (float(toks[2]), float(toks[2]))
            else:
                bounds[toks[2]] = (float(toks[0]), float(toks[4]))
            see([toks[0] if len(toks) <= 3 else toks[2]])
        elif section in ("binaries", "binary"):
            binaries.extend(st.split())
            see(st.split())
    model = MilpModel()
    ids = {}
    for name in order:
        kind = VarKind.BINARY if name in binaries else VarKind.CONTINUOUS
        lo, hi = bounds.get(name, (0.0, 1.0) if kind == VarKind.BINARY else (0.0, math.inf))
        ids[name] = model.add_variable(kind, lo, hi, name)
    const = obj.pop(_CONST_VAR, 0.0)
    model.set_objective({ids[k]: v for k, v in obj.items()}, maximize=maximize, constant=const)
    for name, expr, sense, rhs in cons:
        expr.pop(_CONST_VAR, None)
        model.add_constraint({ids[k]: v for k, v in expr.items()}, Sense(sense), rhs, name)
    return model
