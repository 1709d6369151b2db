"""Runs, lasso runs and affine discrete-time systems.

A :class:`Run` holds ``N + 1`` states and ``N`` (optionally ``N + 1``) inputs
and disturbances.  The signal at a sample ``k`` is the triple
``(x_k, u_k, w_k)``; when the terminal input or disturbance at ``k = N`` is
not stored it is taken from ``k = l - 1`` on a lasso (the position that
``N`` duplicates) and held from ``k = N - 1`` on a finite run.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOOP_TOL = 1e-6


class TraceError(ValueError):
    pass


def _bounds(value, dim: int, name: str) -> tuple[tuple[float, float], ...]:
    pairs = tuple((float(lo), float(hi)) for lo, hi in value)
    if len(pairs) != dim:
        raise TraceError(f"{name} needs {dim} (lo, hi) pairs, got {len(pairs)}")
    for lo, hi in pairs:
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise TraceError(f"{name} must be finite (big-M constants are derived from them)")
        if lo > hi:
            raise TraceError(f"{name} has lo > hi: ({lo}, {hi})")
    return pairs


@dataclass(frozen=True, eq=False)
class AffineSystem:
    """``x[k+1] = A x[k] + B u[k] + E w[k] + c`` with box bounds on states and inputs."""

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    c: np.ndarray
    x_bounds: tuple[tuple[float, float], ...]
    u_bounds: tuple[tuple[float, float], ...]
    dt: float
    binary_inputs: tuple[bool, ...] = ()

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise TraceError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        B = np.array(self.B, dtype=float).reshape(n, -1)
        m = B.shape[1]
        E = np.array(self.E, dtype=float)
        E = E.reshape(n, -1) if E.size else np.zeros((n, 0))
        c = np.zeros(n) if self.c is None else np.array(self.c, dtype=float).reshape(n)
        for arr in (A, B, E, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "x_bounds", _bounds(self.x_bounds, n, "x_bounds"))
        object.__setattr__(self, "u_bounds", _bounds(self.u_bounds, m, "u_bounds"))
        if not self.dt > 0:
            raise TraceError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "dt", float(self.dt))
        flags = tuple(bool(b) for b in self.binary_inputs) or (False,) * m
        if len(flags) != m:
            raise TraceError("binary_inputs must have one flag per input")
        for flag, (lo, hi) in zip(flags, self.u_bounds):
            if flag and (lo, hi) != (0.0, 1.0):
                raise TraceError("binary inputs must have bounds (0, 1)")
        object.__setattr__(self, "binary_inputs", flags)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def e(self) -> int:
        return self.E.shape[1]

    def step(self, x, u, w=None) -> np.ndarray:
        out = self.A @ x + self.B @ u + self.c
        if self.e:
            out = out + self.E @ w
        return out

    def without_offset(self) -> "AffineSystem":
        return AffineSystem(self.A, self.B, self.E, np.zeros(self.n), self.x_bounds,
                            self.u_bounds, self.dt, self.binary_inputs)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(), "B": self.B.tolist(), "E": self.E.tolist(),
            "c": self.c.tolist(), "x_bounds": [list(b) for b in self.x_bounds],
            "u_bounds": [list(b) for b in self.u_bounds], "dt": self.dt,
            "binary_inputs": list(self.binary_inputs),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AffineSystem":
        missing = {"A", "B", "x_bounds", "u_bounds", "dt"} - set(data)
        if missing:
            raise TraceError(f"system description lacks keys: {sorted(missing)}")
        n = len(data["A"])
        return cls(
            A=data["A"], B=data["B"], E=data.get("E") or np.zeros((n, 0)),
            c=data.get("c"), x_bounds=data["x_bounds"], u_bounds=data["u_bounds"],
            dt=data["dt"], binary_inputs=tuple(data.get("binary_inputs") or ()),
        )


@dataclass(frozen=True)
class TrivialSystem:
    """The dynamics-free system ``x = u``: every sample's state is chosen directly."""

    n: int
    dt: float
    x_bounds: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        bounds = self.x_bounds or ((-10.0, 10.0),) * self.n
        object.__setattr__(self, "x_bounds", _bounds(bounds, self.n, "x_bounds"))
        if not self.dt > 0:
            raise TraceError(f"dt must be positive, got {self.dt}")

    @property
    def m(self) -> int:
        return self.n

    @property
    def e(self) -> int:
        return 0

    @property
    def u_bounds(self):
        return self.x_bounds


@dataclass(frozen=True, eq=False)
class Run:
    states: np.ndarray
    inputs: np.ndarray
    disturbances: np.ndarray
    dt: float
    loop_index: int | None = None

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(-1, 1)
        N = states.shape[0] - 1
        if N < 0:
            raise TraceError("a run needs at least one state")
        inputs = _signal_block(self.inputs, N, "inputs")
        dist = _signal_block(self.disturbances, N, "disturbances")
        for arr in (states, inputs, dist):
            arr.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "disturbances", dist)
        if not self.dt > 0:
            raise TraceError(f"dt must be positive, got {self.dt}")
        l = self.loop_index
        if l is not None:
            l = int(l)
            if not 1 <= l <= N:
                raise TraceError(f"loop index must satisfy 1 <= l <= N={N}, got {l}")
            gap = float(np.max(np.abs(states[l - 1] - states[N]), initial=0.0))
            if gap > LOOP_TOL:
                raise TraceError(f"(N,l)-loop needs states[l-1] == states[N]; gap {gap:.3g}")
            object.__setattr__(self, "loop_index", l)

    @property
    def N(self) -> int:
        return self.states.shape[0] - 1

    @property
    def is_lasso(self) -> bool:
        return self.loop_index is not None

    @property
    def period(self) -> int:
        if self.loop_index is None:
            raise TraceError("run has no loop")
        return self.N - self.loop_index + 1

    def time(self, k: int) -> float:
        return k * self.dt

    def position(self, i: int) -> int:
        """Map a position of the infinite word onto a stored index."""
        if i <= self.N:
            return i
        if self.loop_index is None:
            raise TraceError(f"position {i} is beyond the finite run (N={self.N})")
        l = self.loop_index
        return l + (i - l) % (self.N - l + 1)

    def _side(self, arr: np.ndarray, k: int) -> np.ndarray:
        if k < arr.shape[0]:
            return arr[k]
        if arr.shape[0] == 0:
            return np.zeros(arr.shape[1])
        if self.loop_index is not None:
            return arr[self.loop_index - 1]
        return arr[-1]

    def signal(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.position(k)
        return self.states[k], self._side(self.inputs, k), self._side(self.disturbances, k)


def _signal_block(value, N: int, name: str) -> np.ndarray:
    arr = np.array(value if value is not None else np.zeros((N, 0)), dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arr.size else np.zeros((N, 0))
    if arr.shape[0] not in (N, N + 1):
        raise TraceError(f"{name} must have N={N} or N+1 rows, got {arr.shape[0]}")
    return arr


def simulate(sys: AffineSystem, x0, u, w=None) -> Run:
    u = np.array(u, dtype=float).reshape(-1, sys.m)
    steps = u.shape[0]
    w = np.zeros((steps, sys.e)) if w is None else np.array(w, dtype=float).reshape(-1, sys.e)
    if w.shape[0] != steps:
        raise TraceError(f"u has {steps} rows but w has {w.shape[0]}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise TraceError(f"x0 must have {sys.n} components")
    states = np.empty((steps + 1, sys.n))
    states[0] = x0
    for k in range(steps):
        states[k + 1] = sys.step(states[k], u[k], w[k])
    return Run(states, u, w, sys.dt)


def unroll(run: Run, K: int) -> Run:
    """First ``K + 1`` positions of the infinite word of a lasso, as a finite run."""
    if run.loop_index is None:
        raise TraceError("unroll needs a lasso run")
    if K < run.N:
        raise TraceError(f"K={K} is shorter than the stored run (N={run.N})")
    idx = [run.position(i) for i in range(K + 1)]
    states = run.states[idx]
    inputs = np.array([run.signal(i)[1] for i in range(K + 1)]).reshape(K + 1, -1)
    dist = np.array([run.signal(i)[2] for i in range(K + 1)]).reshape(K + 1, -1)
    return Run(states, inputs, dist, run.dt)


@dataclass(frozen=True, eq=False)
class DisturbanceTrace:
    values: np.ndarray
    window_length: int | None = None

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.shape[0]

    def window(self, t: int, length: int | None = None) -> np.ndarray:
        length = self.window_length if length is None else length
        if length is None:
            raise TraceError("window length not given")
        if t < 0 or t + length > len(self):
            raise TraceError(
                f"window [{t}, {t + length}) exceeds stored disturbance length {len(self)}"
            )
        return self.values[t:t + length]


# -- file formats -----------------------------------------------------------

def format_trace_csv(run: Run, header_lines: list[str] = ()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    if run.loop_index is not None:
        buf.write(f"# loop={run.loop_index}\n")
    n, m, e = run.states.shape[1], run.inputs.shape[1], run.disturbances.shape[1]
    cols = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)] \
        + [f"w{i + 1}" for i in range(e)]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for k in range(run.N + 1):
        row = [_fmt(run.time(k))] + [_fmt(v) for v in run.states[k]]
        for arr in (run.inputs, run.disturbances):
            width = arr.shape[1]
            row += [_fmt(v) for v in arr[k]] if k < arr.shape[0] else [""] * width
        writer.writerow(row)
    return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(float(v) + 0.0)  # no negative zeros


def write_trace_csv(path, run: Run, header_lines: list[str] = ()) -> None:
    Path(path).write_text(format_trace_csv(run, header_lines))


def parse_trace_csv(text: str) -> Run:
    """Read the CSV trace format; raises :class:`TraceError` naming the bad row."""
    loop = None
    lines = text.splitlines()
    body = []
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            tag = stripped[1:].strip()
            if tag.startswith("loop="):
                try:
                    loop = int(tag[5:])
                except ValueError:
                    raise TraceError(f"row {lineno}: bad loop annotation {tag!r}") from None
            continue
        body.append((lineno, line))
    if not body:
        raise TraceError("trace file has no header row")
    header_no, header_line = body[0]
    header = [h.strip() for h in next(csv.reader([header_line]))]
    if not header or header[0] != "t":
        raise TraceError(f"row {header_no}: header must start with 't'")
    groups: dict[str, list[int]] = {"x": [], "u": [], "w": []}
    for col, name in enumerate(header[1:], start=1):
        if len(name) < 2 or name[0] not in groups or not name[1:].isdigit():
            raise TraceError(f"row {header_no}: unknown column {name!r}")
        groups[name[0]].append(col)
    if not groups["x"]:
        raise TraceError(f"row {header_no}: no state columns")
    times, xs, us, ws = [], [], [], []
    for lineno, line in body[1:]:
        cells = [c.strip() for c in next(csv.reader([line]))]
        if len(cells) != len(header):
            raise TraceError(f"row {lineno}: expected {len(header)} cells, found {len(cells)}")
        try:
            times.append(float(cells[0]))
            xs.append([float(cells[c]) for c in groups["x"]])
            for key, dest in (("u", us), ("w", ws)):
                vals = [cells[c] for c in groups[key]]
                if vals and all(v == "" for v in vals):
                    dest.append(None)
                else:
                    dest.append([float(v) for v in vals])
        except ValueError as exc:
            raise TraceError(f"row {lineno}: {exc}") from None
    if not xs:
        raise TraceError("trace file has no samples")
    N = len(xs) - 1
    dt = times[1] - times[0] if len(times) > 1 else 1.0
    for k, t in enumerate(times):
        if abs(t - k * dt) > 1e-9 * max(1.0, abs(t)):
            raise TraceError(f"row {body[k + 1][0]}: samples must be uniformly spaced")
    inputs = _collect(us, N, len(groups["u"]), body)
    dist = _collect(ws, N, len(groups["w"]), body)
    return Run(np.array(xs), inputs, dist, dt if dt > 0 else 1.0, loop)


def _collect(rows, N: int, width: int, body) -> np.ndarray:
    present = [r for r in rows if r is not None]
    if width == 0:
        return np.zeros((N, 0))
    for k, r in enumerate(rows[:N]):
        if r is None:
            raise TraceError(f"row {body[k + 1][0]}: missing input/disturbance values")
    if rows[N] is None:
        return np.array(present[:N]).reshape(N, width)
    return np.array(present).reshape(N + 1, width)


def read_trace_csv(path) -> Run:
    return parse_trace_csv(Path(path).read_text())


def load_system(path) -> AffineSystem:
    data = json.loads(Path(path).read_text())
    return AffineSystem.from_dict(data)


def dump_system(path, sys: AffineSystem) -> None:
    Path(path).write_text(json.dumps(sys.to_dict(), indent=2) + "\n")

