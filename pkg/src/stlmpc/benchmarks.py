"""Fixed benchmark instances shared by the scripts, the CLI examples and the tests.

* ``phi1`` .. ``phi4``: four specifications over a 3-dimensional dynamics-free
  system sampled every 0.025 s (horizon 30 samples in the experiments).
* ``hvac_toy``: a one-room thermal integrator heated by a bounded input, with
  outdoor temperature and occupancy as known disturbance channels, and the
  comfort rule "whenever the room is occupied it is warmer than ``T_comf``".
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formula import And, Eventually, Formula, Globally, Interval, Not, Or, Predicate, to_text
from .trace import AffineSystem, TrivialSystem

DT = 0.025
N = 30


def _gt(var: str, c: float) -> Predicate:
    return Predicate.gt(var, c)


def _lt(var: str, c: float) -> Predicate:
    return Predicate.lt(var, c)


def reference_formulas() -> dict[str, Formula]:
    """The four open-loop benchmark specifications (intervals in seconds)."""
    g = Interval(0.0, 0.1)
    return {
        "phi1": Globally(g, _gt("x1", 0.1)),
        "phi2": And(Globally(g, _gt("x1", 0.1)), Globally(g, _lt("x2", -0.5))),
        "phi3": Globally(Interval(0.0, 0.5), Eventually(g, _gt("x1", 0.1))),
        "phi4": Eventually(Interval(0.0, 0.2), And(
            _gt("x1", 0.1),
            And(Eventually(g, _gt("x2", 0.1)), Eventually(g, _gt("x3", 0.1))),
        )),
    }


def reference_texts() -> dict[str, str]:
    return {name: to_text(phi) for name, phi in reference_formulas().items()}


def reference_system() -> TrivialSystem:
    return TrivialSystem(3, DT)


@dataclass(frozen=True)
class HvacToy:
    system: AffineSystem
    x0: np.ndarray
    disturbances: np.ndarray     # (steps, 2): outdoor temperature, occupancy flag
    phi_mpc: Formula
    H: int
    comfort: float

    @property
    def occupied(self) -> np.ndarray:
        return self.disturbances[:, 1] > 0.5


def hvac_toy(steps: int = 40, H: int = 4, comfort: float = 20.0) -> HvacToy:
    """Room temperature ``T[k+1] = 0.8 T + u + 0.2 T_out`` with ``u in [0, 4]``.

    Occupancy is 1 on samples 6..13 of every 20; outdoor temperature swings
    around 10 degrees.  Starting from 15 degrees the heater can lift the room
    above the comfort level in at most 4 steps, so a look-ahead of ``H = 4``
    samples is enough to pre-heat before each occupied block.
    """
    sys = AffineSystem(
        A=[[0.8]], B=[[1.0]], E=[[0.2, 0.0]], c=[0.0],
        x_bounds=[(0.0, 40.0)], u_bounds=[(0.0, 4.0)], dt=1.0,
    )
    k = np.arange(steps + 2 * H + 1)
    outdoor = 10.0 + 2.0 * np.sin(2 * np.pi * k / 24.0)
    occupancy = ((k % 20 >= 6) & (k % 20 < 14)).astype(float)
    comfort_rule = Or(Not(_gt("w2", 0.5)), _gt("x1", comfort))
    phi_mpc = Globally(Interval(0.0, float(H)), comfort_rule)
    return HvacToy(sys, np.array([15.0]), np.column_stack([outdoor, occupancy]), phi_mpc, H, comfort)
