"""Algebraic electrode-balance solver.

Given the current electrode capacities and the cyclable-lithium inventory,
find the stoichiometry operating window pinned by the cell's voltage limits.
At any rest point the lithium splits as x*C_n + y*C_p = n_Li (Ah units), so
each voltage limit defines one equation U_p(y) - U_n(x) = V_lim along that
balance line. Usable capacity is then C_n * (x100 - x0).
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import CapacityCollapseError
from .params import CellParameters

_EPS_FLOOR = 1e-4  # active-material ratio below this is a degenerate electrode


@dataclass(frozen=True)
class StoichWindow:
    x0: float
    x100: float
    y0: float
    y100: float

    @property
    def dx(self) -> float:
        return self.x100 - self.x0


def _solve_limit(c_n, c_p, n_li_ah, cell: CellParameters, v_target) -> float:
    """x such that U_p(y(x)) - U_n(x) = v_target on the balance line, clamped."""
    u_n = cell.neg.ocp
    u_p = cell.pos.ocp

    # feasible x range keeps both stoichiometries inside [0, 1]
    x_lo = max(0.0, (n_li_ah - c_p) / c_n)
    x_hi = min(1.0, n_li_ah / c_n)
    if x_hi <= x_lo:
        raise CapacityCollapseError(
            f"{cell.name}: no feasible stoichiometry balance "
            f"(C_n={c_n:.3f} Ah, C_p={c_p:.3f} Ah, n_Li={n_li_ah:.3f} Ah)")

    def g(x):
        y = (n_li_ah - x * c_n) / c_p
        return float(u_p(y) - u_n(x)) - v_target

    # g is strictly increasing in x (U_p rises as y falls, U_n falls as x rises)
    if g(x_lo) >= 0.0:
        return x_lo
    if g(x_hi) <= 0.0:
        return x_hi
    return brentq(g, x_lo, x_hi, xtol=1e-12, rtol=1e-14)


def solve_window(c_n: float, c_p: float, n_li_ah: float,
                 cell: CellParameters) -> StoichWindow:
    """Stoichiometry window for the given electrode-specific state of health.

    Parameters are the full electrode capacities [Ah] and the cyclable
    lithium expressed in Ah (n_Li * F / 3600). Window endpoints clamp to the
    feasible balance range when an electrode rather than a voltage limit
    binds.
    """
    if c_n <= _EPS_FLOOR or c_p <= _EPS_FLOOR:
        raise CapacityCollapseError(f"{cell.name}: electrode capacity collapsed")
    if n_li_ah <= 0.0:
        raise CapacityCollapseError(f"{cell.name}: cyclable lithium exhausted")
    x100 = _solve_limit(c_n, c_p, n_li_ah, cell, cell.v_max)
    x0 = _solve_limit(c_n, c_p, n_li_ah, cell, cell.v_min)
    y100 = (n_li_ah - x100 * c_n) / c_p
    y0 = (n_li_ah - x0 * c_n) / c_p
    return StoichWindow(x0=x0, x100=x100, y0=y0, y100=y100)


def usable_capacity(c_n: float, c_p: float, n_li_ah: float,
                    cell: CellParameters) -> tuple[float, StoichWindow]:
    """Usable capacity [Ah] between the voltage limits, plus the window."""
    win = solve_window(c_n, c_p, n_li_ah, cell)
    return c_n * win.dx, win


def soc_from_stoich(x_avg: float, window: StoichWindow) -> float:
    """Map average negative stoichiometry through the window; clamped [0, 1.02]."""
    soc = (x_avg - window.x0) / (window.x100 - window.x0)
    if soc < 0.0:
        return 0.0
    return min(soc, 1.02)
