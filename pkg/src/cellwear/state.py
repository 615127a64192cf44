"""Evolving cell state: concentration profiles, films, active material, ledger."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .constants import FARADAY
from .params import CellParameters, ElectrodeParameters

N_SHELLS = 20

LEDGER_KEYS = ("sei", "plating", "dissolution", "cracking")


@dataclass
class ElectrodeState:
    c_s: np.ndarray         # shell concentrations [mol/m^3], centre -> surface
    eps_s: float            # current active-material volume ratio
    c_ss: float             # surface concentration estimate [mol/m^3]

    def copy(self) -> "ElectrodeState":
        return ElectrodeState(self.c_s.copy(), self.eps_s, self.c_ss)

    @property
    def c_s_avg(self) -> float:
        # shells are uniform in r^3, so every shell holds equal volume
        return float(self.c_s.mean())


@dataclass
class CellState:
    neg: ElectrodeState
    pos: ElectrodeState
    delta_sei: float        # SEI film thickness [m]
    delta_pl: float         # plated-lithium film thickness [m]
    eps_diss_loss: float = 0.0       # cumulative positive eps lost to dissolution
    eps_crack_loss_neg: float = 0.0  # cumulative eps lost to cracking
    eps_crack_loss_pos: float = 0.0
    lli_ledger: dict = field(default_factory=lambda: dict.fromkeys(LEDGER_KEYS, 0.0))

    def copy(self) -> "CellState":
        return CellState(
            neg=self.neg.copy(), pos=self.pos.copy(),
            delta_sei=self.delta_sei, delta_pl=self.delta_pl,
            eps_diss_loss=self.eps_diss_loss,
            eps_crack_loss_neg=self.eps_crack_loss_neg,
            eps_crack_loss_pos=self.eps_crack_loss_pos,
            lli_ledger=dict(self.lli_ledger),
        )


def electrode_lithium(elec: ElectrodeState, params: ElectrodeParameters,
                      area: float) -> float:
    """Cyclable lithium held in one electrode [mol]."""
    return area * params.thickness * elec.eps_s * elec.c_s_avg


def cyclable_lithium(state: CellState, cell: CellParameters) -> float:
    """n_Li: total cyclable lithium in both particles [mol]."""
    return (electrode_lithium(state.neg, cell.neg, cell.area)
            + electrode_lithium(state.pos, cell.pos, cell.area))


def electrode_capacity_ah(elec: ElectrodeState, params: ElectrodeParameters,
                          area: float) -> float:
    """Full electrode capacity [Ah] at the current active-material ratio."""
    return area * params.thickness * elec.eps_s * params.c_s_max * FARADAY / 3600.0


def esoh(state: CellState, cell: CellParameters) -> tuple[float, float, float]:
    """(C_p [Ah], C_n [Ah], n_Li [Ah-equivalent]) for the current state."""
    c_n = electrode_capacity_ah(state.neg, cell.neg, cell.area)
    c_p = electrode_capacity_ah(state.pos, cell.pos, cell.area)
    n_li_ah = cyclable_lithium(state, cell) * FARADAY / 3600.0
    return c_p, c_n, n_li_ah


def uniform_electrode(params: ElectrodeParameters, stoich: float,
                      eps_s: float | None = None) -> ElectrodeState:
    c = stoich * params.c_s_max
    return ElectrodeState(
        c_s=np.full(N_SHELLS, c, dtype=float),
        eps_s=params.eps_s0 if eps_s is None else eps_s,
        c_ss=c,
    )


def initial_state(cell: CellParameters, soc: float = 1.0) -> CellState:
    """Fresh cell rested at the given SOC, uniform concentration profiles."""
    x0, x100 = cell.neg.stoich_window
    y0, y100 = cell.pos.stoich_window
    x = x0 + soc * (x100 - x0)
    y = y0 - soc * (y0 - y100)
    return CellState(
        neg=uniform_electrode(cell.neg, x),
        pos=uniform_electrode(cell.pos, y),
        delta_sei=cell.sei.delta_sei0,
        delta_pl=0.0,
    )


def ledger_total(state: CellState) -> float:
    return sum(state.lli_ledger.values())


__all__ = [
    "N_SHELLS", "LEDGER_KEYS", "ElectrodeState", "CellState",
    "electrode_lithium", "cyclable_lithium", "electrode_capacity_ah", "esoh",
    "uniform_electrode", "initial_state", "ledger_total", "replace",
]
