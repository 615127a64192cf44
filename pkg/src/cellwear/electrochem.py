"""Single-particle electrochemistry: radial diffusion, kinetics, voltage.

Sign conventions used throughout the package:
  * terminal current I > 0 discharges the cell;
  * per-electrode intercalation current density j_int > 0 is anodic
    (lithium leaves the particle), so discharge gives j_int > 0 at the
    negative electrode and j_int < 0 at the positive one;
  * surface molar flux = j_int / F, positive out of the particle.
"""

from __future__ import annotations

import math

import numpy as np

from .constants import FARADAY, GAS_CONSTANT
from .errors import KineticStarvationError, SaturationError
from .esoh import StoichWindow, soc_from_stoich, solve_window
from .params import CellParameters, ElectrodeParameters
from .state import N_SHELLS, CellState, ElectrodeState, esoh


class RadialDiffusion:
    """Finite-volume solver for spherical solid diffusion.

    Shells are uniform in r^3 (equal volumes), which makes the scheme
    mass-conservative by construction; time stepping is implicit Euler with
    the imposed surface flux entering the right-hand side. The step matrix
    for each dt is inverted once and cached, so a step is a single 20x20
    matrix-vector product.
    """

    def __init__(self, params: ElectrodeParameters, n: int = N_SHELLS):
        self.n = n
        self.r_p = params.r_p
        self.d_s = params.d_s
        r = params.r_p * (np.arange(n + 1) / n) ** (1.0 / 3.0)  # face radii
        centers = ((r[:-1] ** 3 + r[1:] ** 3) / 2.0) ** (1.0 / 3.0)
        vol = 4.0 * np.pi / 3.0 * (r[1:] ** 3 - r[:-1] ** 3)
        area = 4.0 * np.pi * r**2
        self.surface_area = float(area[-1])
        self.volumes = vol
        self.total_volume = float(vol.sum())
        # conductances across interior faces: D * A_face / dr between centres
        g = self.d_s * area[1:-1] / np.diff(centers)
        lap = np.zeros((n, n))
        for i in range(n - 1):
            lap[i, i] -= g[i] / vol[i]
            lap[i, i + 1] += g[i] / vol[i]
            lap[i + 1, i + 1] -= g[i] / vol[i + 1]
            lap[i + 1, i] += g[i] / vol[i + 1]
        self._lap = lap
        # distance from outermost centre to the surface, for c_ss extrapolation
        self._dr_surf = float(params.r_p - centers[-1])
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def _step_ops(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        ops = self._cache.get(dt)
        if ops is None:
            m_inv = np.linalg.inv(np.eye(self.n) - dt * self._lap)
            # response of the profile to a unit outward surface flux [mol/m^2/s]
            src = np.zeros(self.n)
            src[-1] = -self.surface_area / self.volumes[-1]
            flux_vec = dt * (m_inv @ src)
            ops = (np.ascontiguousarray(m_inv), flux_vec)
            self._cache[dt] = ops
        return ops

    def step(self, c: np.ndarray, surface_flux: float, dt: float) -> np.ndarray:
        """Advance by dt with the given outward molar surface flux."""
        m_inv, flux_vec = self._step_ops(dt)
        return m_inv @ c + surface_flux * flux_vec

    def surface_concentration(self, c: np.ndarray, surface_flux: float) -> float:
        """Linear extrapolation of the outermost shell to the surface."""
        return float(c[-1]) - surface_flux * self._dr_surf / self.d_s


_SOLVERS: dict[int, RadialDiffusion] = {}


def solver_for(params: ElectrodeParameters) -> RadialDiffusion:
    key = id(params)
    solver = _SOLVERS.get(key)
    if solver is None or solver.d_s != params.d_s or solver.r_p != params.r_p:
        solver = RadialDiffusion(params)
        _SOLVERS[key] = solver
    return solver


def _check_bounds(c: np.ndarray, c_max: float, electrode: str):
    lo = float(c.min())
    hi = float(c.max())
    if lo < -1e-9 * c_max:
        raise SaturationError(electrode, "depletion", lo)
    if hi > c_max * (1.0 + 1e-12) + 1e-9:
        raise SaturationError(electrode, "overfill", hi)


def diffusion_step(elec: ElectrodeState, params: ElectrodeParameters,
                   surface_flux: float, dt: float,
                   electrode: str = "negative") -> ElectrodeState:
    """Advance one electrode's concentration profile by dt.

    Parameters
    ----------
    surface_flux : float
        Outward molar flux at the particle surface [mol m^-2 s^-1];
        positive extracts lithium.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not math.isfinite(surface_flux):
        raise ValueError("surface flux must be finite")
    solver = solver_for(params)
    c_new = solver.step(elec.c_s, surface_flux, dt)
    _check_bounds(c_new, params.c_s_max, electrode)
    return ElectrodeState(
        c_s=c_new,
        eps_s=elec.eps_s,
        c_ss=solver.surface_concentration(c_new, surface_flux),
    )


def exchange_current(c_ss: float, c_e: float, params: ElectrodeParameters) -> float:
    """Intercalation exchange current density i_0 [A/m^2].

    i_0 = k_0 * F * c_e^alpha * c_ss^alpha * (c_s_max - c_ss)^(1-alpha);
    zero at either stoichiometry boundary by construction.
    """
    c_ss = min(max(c_ss, 0.0), params.c_s_max)
    a = params.alpha
    return (params.k_0 * FARADAY * c_e**a * c_ss**a
            * (params.c_s_max - c_ss) ** (1.0 - a))


def overpotential(j_int: float, i_0: float, temperature: float) -> float:
    """Inverse symmetric Butler-Volmer: eta = (2RT/F) asinh(j/(2 i_0))."""
    if i_0 <= 0.0:
        if j_int == 0.0:
            return 0.0
        raise KineticStarvationError(
            f"current density {j_int:.3g} A/m^2 demanded at zero exchange current")
    return (2.0 * GAS_CONSTANT * temperature / FARADAY) * math.asinh(j_int / (2.0 * i_0))


def film_drop(state: CellState, cell: CellParameters, current: float) -> float:
    """Voltage across the surface films at the given terminal current [V]."""
    from .degradation import film_resistance  # local import avoids a cycle
    return current * film_resistance(state.delta_sei, state.delta_pl,
                                     cell.sei, cell.plating,
                                     cell.neg, cell.area, state.neg.eps_s)


def electrode_current_density(cell: CellParameters, params: ElectrodeParameters,
                              eps_s: float, current: float) -> float:
    """Total current density referred to particle surface area, j = I/(a_s*l*A)."""
    a_s = 3.0 * eps_s / params.r_p
    return current / (a_s * params.thickness * cell.area)


def terminal_voltage(state: CellState, cell: CellParameters, current: float) -> float:
    """Cell voltage V = (U+ + eta+) - (U- + eta-) - I*(R_ohmic + R_film)."""
    j_neg = electrode_current_density(cell, cell.neg, state.neg.eps_s, current)
    j_pos = -electrode_current_density(cell, cell.pos, state.pos.eps_s, current)
    i0_neg = exchange_current(state.neg.c_ss, cell.c_e, cell.neg)
    i0_pos = exchange_current(state.pos.c_ss, cell.c_e, cell.pos)
    eta_neg = overpotential(j_neg, i0_neg, cell.temperature)
    eta_pos = overpotential(j_pos, i0_pos, cell.temperature)
    u_neg = cell.neg.ocp.at(state.neg.c_ss / cell.neg.c_s_max)
    u_pos = cell.pos.ocp.at(state.pos.c_ss / cell.pos.c_s_max)
    v_r = current * cell.r_ohmic0 + film_drop(state, cell, current)
    return (u_pos + eta_pos) - (u_neg + eta_neg) - v_r


def current_window(state: CellState, cell: CellParameters) -> StoichWindow:
    """Stoichiometry window consistent with the state's aged eSOH triple."""
    c_p, c_n, n_li_ah = esoh(state, cell)
    return solve_window(c_n, c_p, n_li_ah, cell)


def soc(state: CellState, cell: CellParameters,
        window: StoichWindow | None = None) -> float:
    """State of charge from the average negative stoichiometry.

    Fresh cells use the configured beginning-of-life window; aged cells
    should pass the window recomputed from their current eSOH so the SOC
    scale follows the widened operating range.
    """
    if window is None:
        window = current_window(state, cell)
    return soc_from_stoich(state.neg.c_s_avg / cell.neg.c_s_max, window)
