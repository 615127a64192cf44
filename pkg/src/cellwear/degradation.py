"""Side reactions and damage models coupled to the single-particle core.

Four mechanisms consume cyclable lithium or active material:

* SEI growth - mixed kinetic/solvent-diffusion limited reduction at the
  negative electrode; always active, faster at high SOC.
* Lithium plating - charging-only side reaction gated by the local plating
  overpotential; the electrolyte's concentration non-uniformity (not
  resolved by a single-particle model) enters as a configurable C-rate
  correction on concentration and local potential.
* Transition-metal dissolution - Tafel-type loss of positive active
  material above the dissolution equilibrium potential.
* Particle cracking - fatigue loss of active material driven by the surface
  hydrostatic stress of the concentration gradient.

All functions are pure; the lifetime engine owns state mutation.
"""

from __future__ import annotations

import math

from .constants import FARADAY, GAS_CONSTANT
from .params import (CrackParameters, DissolutionParameters,
                     ElectrodeParameters, PlatingParameters, SEIParameters)
from .state import CellState


def sei_flux(state: CellState, sei: SEIParameters, phi_s_neg: float,
             v_r_film: float, temperature: float) -> float:
    """SEI reaction current density j_SEI [A/m^2], <= 0.

    The kinetic (Tafel) rate at bulk solvent concentration is throttled by
    quasi-steady solvent diffusion through the existing film; for a rate
    linear in surface solvent concentration, the closed form

        |j| = F * c_EC_bulk * k_eff / (1 + k_eff * delta / D_SEI)

    is the exact self-consistent solution, bounded by both the pure-kinetic
    and the pure-diffusion limits.
    """
    if state.delta_sei <= 0.0:
        raise ValueError("SEI thickness must be positive")
    eta = phi_s_neg - sei.u_sei - v_r_film
    k_eff = sei.k_sei * math.exp(
        -sei.alpha_sei * FARADAY * eta / (GAS_CONSTANT * temperature))
    return -FARADAY * sei.c_ec_bulk * k_eff / (1.0 + k_eff * state.delta_sei / sei.d_sei)


def sei_integrate(state: CellState, j_sei: float, a_s: float, thickness: float,
                  area: float, sei: SEIParameters, dt: float) -> tuple[float, float]:
    """Film growth and lithium loss over dt: (d_delta_sei [m], d_n_li [mol]).

    Two electrons per solvent molecule reduce the thickness increment by a
    factor of two relative to the consumed charge.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    mag = abs(j_sei)
    d_delta = mag * sei.omega_sei * dt / (2.0 * FARADAY)
    d_n_li = mag * a_s * thickness * area * dt / FARADAY
    return d_delta, d_n_li


def plating_flux(state: CellState, pl: PlatingParameters, phi_s_neg: float,
                 v_r_film: float, crate: float, c_e: float,
                 temperature: float) -> float:
    """Plating current density j_pl [A/m^2], <= 0; charging only.

    `crate` is the signed terminal current over nominal capacity [1/h],
    discharge positive. The single-particle model carries no electrolyte
    gradient, so charging raises the effective near-anode electrolyte
    concentration by (1 + gamma_ce*|crate|) and pulls the local plating
    overpotential down by phi_e_shift volts per unit C-rate. Deposition is
    gated on a negative overpotential and never runs at rest or on
    discharge.
    """
    if crate >= 0.0:
        return 0.0
    eta_pl = phi_s_neg - v_r_film + pl.phi_e_shift * crate
    if eta_pl >= 0.0:
        return 0.0
    c_e_eff = c_e * (1.0 + pl.gamma_ce * abs(crate))
    return -FARADAY * pl.k_0_pl * c_e_eff * math.exp(
        -0.5 * FARADAY * eta_pl / (GAS_CONSTANT * temperature))


def plating_integrate(j_pl: float, a_s: float, thickness: float, area: float,
                      pl: PlatingParameters, dt: float) -> tuple[float, float]:
    """(d_delta_pl [m], d_n_li [mol]) for one step; one electron per lithium."""
    mag = abs(j_pl)
    d_delta = mag * pl.omega_pl * dt / FARADAY
    d_n_li = mag * a_s * thickness * area * dt / FARADAY
    return d_delta, d_n_li


def dissolution_rate(phi_s_pos: float, diss: DissolutionParameters,
                     pos: ElectrodeParameters, temperature: float) -> float:
    """Rate of positive active-material ratio loss d(eps)/dt [1/s], <= 0.

    Tafel current i_0_diss * exp(F*eta/(2RT)) above the equilibrium
    potential, converted to volumetric host loss through the electrode
    thickness and maximum concentration. Inactive below e_eq_diss or when
    i_0_diss is zero.
    """
    if diss.i_0_diss == 0.0:
        return 0.0
    eta = phi_s_pos - diss.e_eq_diss
    if eta <= 0.0:
        return 0.0
    j = diss.i_0_diss * math.exp(FARADAY * eta / (2.0 * GAS_CONSTANT * temperature))
    return -j / (FARADAY * pos.thickness * pos.c_s_max)


def surface_hydrostatic_stress(c_s_avg: float, c_ss: float,
                               params: ElectrodeParameters) -> float:
    """Surface hydrostatic stress of a free-standing sphere [Pa].

    sigma = 2*Omega*E/(9*(1-nu)) * (c_avg - c_surface): positive (tensile)
    while delithiating.
    """
    return params.stress_prefactor * (c_s_avg - c_ss)


ENDURANCE_FRACTION = 1e-3   # stresses below this fraction of critical do no damage


def crack_lam_rate(sigma_h_surf: float, crack: CrackParameters,
                   sigma_critical: float, beta: float) -> float:
    """Fatigue rate of active-material ratio loss d(eps)/dt [1/s], <= 0.

    Stress amplitudes below the endurance threshold (0.1% of the critical
    stress) accumulate no damage, so rest periods - where the only stress
    comes from side-reaction self-discharge - stay exactly crack-free.
    """
    if sigma_critical <= 0:
        raise ValueError("critical stress must be positive")
    ratio = abs(sigma_h_surf) / sigma_critical
    if ratio < ENDURANCE_FRACTION or beta == 0.0:
        return 0.0
    return -beta * ratio ** crack.m_crack


def film_resistance(delta_sei: float, delta_pl: float, sei: SEIParameters,
                    pl: PlatingParameters, neg: ElectrodeParameters,
                    area: float, eps_s_neg: float) -> float:
    """Lumped surface-film resistance R_film [Ohm].

    Series ionic resistance of the SEI and plated-lithium layers spread over
    the negative electrode's total particle surface a_s*l*A.
    """
    if delta_sei < 0 or delta_pl < 0:
        raise ValueError("film thicknesses must be non-negative")
    a_s = 3.0 * eps_s_neg / neg.r_p
    return (delta_sei / sei.kappa_sei + delta_pl / pl.kappa_pl) / (
        a_s * neg.thickness * area)


def trapped_lithium_rate(stoich: float, d_eps_dt: float,
                         params: ElectrodeParameters, area: float) -> float:
    """Lithium trapped by active-material loss, d(n)/dt [mol/s], >= 0.

    Destroyed host volume carries away the lithium it held at the moment of
    failure: rate = stoich * |d(eps)/dt| * l * A * c_s_max.
    """
    return stoich * abs(d_eps_dt) * params.thickness * area * params.c_s_max
