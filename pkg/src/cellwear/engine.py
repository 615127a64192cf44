"""Intra-day coupled simulation and day-after-day aging loop.

One representative cycle is one day. ``simulate_day`` integrates the
single-particle core with all four degradation mechanisms across a duty
schedule; ``run_lifetime`` repeats it day after day, optionally jumping
ahead by linear extrapolation of the slow states (film thicknesses, active
material ratios, lithium ledger) between simulated anchor days, until the
cell reaches its end-of-life capacity fraction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import FARADAY, GAS_CONSTANT, SECONDS_PER_DAY
from .degradation import ENDURANCE_FRACTION
from .duty import (ChargeCC, ChargeCV, Drive, DutySchedule, Rest,
                   V2GDischargeCC)
from .electrochem import solver_for
from .errors import (CapacityCollapseError, CellwearError, SaturationError,
                     SimulationError)
from .esoh import StoichWindow, solve_window, usable_capacity
from .params import CellParameters
from .state import LEDGER_KEYS, CellState, ElectrodeState, esoh, initial_state

ALL_MECHANISMS = frozenset({"sei", "plating", "dissolution", "cracking"})
DT_DRIVE = 1.0
DT_SLOW = 10.0
CV_CUTOFF_CRATE = 0.02          # C/50 taper cutoff
DAY_CAP = 3000
DEFAULT_JUMP_TOL = 0.01         # capacity change allowed per jump [frac of C_nom]
JUMP_CLAMP = 20
EPS_FLOOR = 1e-3


@dataclass
class DayLog:
    day_index: int
    ah_throughput: float
    wh_throughput: float
    lli_increments: dict            # per-mechanism lithium loss this day [mol]
    ledger_cum: dict                # cumulative per-mechanism ledger at day end [mol]
    c_p: float                      # end-of-day electrode capacity [Ah]
    c_n: float
    lli: float                      # end-of-day LLI fraction of BOL inventory
    capacity_ah: float              # end-of-day usable capacity
    soc_min: float
    soc_max: float
    soc_mean: float
    window_events: int = 0
    deltas: dict = field(default_factory=dict)  # per-day slow-state deltas

    def __post_init__(self):
        if self.ah_throughput < 0 or any(v < -1e-15 for v in self.lli_increments.values()):
            raise SimulationError("negative throughput or ledger increment")


@dataclass
class Slopes:
    """Per-day rates of the slow states, used for inter-cycle extrapolation."""
    cell: CellParameters
    d_delta_sei: float
    d_delta_pl: float
    d_eps_crack_neg: float
    d_eps_crack_pos: float
    d_eps_diss: float
    d_ledger: dict
    reset_soc: float


@dataclass
class LifetimeResult:
    cell_name: str
    c_nom: float
    scenario: str
    drive_variant: str
    mode: str
    eol_frac: float
    logs: list
    day_throughput: list            # cumulative Ah at each logged day
    day_throughput_wh: list
    eol_day: float | None
    eol_throughput_ah: float | None
    eol_throughput_wh: float | None
    censored: bool
    termination: str
    n_li_bol: float                 # [mol]
    ledger_final: dict              # [mol]
    esoh_final: tuple               # (C_p, C_n, n_li_ah)
    simulated_days: int

    @property
    def days(self) -> list[int]:
        return [log.day_index for log in self.logs]

    def capacity_at(self, day: float) -> float:
        """Usable capacity linearly interpolated between logged days."""
        days = np.array(self.days, dtype=float)
        caps = np.array([log.capacity_ah for log in self.logs])
        return float(np.interp(day, days, caps))


class ExtrapolationError(CellwearError):
    """A jump would violate a state invariant; the caller should halve it."""


# --------------------------------------------------------------------------
# intra-day integrator
# --------------------------------------------------------------------------

class _DayRunner:
    """Compiled per-cell integrator; holds every constant the loop needs."""

    def __init__(self, cell: CellParameters, mechanisms: frozenset):
        self.cell = cell
        self.mech = mechanisms
        self.neg_solver = solver_for(cell.neg)
        self.pos_solver = solver_for(cell.pos)
        t = cell.temperature
        self.kT2 = 2.0 * GAS_CONSTANT * t / FARADAY
        self.sei_exp = cell.sei.alpha_sei * FARADAY / (GAS_CONSTANT * t)
        self.pl_exp = 0.5 * FARADAY / (GAS_CONSTANT * t)
        self.diss_exp = FARADAY / (2.0 * GAS_CONSTANT * t)
        self.u_n = cell.neg.ocp
        self.u_p = cell.pos.ocp

    def run(self, state: CellState, schedule: DutySchedule,
            window: StoichWindow, day_index: int) -> tuple[CellState, DayLog]:
        cell = self.cell
        mech = self.mech
        sei_on = "sei" in mech
        pl_on = "plating" in mech
        diss_on = "dissolution" in mech and cell.dissolution.i_0_diss > 0.0
        crack_on = "cracking" in mech

        neg, pos = cell.neg, cell.pos
        area = cell.area
        c_nom = cell.c_nom
        c_max_n, c_max_p = neg.c_s_max, pos.c_s_max
        inv_cmax_n, inv_cmax_p = 1.0 / c_max_n, 1.0 / c_max_p
        l_n, l_p = neg.thickness, pos.thickness
        r_ohm = cell.r_ohmic0
        c_e = cell.c_e
        t_k = cell.temperature
        kT2 = self.kT2
        u_n_at, u_p_at = self.u_n.at, self.u_p.at
        asinh = math.asinh
        exp = math.exp

        # kinetics prefactors: i0 = pref * sqrt(c_ss*(c_max-c_ss))
        i0_pref_n = neg.k_0 * FARADAY * math.sqrt(c_e)
        i0_pref_p = pos.k_0 * FARADAY * math.sqrt(c_e)

        sei = cell.sei
        pl = cell.plating
        diss = cell.dissolution
        crack = cell.crack
        k_sei = sei.k_sei
        d_sei_coef = sei.omega_sei / (2.0 * FARADAY)
        pl_pref = FARADAY * pl.k_0_pl
        pl_delta_coef = pl.omega_pl / FARADAY
        sigma_pref_n = neg.stress_prefactor
        sigma_pref_p = pos.stress_prefactor
        inv_sigc_n = 1.0 / neg.sigma_critical
        inv_sigc_p = 1.0 / pos.sigma_critical
        m_ck = crack.m_crack
        beta_n, beta_p = crack.beta_neg, crack.beta_pos
        diss_rate_pref = diss.i_0_diss / (FARADAY * l_p * c_max_p)

        neg_sv, pos_sv = self.neg_solver, self.pos_solver
        surf_per_vol_n = neg_sv.surface_area / neg_sv.total_volume
        surf_per_vol_p = pos_sv.surface_area / pos_sv.total_volume
        dr_d_n = neg_sv._dr_surf / neg.d_s
        dr_d_p = pos_sv._dr_surf / pos.d_s

        # mutable state
        c_n_arr = state.neg.c_s.copy()
        c_p_arr = state.pos.c_s.copy()
        eps_n = state.neg.eps_s
        eps_p = state.pos.eps_s
        delta_sei = state.delta_sei
        delta_pl = state.delta_pl
        eps_diss_loss = state.eps_diss_loss
        eps_ck_n = state.eps_crack_loss_neg
        eps_ck_p = state.eps_crack_loss_pos
        led_sei = state.lli_ledger["sei"]
        led_pl = state.lli_ledger["plating"]
        led_diss = state.lli_ledger["dissolution"]
        led_ck = state.lli_ledger["cracking"]
        start_led = (led_sei, led_pl, led_diss, led_ck)
        start_slow = (delta_sei, delta_pl, eps_ck_n, eps_ck_p, eps_diss_loss)

        c_avg_n = float(c_n_arr.mean())
        c_avg_p = float(c_p_arr.mean())

        x0w = window.x0
        inv_dxw = 1.0 / (window.x100 - window.x0)

        ah = 0.0
        wh = 0.0
        soc_min = math.inf
        soc_max = -math.inf
        soc_time = 0.0
        window_events = 0
        v_min_lim = cell.v_min - 0.25   # generous alarm band around the window

        # per-segment step plans: (mode, payload)
        for seg_idx, seg in enumerate(schedule.segments):
            kind = seg.kind
            discharge_floor = False
            done_discharging = False
            if isinstance(kind, Drive):
                dts, rates = kind.profile.step_arrays(DT_DRIVE)
                currents = rates * c_nom
                plan = list(zip(dts.tolist(), currents.tolist()))
                charge_mode = False
                cv_mode = False
            elif isinstance(kind, Rest):
                plan = _const_plan(seg.duration, DT_SLOW, 0.0)
                charge_mode = False
                cv_mode = False
            elif isinstance(kind, V2GDischargeCC):
                plan = _const_plan(seg.duration, DT_SLOW, kind.c_rate * c_nom)
                charge_mode = False
                cv_mode = False
                discharge_floor = True
            elif isinstance(kind, ChargeCC):
                plan = _const_plan(seg.duration, DT_SLOW, -kind.c_rate * c_nom)
                charge_mode = True
                cv_mode = False
                charge_target = kind.target_soc
                v_guard = kind.v_max
                done_charging = False
            elif isinstance(kind, ChargeCV):
                plan = _const_plan(seg.duration, DT_SLOW, 0.0)
                charge_mode = False
                cv_mode = True
                v_guard = kind.v_max
                cv_cutoff = kind.cutoff_c_rate * c_nom
                done_charging = False
            else:
                raise SimulationError(f"unknown segment kind {kind!r}",
                                      segment=seg_idx, time_s=seg.start)

            t_in_seg = 0.0
            for dt, current in plan:
                t_in_seg += dt
                # geometry factors move with the active material ratio
                denom_n = 3.0 * eps_n / neg.r_p * l_n * area
                denom_p = 3.0 * eps_p / pos.r_p * l_p * area

                soc = (c_avg_n * inv_cmax_n - x0w) * inv_dxw
                if charge_mode:
                    if done_charging or soc >= charge_target:
                        done_charging = True
                        current = 0.0

                j_tot_n = current / denom_n
                j_tot_p = -current / denom_p

                # surface concentrations from the imposed flux (side terms are
                # orders of magnitude smaller and ignored here)
                c_ss_n = c_n_arr[19] - (j_tot_n / FARADAY) * dr_d_n
                c_ss_p = c_p_arr[19] - (j_tot_p / FARADAY) * dr_d_p
                if c_ss_n < 1.0:
                    c_ss_n = 1.0
                elif c_ss_n > c_max_n - 1.0:
                    c_ss_n = c_max_n - 1.0
                if c_ss_p < 1.0:
                    c_ss_p = 1.0
                elif c_ss_p > c_max_p - 1.0:
                    c_ss_p = c_max_p - 1.0

                i0_n = i0_pref_n * math.sqrt(c_ss_n * (c_max_n - c_ss_n))
                i0_p = i0_pref_p * math.sqrt(c_ss_p * (c_max_p - c_ss_p))

                r_film = (delta_sei / sei.kappa_sei + delta_pl / pl.kappa_pl) / denom_n

                if cv_mode or (charge_mode and current != 0.0):
                    # voltage guard: taper the charging current against v_max
                    if cv_mode and not done_charging:
                        current = -c_nom  # upper bound for the bisection
                    for _ in range(60):
                        eta_n = kT2 * asinh(current / denom_n / (2.0 * i0_n))
                        eta_p = kT2 * asinh(-current / denom_p / (2.0 * i0_p))
                        v = (u_p_at(c_ss_p * inv_cmax_p) + eta_p) \
                            - (u_n_at(c_ss_n * inv_cmax_n) + eta_n) \
                            - current * (r_ohm + r_film)
                        if v <= v_guard or current == 0.0:
                            break
                        current *= 0.6
                        if -current < CV_CUTOFF_CRATE * c_nom:
                            current = 0.0
                            if charge_mode:
                                done_charging = True
                    if cv_mode and -current <= cv_cutoff:
                        done_charging = True
                        current = 0.0
                    j_tot_n = current / denom_n
                    j_tot_p = -current / denom_p

                if discharge_floor and done_discharging:
                    current = 0.0
                    j_tot_n = 0.0
                    j_tot_p = 0.0
                eta_n = kT2 * asinh(j_tot_n / (2.0 * i0_n))
                eta_p = kT2 * asinh(j_tot_p / (2.0 * i0_p))
                phi_n = u_n_at(c_ss_n * inv_cmax_n) + eta_n
                phi_p = u_p_at(c_ss_p * inv_cmax_p) + eta_p
                if (discharge_floor and not done_discharging and current > 0.0
                        and (phi_p - phi_n) - current * (r_ohm + r_film) < cell.v_min):
                    done_discharging = True
                    window_events += 1
                    current = 0.0
                    j_tot_n = 0.0
                    j_tot_p = 0.0
                    eta_n = 0.0
                    eta_p = 0.0
                    phi_n = u_n_at(c_ss_n * inv_cmax_n)
                    phi_p = u_p_at(c_ss_p * inv_cmax_p)
                v_r_film = current * r_film

                # --- side reactions (explicit, from start-of-step state)
                j_sei = 0.0
                if sei_on:
                    k_eff = k_sei * exp(-self.sei_exp * (phi_n - sei.u_sei - v_r_film))
                    j_sei = -FARADAY * sei.c_ec_bulk * k_eff / (
                        1.0 + k_eff * delta_sei / sei.d_sei)
                j_pl = 0.0
                if pl_on and current < 0.0:
                    crate = current / c_nom
                    eta_pl = phi_n - v_r_film + pl.phi_e_shift * crate
                    if eta_pl < 0.0:
                        c_e_eff = c_e * (1.0 + pl.gamma_ce * (-crate))
                        j_pl = -pl_pref * c_e_eff * exp(-self.pl_exp * eta_pl)

                j_int_n = j_tot_n - j_sei - j_pl
                flux_n = j_int_n / FARADAY
                flux_p = j_tot_p / FARADAY

                # --- diffusion (implicit), averages tracked in closed form
                m_inv_n, fvec_n = neg_sv._step_ops(dt)
                m_inv_p, fvec_p = pos_sv._step_ops(dt)
                c_n_arr = m_inv_n @ c_n_arr
                if flux_n != 0.0:
                    c_n_arr += flux_n * fvec_n
                c_p_arr = m_inv_p @ c_p_arr
                if flux_p != 0.0:
                    c_p_arr += flux_p * fvec_p
                c_avg_n -= flux_n * surf_per_vol_n * dt
                c_avg_p -= flux_p * surf_per_vol_p * dt

                surf_n = c_n_arr[19]
                surf_p = c_p_arr[19]
                if not (0.0 <= surf_n <= c_max_n) or not (0.0 <= surf_p <= c_max_p):
                    elec = "negative" if not (0.0 <= surf_n <= c_max_n) else "positive"
                    val = surf_n if elec == "negative" else surf_p
                    raise SimulationError(
                        str(SaturationError(elec, "overfill" if val > 0 else "depletion",
                                            float(val))),
                        segment=seg_idx, time_s=seg.start + t_in_seg)

                # --- mechanism integration
                if j_sei != 0.0:
                    mag = -j_sei
                    delta_sei += mag * d_sei_coef * dt
                    led_sei += mag * denom_n * dt / FARADAY
                if j_pl != 0.0:
                    mag = -j_pl
                    delta_pl += mag * pl_delta_coef * dt
                    led_pl += mag * denom_n * dt / FARADAY
                if diss_on:
                    eta_d = phi_p - diss.e_eq_diss
                    if eta_d > 0.0:
                        rate = diss_rate_pref * exp(self.diss_exp * eta_d)
                        d_eps = rate * dt
                        if d_eps > 0.0:
                            y_avg = c_avg_p * inv_cmax_p
                            led_diss += y_avg * d_eps * l_p * area * c_max_p
                            eps_p -= d_eps
                            eps_diss_loss += d_eps
                if crack_on:
                    ratio_n = abs(sigma_pref_n * (c_avg_n - c_ss_n)) * inv_sigc_n
                    if ratio_n >= ENDURANCE_FRACTION and beta_n > 0.0:
                        d_eps = beta_n * ratio_n ** m_ck * dt
                        led_ck += (c_avg_n * inv_cmax_n) * d_eps * l_n * area * c_max_n
                        eps_n -= d_eps
                        eps_ck_n += d_eps
                    ratio_p = abs(sigma_pref_p * (c_avg_p - c_ss_p)) * inv_sigc_p
                    if ratio_p >= ENDURANCE_FRACTION and beta_p > 0.0:
                        d_eps = beta_p * ratio_p ** m_ck * dt
                        led_ck += (c_avg_p * inv_cmax_p) * d_eps * l_p * area * c_max_p
                        eps_p -= d_eps
                        eps_ck_p += d_eps

                if eps_n < EPS_FLOOR or eps_p < EPS_FLOOR:
                    raise CapacityCollapseError(
                        f"{cell.name}: active material ratio collapsed on day {day_index}")

                # --- bookkeeping
                if current != 0.0:
                    v = (phi_p - phi_n) - current * (r_ohm + r_film)
                    a_step = abs(current) * dt
                    ah += a_step
                    wh += a_step * abs(v)
                    if v < v_min_lim or v > cell.v_max + 0.25:
                        window_events += 1
                soc = (c_avg_n * inv_cmax_n - x0w) * inv_dxw
                if soc < soc_min:
                    soc_min = soc
                if soc > soc_max:
                    soc_max = soc
                soc_time += soc * dt

            # resync the tracked averages at segment boundaries
            c_avg_n = float(c_n_arr.mean())
            c_avg_p = float(c_p_arr.mean())

        # pack results
        end_state = CellState(
            neg=ElectrodeState(c_n_arr, eps_n, float(c_n_arr[19])),
            pos=ElectrodeState(c_p_arr, eps_p, float(c_p_arr[19])),
            delta_sei=delta_sei, delta_pl=delta_pl,
            eps_diss_loss=eps_diss_loss,
            eps_crack_loss_neg=eps_ck_n, eps_crack_loss_pos=eps_ck_p,
            lli_ledger={"sei": led_sei, "plating": led_pl,
                        "dissolution": led_diss, "cracking": led_ck},
        )
        c_p_cap, c_n_cap, n_li_ah = esoh(end_state, cell)
        cap, _ = usable_capacity(c_n_cap, c_p_cap, n_li_ah, cell)
        n_li_bol = cell.n_li_bol
        lli = (n_li_bol - n_li_ah * 3600.0 / FARADAY) / n_li_bol
        incs = {"sei": led_sei - start_led[0], "plating": led_pl - start_led[1],
                "dissolution": led_diss - start_led[2], "cracking": led_ck - start_led[3]}
        deltas = {
            "delta_sei": delta_sei - start_slow[0],
            "delta_pl": delta_pl - start_slow[1],
            "eps_crack_neg": eps_ck_n - start_slow[2],
            "eps_crack_pos": eps_ck_p - start_slow[3],
            "eps_diss": eps_diss_loss - start_slow[4],
            "ledger": incs,
        }
        log = DayLog(
            day_index=day_index,
            ah_throughput=ah / 3600.0,
            wh_throughput=wh / 3600.0,
            lli_increments=incs,
            ledger_cum=dict(end_state.lli_ledger),
            c_p=c_p_cap, c_n=c_n_cap, lli=lli,
            capacity_ah=cap,
            soc_min=soc_min if math.isfinite(soc_min) else 0.0,
            soc_max=soc_max if math.isfinite(soc_max) else 0.0,
            soc_mean=soc_time / SECONDS_PER_DAY,
            window_events=window_events,
            deltas=deltas,
        )
        return end_state, log


def _const_plan(duration: float, dt_max: float, current: float):
    n = max(1, int(math.ceil(duration / dt_max - 1e-9)))
    dt = duration / n
    return [(dt, current)] * n


_RUNNERS: dict[tuple, _DayRunner] = {}


def _runner(cell: CellParameters, mechanisms: frozenset) -> _DayRunner:
    key = (id(cell), mechanisms)
    runner = _RUNNERS.get(key)
    if runner is None:
        runner = _DayRunner(cell, mechanisms)
        _RUNNERS[key] = runner
    return runner


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def simulate_day(state: CellState, schedule, cell: CellParameters,
                 mechanisms=ALL_MECHANISMS, window: StoichWindow | None = None,
                 day_index: int = 0) -> tuple[CellState, DayLog]:
    """Integrate one full day; returns the new state and its log.

    ``schedule`` is a DutySchedule or any object with the same ``segments``
    and ``initial_soc`` surface (lab aging protocols). A ``pin_soc``
    attribute, when set, re-rests the cell at that SOC before integrating,
    emulating the float maintenance of a storage test.
    """
    pin = getattr(schedule, "pin_soc", None)
    if pin is not None:
        state = reset_rested(state, cell, pin)
    if window is None:
        c_p, c_n, n_li_ah = esoh(state, cell)
        window = solve_window(c_n, c_p, n_li_ah, cell)
    return _runner(cell, frozenset(mechanisms)).run(state, schedule, window, day_index)


def reset_rested(state: CellState, cell: CellParameters, soc: float) -> CellState:
    """Same slow states, concentration profiles re-rested at the given SOC."""
    c_p_cap, c_n_cap, n_li_ah = esoh(state, cell)
    window = solve_window(c_n_cap, c_p_cap, n_li_ah, cell)
    x = window.x0 + soc * (window.x100 - window.x0)
    y = (n_li_ah - x * c_n_cap) / c_p_cap
    n = state.neg.c_s.size
    out = state.copy()
    c_n_val = x * cell.neg.c_s_max
    c_p_val = y * cell.pos.c_s_max
    out.neg = ElectrodeState(np.full(n, c_n_val), state.neg.eps_s, c_n_val)
    out.pos = ElectrodeState(np.full(n, c_p_val), state.pos.eps_s, c_p_val)
    return out


def capacity(state: CellState, cell: CellParameters) -> float:
    """Usable capacity [Ah] from the state's eSOH triple (no simulated cycle)."""
    c_p, c_n, n_li_ah = esoh(state, cell)
    cap, _ = usable_capacity(c_n, c_p, n_li_ah, cell)
    return cap


def choose_jump(recent_logs: list[DayLog], cell: CellParameters,
                tol_capacity_frac: float = DEFAULT_JUMP_TOL,
                clamp: int = JUMP_CLAMP) -> int:
    """Largest day jump whose predicted capacity change stays within tolerance."""
    if len(recent_logs) < 2:
        raise ValueError("need at least two fully simulated recent days")
    rate = abs(recent_logs[-1].deltas.get("capacity_ah", 0.0))
    if rate <= 0.0:
        return clamp
    dk = int(math.floor(tol_capacity_frac * cell.c_nom / rate + 1e-9))
    return max(1, min(clamp, dk))


def extrapolate(state: CellState, slopes: Slopes, dk: int) -> CellState:
    """Advance the slow states by dk days; fast states reset to a rest profile.

    Raises ExtrapolationError when the jump would violate a state invariant
    (callers respond by halving dk).
    """
    if dk < 1:
        raise ValueError("dk must be >= 1")
    cell = slopes.cell
    eps_n = state.neg.eps_s - dk * slopes.d_eps_crack_neg
    eps_p = state.pos.eps_s - dk * (slopes.d_eps_crack_pos + slopes.d_eps_diss)
    if eps_n <= EPS_FLOOR or eps_p <= EPS_FLOOR:
        raise ExtrapolationError("active material ratio would collapse")
    ledger = {k: state.lli_ledger[k] + dk * slopes.d_ledger[k] for k in LEDGER_KEYS}
    n_li_ah = cell.n_li_bol_ah - sum(ledger.values()) * FARADAY / 3600.0
    if n_li_ah <= 0.0:
        raise ExtrapolationError("cyclable lithium would be exhausted")
    c_n_cap = cell.area * cell.neg.thickness * eps_n * cell.neg.c_s_max * FARADAY / 3600.0
    c_p_cap = cell.area * cell.pos.thickness * eps_p * cell.pos.c_s_max * FARADAY / 3600.0
    try:
        window = solve_window(c_n_cap, c_p_cap, n_li_ah, cell)
    except CapacityCollapseError as exc:
        raise ExtrapolationError(str(exc)) from exc
    x = window.x0 + slopes.reset_soc * (window.x100 - window.x0)
    y = (n_li_ah - x * c_n_cap) / c_p_cap
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ExtrapolationError("reset stoichiometry left [0, 1]")
    n = state.neg.c_s.size
    c_n_val = x * cell.neg.c_s_max
    c_p_val = y * cell.pos.c_s_max
    return CellState(
        neg=ElectrodeState(np.full(n, c_n_val), eps_n, c_n_val),
        pos=ElectrodeState(np.full(n, c_p_val), eps_p, c_p_val),
        delta_sei=state.delta_sei + dk * slopes.d_delta_sei,
        delta_pl=state.delta_pl + dk * slopes.d_delta_pl,
        eps_diss_loss=state.eps_diss_loss + dk * slopes.d_eps_diss,
        eps_crack_loss_neg=state.eps_crack_loss_neg + dk * slopes.d_eps_crack_neg,
        eps_crack_loss_pos=state.eps_crack_loss_pos + dk * slopes.d_eps_crack_pos,
        lli_ledger=ledger,
    )


def run_lifetime(cell: CellParameters, schedule: DutySchedule,
                 mode: str = "accelerated", eol_frac: float = 0.70,
                 mechanisms=ALL_MECHANISMS, day_cap: int = DAY_CAP,
                 jump_tol: float = DEFAULT_JUMP_TOL) -> LifetimeResult:
    """Age one cell through its duty schedule until end of life."""
    if mode not in ("accelerated", "exhaustive"):
        raise ValueError(f"unknown mode {mode!r}")
    mechanisms = frozenset(mechanisms)
    scenario_tag = getattr(schedule.scenario, "value", str(schedule.scenario))
    variant_tag = getattr(schedule.drive_variant, "value", str(schedule.drive_variant))
    state = initial_state(cell, soc=schedule.initial_soc)
    eol_cap = eol_frac * cell.c_nom
    n_li_bol = cell.n_li_bol

    logs: list[DayLog] = []
    cum_ah: list[float] = []
    cum_wh: list[float] = []
    total_ah = 0.0
    total_wh = 0.0
    simulated = 0
    day = 0
    prev_cap = capacity(state, cell)
    prev_day = 0.0
    termination = "day_cap"
    eol_day = None

    if prev_cap <= eol_cap:
        # degenerate target (e.g. eol_frac = 1.0): immediate end of life
        return LifetimeResult(
            cell_name=cell.name, c_nom=cell.c_nom,
            scenario=scenario_tag, drive_variant=variant_tag,
            mode=mode, eol_frac=eol_frac, logs=[], day_throughput=[],
            day_throughput_wh=[], eol_day=0.0, eol_throughput_ah=0.0,
            eol_throughput_wh=0.0, censored=False, termination="eol",
            n_li_bol=n_li_bol, ledger_final=dict(state.lli_ledger),
            esoh_final=esoh(state, cell), simulated_days=0)

    while day < day_cap:
        c_p0, c_n0, n_li0 = esoh(state, cell)
        window = solve_window(c_n0, c_p0, n_li0, cell)
        cap_start, _ = usable_capacity(c_n0, c_p0, n_li0, cell)
        state, log = simulate_day(state, schedule, cell, mechanisms=mechanisms,
                                  window=window, day_index=day)
        log.deltas["capacity_ah"] = log.capacity_ah - cap_start
        simulated += 1
        total_ah += log.ah_throughput
        total_wh += log.wh_throughput
        logs.append(log)
        cum_ah.append(total_ah)
        cum_wh.append(total_wh)

        if log.capacity_ah <= eol_cap:
            # linear interpolation between the previous anchor and this day
            d0, c0 = prev_day, prev_cap
            d1, c1 = float(day + 1), log.capacity_ah
            if c0 <= c1 + 1e-12:
                eol_day = d1
            else:
                eol_day = d0 + (c0 - eol_cap) / (c0 - c1) * (d1 - d0)
            termination = "eol"
            break
        prev_cap = log.capacity_ah
        prev_day = float(day + 1)

        day += 1
        if mode == "accelerated" and simulated >= 2 and day < day_cap:
            dk = choose_jump(logs[-2:], cell, tol_capacity_frac=jump_tol)
            dk = min(dk, max(0, day_cap - day - 1))
            if dk == 0:
                continue
            end_soc = _end_of_day_soc(state, cell)
            slopes = Slopes(
                cell=cell,
                d_delta_sei=log.deltas["delta_sei"],
                d_delta_pl=log.deltas["delta_pl"],
                d_eps_crack_neg=log.deltas["eps_crack_neg"],
                d_eps_crack_pos=log.deltas["eps_crack_pos"],
                d_eps_diss=log.deltas["eps_diss"],
                d_ledger=log.deltas["ledger"],
                reset_soc=end_soc,
            )
            while dk >= 1:
                try:
                    new_state = extrapolate(state, slopes, dk)
                except ExtrapolationError:
                    dk //= 2
                    continue
                state = new_state
                total_ah += dk * log.ah_throughput
                total_wh += dk * log.wh_throughput
                day += dk
                break

    censored = termination != "eol"
    eol_ah = None
    eol_wh = None
    if not censored and logs:
        # throughput accrued up to the fractional EOL day
        last = logs[-1]
        frac = max(0.0, min(1.0, (float(last.day_index) + 1.0 - eol_day)))
        eol_ah = total_ah - frac * last.ah_throughput
        eol_wh = total_wh - frac * last.wh_throughput
    return LifetimeResult(
        cell_name=cell.name, c_nom=cell.c_nom,
        scenario=scenario_tag, drive_variant=variant_tag,
        mode=mode, eol_frac=eol_frac,
        logs=logs, day_throughput=cum_ah, day_throughput_wh=cum_wh,
        eol_day=eol_day, eol_throughput_ah=eol_ah, eol_throughput_wh=eol_wh,
        censored=censored, termination=termination,
        n_li_bol=n_li_bol, ledger_final=dict(state.lli_ledger),
        esoh_final=esoh(state, cell), simulated_days=simulated)


def _end_of_day_soc(state: CellState, cell: CellParameters) -> float:
    c_p, c_n, n_li_ah = esoh(state, cell)
    window = solve_window(c_n, c_p, n_li_ah, cell)
    x_avg = state.neg.c_s_avg / cell.neg.c_s_max
    return min(1.0, max(0.0, (x_avg - window.x0) / (window.x100 - window.x0)))


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

TRAJECTORY_COLUMNS = ["day", "capacity_frac", "C_p", "C_n", "LLI", "lli_sei",
                      "lli_plating", "lli_diss", "lli_crack", "cum_Ah_norm",
                      "SOC_min", "SOC_avg", "SOC_max"]


def write_trajectory(result: LifetimeResult, path):
    n_bol = result.n_li_bol
    with open(path, "w") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for log, ah in zip(result.logs, result.day_throughput):
            led = log.ledger_cum
            row = [
                f"{log.day_index}",
                f"{log.capacity_ah / result.c_nom:.6f}",
                f"{log.c_p:.6f}", f"{log.c_n:.6f}", f"{log.lli:.8f}",
                f"{led['sei'] / n_bol:.8f}", f"{led['plating'] / n_bol:.8f}",
                f"{led['dissolution'] / n_bol:.8f}", f"{led['cracking'] / n_bol:.8f}",
                f"{ah / result.c_nom:.4f}",
                f"{log.soc_min:.5f}", f"{log.soc_mean:.5f}", f"{log.soc_max:.5f}",
            ]
            fh.write(",".join(row) + "\n")


def write_summary(result: LifetimeResult, path, cell: CellParameters):
    doc = summary_dict(result, cell)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def summary_dict(result: LifetimeResult, cell: CellParameters) -> dict:
    """Per-run summary in the end-of-life report schema."""
    n_bol = result.n_li_bol
    led = result.ledger_final
    c_p, c_n, n_li_ah = result.esoh_final
    doc = {
        "cell": result.cell_name,
        "scenario": result.scenario,
        "drive_variant": result.drive_variant,
        "mode": result.mode,
        "days": result.eol_day,
        "norm_throughput_ah": (result.eol_throughput_ah / result.c_nom
                               if result.eol_throughput_ah is not None else None),
        "norm_throughput_wh": (result.eol_throughput_wh / result.c_nom
                               if result.eol_throughput_wh is not None else None),
        "c_p_retention_pct": 100.0 * c_p / cell.c_p_bol,
        "c_n_retention_pct": 100.0 * c_n / cell.c_n_bol,
        "lli_pct": 100.0 * (n_bol - n_li_ah * 3600.0 / FARADAY) / n_bol,
        "lli_sei_pct": 100.0 * led["sei"] / n_bol,
        "lli_plating_pct": 100.0 * led["plating"] / n_bol,
        "lli_diss_pct": 100.0 * led["dissolution"] / n_bol,
        "lli_sei_diss_pct": 100.0 * (led["sei"] + led["dissolution"]) / n_bol,
        "lli_crack_pct": 100.0 * led["cracking"] / n_bol,
        "lli_lam_pct": 100.0 * (led["dissolution"] + led["cracking"]) / n_bol,
        "termination": {
            "reason": result.termination,
            "censored": result.censored,
            "eol_frac": result.eol_frac,
            "simulated_days": result.simulated_days,
            "last_logged_day": result.logs[-1].day_index if result.logs else None,
        },
    }
    return doc
