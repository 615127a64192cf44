import math
from dataclasses import replace

import numpy as np
import pytest

from cellwear import build_schedule, initial_state, simulate_day
from cellwear.constants import FARADAY, GAS_CONSTANT
from cellwear.degradation import (crack_lam_rate, dissolution_rate,
                                  film_resistance, plating_flux, sei_flux,
                                  sei_integrate, surface_hydrostatic_stress,
                                  trapped_lithium_rate)
from cellwear.electrochem import diffusion_step
from cellwear.fitting import calendar_schedule
from cellwear.state import uniform_electrode


@pytest.fixture()
def rest_state(nmc111):
    return initial_state(nmc111, soc=0.9)


class TestSEIFlux:
    def test_infinite_diffusivity_recovers_kinetic_limit(self, nmc111, rest_state):
        sei = replace(nmc111.sei, d_sei=1e6)
        t = nmc111.temperature
        phi = 0.08
        j = sei_flux(rest_state, sei, phi, 0.0, t)
        k_eff = sei.k_sei * math.exp(
            -sei.alpha_sei * FARADAY * (phi - sei.u_sei) / (GAS_CONSTANT * t))
        assert j == pytest.approx(-FARADAY * sei.c_ec_bulk * k_eff, rel=1e-9)

    def test_thick_film_starves_flux(self, nmc111, rest_state):
        thin = sei_flux(rest_state, nmc111.sei, 0.08, 0.0, nmc111.temperature)
        fat = rest_state.copy()
        fat.delta_sei = 1.0  # meter-thick film
        j = sei_flux(fat, nmc111.sei, 0.08, 0.0, nmc111.temperature)
        diffusion_limit = FARADAY * nmc111.sei.d_sei * nmc111.sei.c_ec_bulk / fat.delta_sei
        assert abs(j) < 1e-4 * abs(thin)
        assert abs(j) == pytest.approx(diffusion_limit, rel=1e-3)

    def test_matches_bisection_oracle(self, nmc111, rest_state):
        # independent bisection on j = F*k_eff*(c_b - j*delta/(F*D))
        sei = nmc111.sei
        t = nmc111.temperature
        rest_state.delta_sei = 2e-6  # deep in the mixed-limitation regime
        phi = 0.08
        j = abs(sei_flux(rest_state, sei, phi, 0.0, t))
        k_eff = sei.k_sei * math.exp(
            -sei.alpha_sei * FARADAY * (phi - sei.u_sei) / (GAS_CONSTANT * t))

        def g(jj):
            c_surf = sei.c_ec_bulk - jj * rest_state.delta_sei / (FARADAY * sei.d_sei)
            return jj - FARADAY * k_eff * c_surf

        lo, hi = 0.0, FARADAY * k_eff * sei.c_ec_bulk
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(mid) > 0:
                hi = mid
            else:
                lo = mid
        oracle = 0.5 * (lo + hi)
        assert j == pytest.approx(oracle, rel=1e-10)
        # bounded by both pure limits
        assert j <= FARADAY * k_eff * sei.c_ec_bulk
        assert j <= FARADAY * sei.d_sei * sei.c_ec_bulk / rest_state.delta_sei

    def test_integrate_zero_flux(self, nmc111, rest_state):
        d_delta, d_n = sei_integrate(rest_state, 0.0, 1e5, 62e-6, 0.2,
                                     nmc111.sei, 10.0)
        assert d_delta == 0.0 and d_n == 0.0

    def test_integrate_linear_in_dt(self, nmc111, rest_state):
        args = (rest_state, -1e-4, 1e5, 62e-6, 0.2, nmc111.sei)
        d1, n1 = sei_integrate(*args, 5.0)
        d2, n2 = sei_integrate(*args, 10.0)
        assert d2 == pytest.approx(2 * d1) and n2 == pytest.approx(2 * n1)


class TestPlating:
    def test_positive_overpotential_gate(self, nmc111, rest_state):
        # phi_s well above zero: no deposition even while charging
        j = plating_flux(rest_state, nmc111.plating, 0.10, 0.0, -0.25,
                         nmc111.c_e, nmc111.temperature)
        assert j == 0.0

    def test_rest_never_plates(self, nmc111, rest_state):
        j = plating_flux(rest_state, nmc111.plating, -0.05, 0.0, 0.0,
                         nmc111.c_e, nmc111.temperature)
        assert j == 0.0

    def test_discharge_never_plates(self, nmc111, rest_state):
        j = plating_flux(rest_state, nmc111.plating, -0.05, 0.0, 1.0,
                         nmc111.c_e, nmc111.temperature)
        assert j == 0.0

    def test_charging_below_zero_plates(self, nmc111, rest_state):
        j = plating_flux(rest_state, nmc111.plating, 0.01, 0.0, -1.5,
                         nmc111.c_e, nmc111.temperature)
        assert j < 0.0


class TestDissolution:
    def test_disabled_when_zero_exchange_current(self, nmc111):
        assert nmc111.dissolution.i_0_diss == 0.0
        rate = dissolution_rate(4.3, nmc111.dissolution, nmc111.pos,
                                nmc111.temperature)
        assert rate == 0.0

    def test_voltage_gate(self, nmc622_45c):
        rate = dissolution_rate(3.99, nmc622_45c.dissolution, nmc622_45c.pos,
                                nmc622_45c.temperature)
        assert rate == 0.0

    def test_active_above_equilibrium(self, nmc622_45c):
        rate = dissolution_rate(4.05, nmc622_45c.dissolution, nmc622_45c.pos,
                                nmc622_45c.temperature)
        assert rate < 0.0


class TestStressAndCracking:
    def test_uniform_profile_stress_free(self, nmc111):
        elec = uniform_electrode(nmc111.neg, 0.5)
        assert surface_hydrostatic_stress(elec.c_s_avg, elec.c_ss,
                                          nmc111.neg) == 0.0

    def test_delithiation_gives_tension(self, nmc111):
        sigma = surface_hydrostatic_stress(15000.0, 14000.0, nmc111.neg)
        assert sigma > 0.0

    def test_one_c_extraction_stays_below_critical(self, nmc111):
        # direct simulation of a sustained 1C extraction on the negative
        params = nmc111.neg
        a_s = 3.0 * params.eps_s0 / params.r_p
        flux = nmc111.c_nom / (a_s * params.thickness * nmc111.area * FARADAY)
        elec = uniform_electrode(params, 0.8)
        worst = 0.0
        for _ in range(1800):
            elec = diffusion_step(elec, params, flux, 1.0)
            sigma = surface_hydrostatic_stress(elec.c_s_avg, elec.c_ss, params)
            worst = max(worst, abs(sigma))
        assert 0.0 < worst < params.sigma_critical

    def test_rate_zero_at_rest(self, nmc111):
        assert crack_lam_rate(0.0, nmc111.crack, 6e7, nmc111.crack.beta_neg) == 0.0

    def test_rate_normalization_point(self, nmc111):
        rate = crack_lam_rate(nmc111.neg.sigma_critical, nmc111.crack,
                              nmc111.neg.sigma_critical, nmc111.crack.beta_neg)
        assert rate == pytest.approx(-nmc111.crack.beta_neg, rel=1e-12)


class TestFilmResistance:
    def test_zero_films(self, nmc111):
        r = film_resistance(0.0, 0.0, nmc111.sei, nmc111.plating, nmc111.neg,
                            nmc111.area, nmc111.neg.eps_s0)
        assert r == 0.0

    def test_linear_in_sei_thickness(self, nmc111):
        args = (nmc111.sei, nmc111.plating, nmc111.neg, nmc111.area,
                nmc111.neg.eps_s0)
        r1 = film_resistance(10e-9, 5e-9, *args)
        r2 = film_resistance(20e-9, 5e-9, *args)
        r_pl = film_resistance(0.0, 5e-9, *args)
        assert r2 - r_pl == pytest.approx(2 * (r1 - r_pl), rel=1e-12)

    def test_doubling_conductivity_halves_term(self, nmc111):
        fast = replace(nmc111.sei, kappa_sei=2 * nmc111.sei.kappa_sei)
        r_slow = film_resistance(10e-9, 0.0, nmc111.sei, nmc111.plating,
                                 nmc111.neg, nmc111.area, nmc111.neg.eps_s0)
        r_fast = film_resistance(10e-9, 0.0, fast, nmc111.plating,
                                 nmc111.neg, nmc111.area, nmc111.neg.eps_s0)
        assert r_fast == pytest.approx(r_slow / 2.0, rel=1e-12)


def test_trapped_lithium_rate_weighting(nmc111):
    full = trapped_lithium_rate(1.0, -1e-6, nmc111.neg, nmc111.area)
    empty = trapped_lithium_rate(0.0, -1e-6, nmc111.neg, nmc111.area)
    assert empty == 0.0
    assert full == pytest.approx(
        1e-6 * nmc111.neg.thickness * nmc111.area * nmc111.neg.c_s_max)


class TestLedgerProperties:
    def test_monotone_ledger_and_films(self, nmc111):
        schedule = build_schedule("v2g_moderate", "long", cell=nmc111)
        state = initial_state(nmc111, soc=schedule.initial_soc)
        prev = state
        for day in range(3):
            state, _ = simulate_day(state, schedule, nmc111, day_index=day)
            for key in state.lli_ledger:
                assert state.lli_ledger[key] >= prev.lli_ledger[key]
            assert state.delta_sei >= prev.delta_sei
            assert state.delta_pl >= prev.delta_pl
            assert state.neg.eps_s <= prev.neg.eps_s
            assert state.pos.eps_s <= prev.pos.eps_s
            prev = state

    def test_calendar_only_accrues_no_cycling_damage(self, nmc111):
        schedule = calendar_schedule(0.9)
        state = initial_state(nmc111, soc=0.9)
        for day in range(2):
            state, _ = simulate_day(state, schedule, nmc111, day_index=day)
        assert state.lli_ledger["cracking"] == 0.0
        assert state.lli_ledger["plating"] == 0.0
        assert state.lli_ledger["sei"] > 0.0

    def test_dissolution_ledger_stays_zero_when_disabled(self, nmc111):
        schedule = build_schedule("v2g_early", "long", cell=nmc111)
        state = initial_state(nmc111, soc=schedule.initial_soc)
        for day in range(2):
            state, _ = simulate_day(state, schedule, nmc111, day_index=day)
        assert state.lli_ledger["dissolution"] == 0.0


def test_sei_thickness_kinetic_to_diffusion_transition(nmc111):
    # pure calendar growth must bend from ~linear to ~sqrt(t); parameters
    # are scaled so the crossover thickness is reached inside two years
    sei = replace(nmc111.sei, k_sei=5e-16, d_sei=5e-20)
    t_k = nmc111.temperature
    phi = 0.08
    state = initial_state(nmc111, soc=0.9)
    state.delta_sei = 1e-9
    dt = 3600.0
    times, thickness = [], []
    for hour in range(2 * 365 * 24):
        j = sei_flux(state, sei, phi, 0.0, t_k)
        d_delta, _ = sei_integrate(state, j, 1.0, 1.0, 1.0, sei, dt)
        state.delta_sei += d_delta
        times.append((hour + 1) * dt)
        thickness.append(state.delta_sei)
    times = np.asarray(times)
    thickness = np.asarray(thickness)
    half = times >= times[-1] / 2.0
    slope = np.polyfit(np.log(times[half]), np.log(thickness[half]), 1)[0]
    assert 0.45 <= slope <= 0.60
    # early growth is kinetic-limited (closer to linear)
    early = times <= times[-1] / 50.0
    early_slope = np.polyfit(np.log(times[early]), np.log(thickness[early]), 1)[0]
    assert early_slope > 0.8
