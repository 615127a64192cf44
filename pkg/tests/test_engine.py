import numpy as np
import pytest

from cellwear import build_schedule, initial_state, run_lifetime, simulate_day
from cellwear.engine import (DayLog, ExtrapolationError, Slopes, capacity,
                             choose_jump, extrapolate)
from cellwear.errors import CapacityCollapseError
from cellwear.fitting import calendar_schedule
from cellwear.state import LEDGER_KEYS, cyclable_lithium, esoh


def make_log(day, d_cap, cap=5.0):
    return DayLog(day_index=day, ah_throughput=5.0, wh_throughput=19.0,
                  lli_increments=dict.fromkeys(LEDGER_KEYS, 0.0),
                  ledger_cum=dict.fromkeys(LEDGER_KEYS, 0.0),
                  c_p=6.0, c_n=6.0, lli=0.0, capacity_ah=cap,
                  soc_min=0.7, soc_max=1.0, soc_mean=0.8,
                  deltas={"capacity_ah": d_cap})


class TestSimulateDay:
    def test_mechanisms_off_periodic_identity(self, nmc111):
        sched = build_schedule("no_v2g", "long", cell=nmc111)
        state = initial_state(nmc111, soc=sched.initial_soc)
        n0 = cyclable_lithium(state, nmc111)
        end, log = simulate_day(state, sched, nmc111, mechanisms=())
        assert log.ah_throughput > 0
        assert cyclable_lithium(end, nmc111) == pytest.approx(n0, rel=1e-10)
        assert end.neg.c_s_avg == pytest.approx(state.neg.c_s_avg, rel=1e-6)
        assert end.delta_sei == state.delta_sei
        assert all(v == 0.0 for v in end.lli_ledger.values())

    def test_v2g_day_adds_one_nominal_throughput(self, nmc111):
        base = build_schedule("no_v2g", "long", cell=nmc111)
        v2g = build_schedule("v2g_moderate", "long", cell=nmc111)
        s0 = initial_state(nmc111, soc=base.initial_soc)
        s1 = initial_state(nmc111, soc=v2g.initial_soc)
        _, log0 = simulate_day(s0, base, nmc111)
        _, log1 = simulate_day(s1, v2g, nmc111)
        # two 1 h C/4 grid discharges plus their recharge = 1.0 x C_nom
        extra = (log1.ah_throughput - log0.ah_throughput) / nmc111.c_nom
        assert extra == pytest.approx(1.0, abs=0.02)

    def test_rest_only_day_grows_sei_only(self, nmc111):
        sched = calendar_schedule(1.0)
        state = initial_state(nmc111, soc=1.0)
        end, log = simulate_day(state, sched, nmc111)
        assert log.ah_throughput == 0.0
        assert end.lli_ledger["sei"] > 0
        assert end.lli_ledger["plating"] == 0.0
        assert end.lli_ledger["cracking"] == 0.0

    def test_ledger_closure_each_day(self, nmc622_45c):
        sched = build_schedule("v2g_moderate", "long", cell=nmc622_45c)
        state = initial_state(nmc622_45c, soc=sched.initial_soc)
        n_bol = cyclable_lithium(state, nmc622_45c)
        for day in range(3):
            state, log = simulate_day(state, sched, nmc622_45c, day_index=day)
            lli = (n_bol - cyclable_lithium(state, nmc622_45c)) / n_bol
            ledger = sum(state.lli_ledger.values()) / n_bol
            assert abs(lli - ledger) < 1e-6


class TestVoltageGuards:
    def test_cv_segment_tapers_to_cutoff(self, nmc111):
        from types import SimpleNamespace
        from cellwear.duty import ChargeCV, Rest, Segment
        from cellwear.electrochem import terminal_voltage
        # hold a deliberately low guard so CV engages immediately
        state0 = initial_state(nmc111, soc=0.5)
        v_hold = terminal_voltage(state0, nmc111, 0.0) + 0.02
        sched = SimpleNamespace(
            scenario="lab", drive_variant="cv",
            segments=[Segment(ChargeCV(v_hold, 0.02), 0.0, 4 * 3600.0),
                      Segment(Rest(), 4 * 3600.0, 86400.0 - 4 * 3600.0)],
            initial_soc=0.5, pin_soc=None)
        end, log = simulate_day(state0, sched, nmc111, mechanisms=())
        assert log.ah_throughput > 0.0
        v_end = terminal_voltage(end, nmc111, 0.0)
        assert v_end <= v_hold + 1e-3
        assert v_end > terminal_voltage(state0, nmc111, 0.0)

    def test_cc_guard_never_exceeds_v_max(self, nmc111):
        from types import SimpleNamespace
        from cellwear.duty import ChargeCC, Rest, Segment
        from cellwear.electrochem import terminal_voltage
        state0 = initial_state(nmc111, soc=0.9)
        guard = nmc111.v_max - 0.01  # below the open-circuit top
        sched = SimpleNamespace(
            scenario="lab", drive_variant="cc",
            segments=[Segment(ChargeCC(0.5, 1.0, guard), 0.0, 4 * 3600.0),
                      Segment(Rest(), 4 * 3600.0, 86400.0 - 4 * 3600.0)],
            initial_soc=0.9, pin_soc=None)
        end, _ = simulate_day(state0, sched, nmc111, mechanisms=())
        assert terminal_voltage(end, nmc111, 0.0) <= guard + 1e-3


class TestChooseJump:
    def test_zero_degradation_hits_clamp(self, nmc111):
        logs = [make_log(0, 0.0), make_log(1, 0.0)]
        assert choose_jump(logs, nmc111) == 20

    def test_tolerance_boundary_gives_one(self, nmc111):
        rate = 0.0025 * nmc111.c_nom
        logs = [make_log(0, -rate), make_log(1, -rate)]
        assert choose_jump(logs, nmc111, tol_capacity_frac=0.0025) == 1

    def test_requires_two_days(self, nmc111):
        with pytest.raises(ValueError):
            choose_jump([make_log(0, -0.001)], nmc111)


class TestExtrapolate:
    def zero_slopes(self, cell, soc):
        return Slopes(cell=cell, d_delta_sei=0.0, d_delta_pl=0.0,
                      d_eps_crack_neg=0.0, d_eps_crack_pos=0.0, d_eps_diss=0.0,
                      d_ledger=dict.fromkeys(LEDGER_KEYS, 0.0), reset_soc=soc)

    def test_zero_slopes_identity(self, nmc111):
        state = initial_state(nmc111, soc=0.8)
        out = extrapolate(state, self.zero_slopes(nmc111, 0.8), dk=5)
        assert out.delta_sei == state.delta_sei
        assert out.neg.eps_s == state.neg.eps_s
        assert cyclable_lithium(out, nmc111) == pytest.approx(
            cyclable_lithium(state, nmc111), rel=1e-12)

    def test_ledger_closure_preserved(self, nmc111):
        state = initial_state(nmc111, soc=0.8)
        n_bol = nmc111.n_li_bol
        slopes = self.zero_slopes(nmc111, 0.8)
        slopes.d_ledger = {"sei": 1e-5, "plating": 2e-6, "dissolution": 0.0,
                           "cracking": 3e-5}
        slopes.d_eps_crack_neg = 1e-4
        out = extrapolate(state, slopes, dk=4)
        lli = (n_bol - cyclable_lithium(out, nmc111)) / n_bol
        ledger = sum(out.lli_ledger.values()) / n_bol
        assert lli == pytest.approx(ledger, abs=1e-12)

    def test_two_single_jumps_equal_one_double(self, nmc111):
        state = initial_state(nmc111, soc=0.8)
        slopes = self.zero_slopes(nmc111, 0.8)
        slopes.d_ledger = {"sei": 1e-5, "plating": 0.0, "dissolution": 0.0,
                           "cracking": 0.0}
        slopes.d_delta_sei = 1e-9
        once = extrapolate(extrapolate(state, slopes, 1), slopes, 1)
        twice = extrapolate(state, slopes, 2)
        assert once.delta_sei == pytest.approx(twice.delta_sei, rel=1e-14)
        np.testing.assert_allclose(once.neg.c_s, twice.neg.c_s, rtol=1e-12)
        assert once.lli_ledger == pytest.approx(twice.lli_ledger)

    def test_invariant_violation_rejected(self, nmc111):
        state = initial_state(nmc111, soc=0.8)
        slopes = self.zero_slopes(nmc111, 0.8)
        slopes.d_eps_crack_neg = 0.2  # would wipe out the electrode
        with pytest.raises(ExtrapolationError):
            extrapolate(state, slopes, dk=4)


class TestCapacity:
    def test_fresh_cell_within_one_percent(self, nmc111):
        state = initial_state(nmc111, soc=0.5)
        assert capacity(state, nmc111) == pytest.approx(nmc111.c_nom, rel=0.01)

    def test_lli_limited_regime(self, nmc111):
        # remove 30% of the inventory, electrodes intact
        state = initial_state(nmc111, soc=1.0)
        state.neg.c_s *= 0.70
        state.pos.c_s *= 0.70
        assert esoh(state, nmc111)[2] == pytest.approx(
            0.70 * nmc111.n_li_bol_ah, rel=1e-12)
        retention = capacity(state, nmc111) / nmc111.c_nom
        assert retention == pytest.approx(0.70, abs=0.02)

    def test_negative_limited_when_anode_halved(self, nmc111):
        state = initial_state(nmc111, soc=1.0)
        state.neg.eps_s *= 0.5
        state.neg.c_s *= 1.6  # keep stoichiometry feasible after the cut
        cap = capacity(state, nmc111)
        assert cap < 0.65 * nmc111.c_nom

    def test_collapse_error(self, nmc111):
        state = initial_state(nmc111, soc=1.0)
        state.pos.eps_s = 1e-8
        with pytest.raises(CapacityCollapseError):
            capacity(state, nmc111)


class TestRunLifetime:
    def test_determinism(self, nmc111):
        sched = build_schedule("no_v2g", "long", cell=nmc111)
        a = run_lifetime(nmc111, sched, mode="accelerated", day_cap=30,
                         eol_frac=0.0)
        b = run_lifetime(nmc111, sched, mode="accelerated", day_cap=30,
                         eol_frac=0.0)
        assert [l.day_index for l in a.logs] == [l.day_index for l in b.logs]
        for la, lb in zip(a.logs, b.logs):
            assert la.capacity_ah == lb.capacity_ah
            assert la.ah_throughput == lb.ah_throughput
            assert la.lli == lb.lli

    def test_degenerate_eol_fraction(self, nmc111):
        sched = build_schedule("no_v2g", "long", cell=nmc111)
        res = run_lifetime(nmc111, sched, eol_frac=1.0)
        assert res.eol_day == 0.0
        assert res.termination == "eol"

    def test_day_cap_censors(self, nmc111):
        sched = build_schedule("no_v2g", "long", cell=nmc111)
        res = run_lifetime(nmc111, sched, mode="accelerated", day_cap=10,
                           eol_frac=0.0)
        assert res.censored
        assert res.termination == "day_cap"

    def test_capacity_monotone(self, nmc111):
        sched = build_schedule("v2g_moderate", "long", cell=nmc111)
        res = run_lifetime(nmc111, sched, mode="accelerated", day_cap=70,
                           eol_frac=0.0)
        caps = [l.capacity_ah for l in res.logs]
        assert all(b <= a + 5e-4 * nmc111.c_nom for a, b in zip(caps, caps[1:]))
