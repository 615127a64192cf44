"""Lithium-loss attribution, normalized throughput, and the TvD metric.

TvD (throughput gained versus days lost) compares a V2G lifetime run
against its no-V2G baseline: relative extra normalized Ah throughput over
relative life lost in days. Zero when V2G yields no extra throughput,
infinite when it extends life.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import spearmanr

from .constants import FARADAY
from .engine import LifetimeResult
from .errors import BookkeepingError, ComparisonError, LedgerClosureError

CLOSURE_TOL = 1e-4


@dataclass(frozen=True)
class LLIBreakdown:
    lli_total: float
    lli_sei: float
    lli_plating: float
    lli_diss: float
    lli_crack: float

    @property
    def lli_cal(self) -> float:
        return self.lli_sei + self.lli_diss

    @property
    def lli_lam(self) -> float:
        return self.lli_diss + self.lli_crack

    @property
    def cal_fraction(self) -> float:
        return self.lli_cal / self.lli_total if self.lli_total > 0 else 0.0


class TvDKind(Enum):
    ZERO = "zero"
    FINITE = "finite"
    INFINITE = "infinite"


@dataclass(frozen=True)
class TvDResult:
    cell_name: str
    scenario: str
    drive_variant: str
    gain_frac: float
    loss_frac: float
    kind: TvDKind
    value: float            # 0.0 for ZERO, math.inf for INFINITE

    @property
    def log10(self) -> float | None:
        if self.kind is TvDKind.FINITE and self.value > 0:
            return math.log10(self.value)
        return None


def lli_total(n_li_bol: float, n_li_k: float) -> float:
    """Fractional loss of lithium inventory, (n_BOL - n_k) / n_BOL."""
    if n_li_bol <= 0:
        raise BookkeepingError("beginning-of-life inventory must be positive")
    frac = (n_li_bol - n_li_k) / n_li_bol
    if frac < -1e-9:
        raise BookkeepingError(f"negative lithium loss ({frac:.3e})")
    return max(frac, 0.0)


def lli_lam_increment(x: float, y: float, d_c_n: float, d_c_p: float) -> float:
    """Lithium trapped by active-material loss [mol].

    `d_c_n`, `d_c_p` are electrode-capacity changes [Ah], <= 0 for losses;
    the trapped amount is weighted by the stoichiometry at the moment of
    loss: dn = -(3600/F) * (x*dC_n + y*dC_p).
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise BookkeepingError("stoichiometries must lie in [0, 1]")
    return -(3600.0 / FARADAY) * (x * d_c_n + y * d_c_p)


def breakdown(result: LifetimeResult) -> LLIBreakdown:
    """Per-mechanism LLI fractions (of the BOL inventory) at end of life."""
    if result.censored:
        raise ComparisonError(
            f"{result.cell_name}/{result.scenario}: censored result has no "
            "end-of-life breakdown")
    n_bol = result.n_li_bol
    led = result.ledger_final
    parts = {k: v / n_bol for k, v in led.items()}
    total = lli_total(n_bol, result.esoh_final[2] * 3600.0 / FARADAY)
    if abs(total - sum(parts.values())) > CLOSURE_TOL:
        raise LedgerClosureError(
            f"ledger sum {sum(parts.values()):.6f} vs LLI {total:.6f}")
    return LLIBreakdown(
        lli_total=total,
        lli_sei=parts["sei"], lli_plating=parts["plating"],
        lli_diss=parts["dissolution"], lli_crack=parts["cracking"],
    )


def breakdown_from_fractions(lli_sei, lli_plating, lli_diss, lli_crack,
                             lli_total_frac=None) -> LLIBreakdown:
    """Build a breakdown directly from ledger fractions (e.g. report files)."""
    total = (lli_sei + lli_plating + lli_diss + lli_crack
             if lli_total_frac is None else lli_total_frac)
    parts_sum = lli_sei + lli_plating + lli_diss + lli_crack
    if abs(total - parts_sum) > CLOSURE_TOL:
        raise LedgerClosureError(f"ledger sum {parts_sum:.6f} vs LLI {total:.6f}")
    if min(lli_sei, lli_plating, lli_diss, lli_crack) < 0:
        raise BookkeepingError("ledger fractions must be non-negative")
    return LLIBreakdown(total, lli_sei, lli_plating, lli_diss, lli_crack)


def normalized_throughput(ah: float, c_nom: float) -> float:
    """Ah throughput over nominal capacity."""
    if c_nom <= 0:
        raise BookkeepingError("nominal capacity must be positive")
    return ah / c_nom


def tvd_from_numbers(days_base, thru_base, days_v2g, thru_v2g,
                     cell_name="", scenario="", drive_variant="") -> TvDResult:
    """TvD from end-of-life numbers (throughputs in any consistent unit)."""
    gain = (thru_v2g - thru_base) / thru_base
    loss = (days_base - days_v2g) / days_base
    if gain < 0.0:
        return TvDResult(cell_name, scenario, drive_variant, gain, loss,
                         TvDKind.ZERO, 0.0)
    if loss < 0.0:
        return TvDResult(cell_name, scenario, drive_variant, gain, loss,
                         TvDKind.INFINITE, math.inf)
    if loss == 0.0:
        return TvDResult(cell_name, scenario, drive_variant, gain, loss,
                         TvDKind.INFINITE, math.inf)
    return TvDResult(cell_name, scenario, drive_variant, gain, loss,
                     TvDKind.FINITE, gain / loss)


def tvd(baseline: LifetimeResult, v2g: LifetimeResult,
        use_wh: bool = False) -> TvDResult:
    """TvD of a V2G run against its no-V2G baseline."""
    if baseline.cell_name != v2g.cell_name:
        raise ComparisonError(
            f"cell mismatch: {baseline.cell_name} vs {v2g.cell_name}")
    if baseline.drive_variant != v2g.drive_variant:
        raise ComparisonError(
            f"drive variant mismatch: {baseline.drive_variant} vs {v2g.drive_variant}")
    if baseline.censored or v2g.censored:
        raise ComparisonError("cannot compare censored lifetime results")
    if baseline.scenario != "no_v2g":
        raise ComparisonError("baseline must be the no_v2g scenario")
    if use_wh:
        tb, tv = baseline.eol_throughput_wh, v2g.eol_throughput_wh
    else:
        tb, tv = baseline.eol_throughput_ah, v2g.eol_throughput_ah
    return tvd_from_numbers(baseline.eol_day, tb, v2g.eol_day, tv,
                            cell_name=v2g.cell_name, scenario=v2g.scenario,
                            drive_variant=v2g.drive_variant)


@dataclass
class TrendPoint:
    cell_name: str
    scenario: str
    drive_variant: str
    cal_fraction: float
    tvd: TvDResult


@dataclass
class TrendReport:
    points: list            # all TrendPoints
    slope: float | None     # OLS on (cal_fraction, log10 tvd), finite points
    intercept: float | None
    spearman: float | None  # rank correlation, infinite ranked above finite
    monotone: bool
    excluded: list          # non-finite points, listed separately
    degenerate: bool = False


def trend_report(points: list[TrendPoint]) -> TrendReport:
    """Least-squares semilog trend of TvD against the calendar-aging share."""
    finite = [p for p in points if p.tvd.kind is TvDKind.FINITE and p.tvd.value > 0]
    excluded = [p for p in points if p not in finite]
    if len(finite) < 2:
        return TrendReport(points, None, None, None, False, excluded,
                           degenerate=True)
    x = np.array([p.cal_fraction for p in finite])
    y = np.array([math.log10(p.tvd.value) for p in finite])
    if np.ptp(x) < 1e-12 or np.ptp(y) < 1e-12:
        return TrendReport(points, None, None, None, False, excluded,
                           degenerate=True)
    slope, intercept = np.polyfit(x, y, 1)
    # rank correlation over every point; infinite TvD outranks all finite
    xs = [p.cal_fraction for p in points]
    finite_max = max((p.tvd.value for p in finite), default=1.0)
    ys = [p.tvd.value if p.tvd.kind is TvDKind.FINITE else
          (10.0 * finite_max if p.tvd.kind is TvDKind.INFINITE else 0.0)
          for p in points]
    rho = float(spearmanr(xs, ys).statistic) if len(points) >= 3 else None
    order = np.argsort(x)
    monotone = bool(np.all(np.diff(y[order]) > 0))
    return TrendReport(points, float(slope), float(intercept), rho, monotone,
                       excluded)
