"""Two-stage calibration of the degradation parameters against aging data.

Stage 1 fits the storage-aging mechanisms (SEI kinetics/transport and,
when the calendar data shows real cathode fade, the dissolution exchange
current) on calendar datasets. Stage 2 freezes those and fits the
cycling mechanisms (plating rate constant, the two fatigue coefficients
and the fatigue exponent) on cycling datasets. Every residual evaluation
is an accelerated lifetime simulation of the dataset's protocol; rate
constants are searched in log10 space.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .constants import SECONDS_PER_DAY, SECONDS_PER_HOUR
from .dfo import DFOResult, solve_dfo_ls
from .duty import ChargeCC, Rest, Segment, V2GDischargeCC
from .engine import run_lifetime
from .errors import CellwearError, ConfigError, FitError
from .params import CellParameters

log = logging.getLogger("cellwear.fit")

DEFAULT_WEIGHTS = (1.0, 1.0, 0.25)      # (C_p, C_n, LLI) residual weights
CATHODE_FADE_THRESHOLD = 0.03           # calendar C_p fade that turns dissolution on
PENALTY = 1e3

# bounds: two decades around the magnitude of each parameter class
LOG_BOUNDS = {
    "k_sei": (-18.0, -14.0),
    "d_sei": (-21.0, -17.0),
    "i_0_diss": (-5.5, -1.5),
    "k_0_pl": (-11.7, -7.7),
}
LIN_BOUNDS = {
    "beta_pos": (2e-9, 2e-5),
    "beta_neg": (2e-9, 2e-5),
    "m_crack": (1.0, 3.0),
}


@dataclass(frozen=True)
class CalendarCondition:
    soc: float
    temperature_c: float

    kind = "calendar"


@dataclass(frozen=True)
class CyclingCondition:
    charge_c: float
    discharge_c: float
    temperature_c: float
    dod: float

    kind = "cycling"


@dataclass
class AgingDataset:
    cell_family: str
    condition: CalendarCondition | CyclingCondition
    time_days: np.ndarray
    c_p_ah: np.ndarray
    c_n_ah: np.ndarray
    lli_frac: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time_days, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ConfigError("dataset needs at least one observation")
        if np.any(np.diff(t) <= 0):
            raise ConfigError("observation times must strictly increase")
        for name in ("c_p_ah", "c_n_ah"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != t.shape or np.any(v <= 0):
                raise ConfigError(f"{name} must be positive and match times")
        lli = np.asarray(self.lli_frac, dtype=float)
        if lli.shape != t.shape or np.any(lli < 0) or np.any(lli > 1):
            raise ConfigError("lli_frac must lie in [0, 1]")

    @property
    def last_day(self) -> int:
        return int(math.ceil(float(self.time_days[-1])))

    def cathode_fade(self) -> float:
        return 1.0 - float(self.c_p_ah[-1] / self.c_p_ah[0])


@dataclass
class FitProblem:
    datasets: list
    stage: str                      # "calendar" | "cycling"
    cell: CellParameters            # template carrying the fixed parameters
    free_params: tuple              # parameter names in vector order
    lower: np.ndarray               # solver-space bounds (log10 for rates)
    upper: np.ndarray
    weights: tuple = DEFAULT_WEIGHTS
    jump_tol: float = 0.01

    def __post_init__(self):
        if np.any(self.lower >= self.upper):
            raise ConfigError("bounds must satisfy lower < upper")
        if any(w <= 0 for w in self.weights):
            raise ConfigError("weights must be positive")


@dataclass
class StageReport:
    stage: str
    fitted: dict
    residual_norm: float
    n_evals: int
    flag: str
    verification_delta: float      # |accel - exhaustive| residual-norm gap
    dissolution_enabled: bool | None = None


@dataclass
class FitReport:
    stages: list
    cell: CellParameters


# --- lab protocols ----------------------------------------------------------

def calendar_schedule(soc: float) -> SimpleNamespace:
    """All-day rest at a held SOC (float maintenance between checkups)."""
    return SimpleNamespace(
        scenario="calendar", drive_variant=f"soc{soc:.2f}",
        segments=[Segment(Rest(), 0.0, SECONDS_PER_DAY)],
        initial_soc=soc, pin_soc=soc,
    )


def cycling_schedule(cond: CyclingCondition, cell: CellParameters) -> SimpleNamespace:
    """Back-to-back CC cycles between SOC 1 and 1-DOD, tiled into one day."""
    soc_hi, soc_lo = 1.0, 1.0 - cond.dod
    t_dis = cond.dod / cond.discharge_c * SECONDS_PER_HOUR
    t_chg = cond.dod / cond.charge_c * SECONDS_PER_HOUR
    rest = 300.0
    cycle = t_dis + rest + t_chg + rest
    segments = []
    t = 0.0
    while t + cycle <= SECONDS_PER_DAY:
        segments.append(Segment(V2GDischargeCC(cond.discharge_c), t, t_dis))
        segments.append(Segment(Rest(), t + t_dis, rest))
        segments.append(Segment(ChargeCC(cond.charge_c, soc_hi, cell.charge_v_guard),
                                t + t_dis + rest, t_chg))
        segments.append(Segment(Rest(), t + t_dis + rest + t_chg, rest))
        t += cycle
    if t < SECONDS_PER_DAY:
        segments.append(Segment(Rest(), t, SECONDS_PER_DAY - t))
    return SimpleNamespace(
        scenario="cycling", drive_variant=f"dod{cond.dod:.2f}",
        segments=segments, initial_soc=soc_hi, pin_soc=None,
    )


def dataset_schedule(ds: AgingDataset, cell: CellParameters):
    if ds.condition.kind == "calendar":
        return calendar_schedule(ds.condition.soc)
    return cycling_schedule(ds.condition, cell)


# --- parameter vector plumbing ---------------------------------------------

_LOG_PARAMS = {"k_sei", "d_sei", "i_0_diss", "k_0_pl"}


def apply_params(cell: CellParameters, names: tuple, values: np.ndarray) -> CellParameters:
    """New CellParameters with the named degradation constants replaced."""
    phys = {}
    for name, v in zip(names, values):
        phys[name] = 10.0**v if name in _LOG_PARAMS else float(v)
    sei = cell.sei
    diss = cell.dissolution
    pl = cell.plating
    crack = cell.crack
    if "k_sei" in phys or "d_sei" in phys:
        sei = replace(sei, k_sei=phys.get("k_sei", sei.k_sei),
                      d_sei=phys.get("d_sei", sei.d_sei))
    if "i_0_diss" in phys:
        diss = replace(diss, i_0_diss=phys["i_0_diss"])
    if "k_0_pl" in phys:
        pl = replace(pl, k_0_pl=phys["k_0_pl"])
    if {"beta_pos", "beta_neg", "m_crack"} & phys.keys():
        crack = replace(crack, beta_pos=phys.get("beta_pos", crack.beta_pos),
                        beta_neg=phys.get("beta_neg", crack.beta_neg),
                        m_crack=phys.get("m_crack", crack.m_crack))
    # electrode parameter objects stay shared so solver caches stay warm
    return replace(cell, sei=sei, dissolution=diss, plating=pl, crack=crack)


def params_to_vector(cell: CellParameters, names: tuple) -> np.ndarray:
    source = {
        "k_sei": cell.sei.k_sei, "d_sei": cell.sei.d_sei,
        "i_0_diss": cell.dissolution.i_0_diss, "k_0_pl": cell.plating.k_0_pl,
        "beta_pos": cell.crack.beta_pos, "beta_neg": cell.crack.beta_neg,
        "m_crack": cell.crack.m_crack,
    }
    return np.array([math.log10(source[n]) if n in _LOG_PARAMS else source[n]
                     for n in names])


def default_bounds(names: tuple) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = [], []
    for n in names:
        b = LOG_BOUNDS.get(n) or LIN_BOUNDS.get(n)
        lo.append(b[0])
        hi.append(b[1])
    return np.array(lo), np.array(hi)


# --- residuals --------------------------------------------------------------

def simulate_dataset(cell: CellParameters, ds: AgingDataset,
                     mode: str = "accelerated", jump_tol: float = 0.01):
    """eSOH trajectory interpolated at the dataset's observation days."""
    schedule = dataset_schedule(ds, cell)
    result = run_lifetime(cell, schedule, mode=mode, eol_frac=0.0,
                          day_cap=ds.last_day + 1, jump_tol=jump_tol)
    days = np.array([lg.day_index + 1.0 for lg in result.logs])
    c_p = np.array([lg.c_p for lg in result.logs])
    c_n = np.array([lg.c_n for lg in result.logs])
    lli = np.array([lg.lli for lg in result.logs])
    t = np.asarray(ds.time_days, dtype=float)
    return (np.interp(t, days, c_p), np.interp(t, days, c_n),
            np.interp(t, days, lli))


def residuals(p: np.ndarray, problem: FitProblem) -> np.ndarray:
    """Weighted eSOH residual vector across every dataset and checkup.

    Components are (C_p/C_nom, C_n/C_nom, LLI) scaled by the square roots
    of the weights. Simulation failures return a finite penalty vector so
    the derivative-free search stays stable.
    """
    cell = apply_params(problem.cell, problem.free_params, p)
    w = np.sqrt(np.asarray(problem.weights))
    out = []
    n_obs = sum(ds.time_days.size for ds in problem.datasets)
    for ds in problem.datasets:
        try:
            c_p, c_n, lli = simulate_dataset(cell, ds, jump_tol=problem.jump_tol)
        except CellwearError as exc:
            log.warning("simulation failed at %s: %s", dict(zip(problem.free_params, p)), exc)
            return np.full(3 * n_obs, PENALTY)
        out.append(w[0] * (ds.c_p_ah - c_p) / cell.c_nom)
        out.append(w[1] * (ds.c_n_ah - c_n) / cell.c_nom)
        out.append(w[2] * (ds.lli_frac - lli))
    return np.concatenate(out)


# --- pipeline ---------------------------------------------------------------

def _solve_stage(problem: FitProblem, x0, budget) -> tuple[DFOResult, float]:
    if x0 is None:
        x0 = 0.5 * (problem.lower + problem.upper)
    res = solve_dfo_ls(lambda p: residuals(p, problem), x0,
                       problem.lower, problem.upper, budget=budget)
    # verify the accelerated optimum with one exhaustive simulation
    cell = apply_params(problem.cell, problem.free_params, res.x)
    exact = []
    w = np.sqrt(np.asarray(problem.weights))
    for ds in problem.datasets:
        c_p, c_n, lli = simulate_dataset(cell, ds, mode="exhaustive")
        exact.append(w[0] * (ds.c_p_ah - c_p) / cell.c_nom)
        exact.append(w[1] * (ds.c_n_ah - c_n) / cell.c_nom)
        exact.append(w[2] * (ds.lli_frac - lli))
    delta = abs(float(np.linalg.norm(np.concatenate(exact))) - res.norm)
    return res, delta


def fit_pipeline(datasets: list, cell: CellParameters,
                 budget_calendar: int | None = None,
                 budget_cycling: int | None = None,
                 x0_calendar=None, x0_cycling=None,
                 weights: tuple = DEFAULT_WEIGHTS,
                 cathode_fade_threshold: float = CATHODE_FADE_THRESHOLD) -> FitReport:
    """Calibrate the six degradation parameters in two stages.

    Raises FitError (tagged with the stage) when a stage cannot run; a
    stage-1 failure aborts stage 2.
    """
    calendar = [d for d in datasets if d.condition.kind == "calendar"]
    cycling = [d for d in datasets if d.condition.kind == "cycling"]
    if not calendar:
        raise FitError("stage1 requires calendar data", stage="stage1")
    if not cycling:
        raise FitError("stage2 requires cycling data", stage="stage2")

    max_fade = max(d.cathode_fade() for d in calendar)
    with_diss = max_fade > cathode_fade_threshold
    names = ("k_sei", "d_sei") + (("i_0_diss",) if with_diss else ())
    if not with_diss:
        cell = apply_params(cell, (), np.array([]))
        cell.dissolution = replace(cell.dissolution, i_0_diss=0.0)
    lo, hi = default_bounds(names)
    problem1 = FitProblem(datasets=calendar, stage="calendar", cell=cell,
                          free_params=names, lower=lo, upper=hi, weights=weights)
    try:
        res1, delta1 = _solve_stage(problem1, x0_calendar, budget_calendar)
    except CellwearError as exc:
        raise FitError(str(exc), stage="stage1") from exc
    if res1.norm >= PENALTY:
        raise FitError("every calendar candidate failed to simulate", stage="stage1")
    cell1 = apply_params(cell, names, res1.x)
    fitted1 = {n: (10.0**v if n in _LOG_PARAMS else float(v))
               for n, v in zip(names, res1.x)}
    if not with_diss:
        fitted1["i_0_diss"] = 0.0
    report1 = StageReport(stage="calendar", fitted=fitted1,
                          residual_norm=res1.norm, n_evals=res1.n_evals,
                          flag=res1.flag, verification_delta=delta1,
                          dissolution_enabled=with_diss)

    names2 = ("k_0_pl", "beta_pos", "beta_neg", "m_crack")
    lo2, hi2 = default_bounds(names2)
    problem2 = FitProblem(datasets=cycling, stage="cycling", cell=cell1,
                          free_params=names2, lower=lo2, upper=hi2, weights=weights)
    try:
        res2, delta2 = _solve_stage(problem2, x0_cycling, budget_cycling)
    except CellwearError as exc:
        raise FitError(str(exc), stage="stage2") from exc
    cell2 = apply_params(cell1, names2, res2.x)
    fitted2 = {n: (10.0**v if n in _LOG_PARAMS else float(v))
               for n, v in zip(names2, res2.x)}
    report2 = StageReport(stage="cycling", fitted=fitted2,
                          residual_norm=res2.norm, n_evals=res2.n_evals,
                          flag=res2.flag, verification_delta=delta2)
    return FitReport(stages=[report1, report2], cell=cell2)


# --- dataset files ----------------------------------------------------------

def load_dataset(path) -> AgingDataset:
    """Read one aging dataset file (header comments + four columns)."""
    meta = {}
    rows = []
    path = Path(path)
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("# ").strip()
                if ":" in body:
                    k, v = body.split(":", 1)
                    meta[k.strip().lower()] = v.strip()
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 4:
                raise ConfigError(f"{path}:{lineno}: expected 4 columns "
                                  "(time_days, c_p_ah, c_n_ah, lli_frac)")
            rows.append([float(x) for x in parts])
    if not rows:
        raise ConfigError(f"{path}: no observations")
    kind = meta.get("condition")
    if kind == "calendar":
        cond = CalendarCondition(soc=float(meta["soc"]),
                                 temperature_c=float(meta.get("temperature_c", 25.0)))
    elif kind == "cycling":
        cond = CyclingCondition(charge_c=float(meta["charge_c"]),
                                discharge_c=float(meta["discharge_c"]),
                                temperature_c=float(meta.get("temperature_c", 25.0)),
                                dod=float(meta["dod"]))
    else:
        raise ConfigError(f"{path}: missing or unknown '# condition:' header")
    arr = np.asarray(rows)
    return AgingDataset(cell_family=meta.get("cell", path.stem),
                        condition=cond, time_days=arr[:, 0], c_p_ah=arr[:, 1],
                        c_n_ah=arr[:, 2], lli_frac=arr[:, 3])


def write_dataset(ds: AgingDataset, path):
    with open(path, "w") as fh:
        fh.write(f"# cell: {ds.cell_family}\n")
        if ds.condition.kind == "calendar":
            fh.write("# condition: calendar\n")
            fh.write(f"# soc: {ds.condition.soc}\n")
        else:
            fh.write("# condition: cycling\n")
            fh.write(f"# charge_c: {ds.condition.charge_c}\n")
            fh.write(f"# discharge_c: {ds.condition.discharge_c}\n")
            fh.write(f"# dod: {ds.condition.dod}\n")
        fh.write(f"# temperature_c: {ds.condition.temperature_c}\n")
        fh.write("# columns: time_days, c_p_ah, c_n_ah, lli_frac\n")
        for t, cp, cn, lli in zip(ds.time_days, ds.c_p_ah, ds.c_n_ah, ds.lli_frac):
            fh.write(f"{t:g}, {cp:.6f}, {cn:.6f}, {lli:.8f}\n")


def generate_synthetic_dataset(cell: CellParameters, condition, days: int,
                               rpt_every: int, noise: float = 0.0,
                               seed: int = 0) -> AgingDataset:
    """Simulate a lab protocol and sample noisy checkups from it."""
    ds_times = np.arange(rpt_every, days + 1, rpt_every, dtype=float)
    probe = AgingDataset(cell_family=cell.name, condition=condition,
                         time_days=ds_times,
                         c_p_ah=np.full(ds_times.size, cell.c_p_bol),
                         c_n_ah=np.full(ds_times.size, cell.c_n_bol),
                         lli_frac=np.zeros(ds_times.size))
    c_p, c_n, lli = simulate_dataset(cell, probe)
    rng = np.random.default_rng(seed)
    if noise > 0:
        c_p = c_p * (1.0 + noise * rng.standard_normal(c_p.size))
        c_n = c_n * (1.0 + noise * rng.standard_normal(c_n.size))
        lli = np.clip(lli + noise * np.abs(lli) * rng.standard_normal(lli.size), 0.0, 1.0)
    return AgingDataset(cell_family=cell.name, condition=condition,
                        time_days=ds_times, c_p_ah=c_p, c_n_ah=c_n, lli_frac=lli)
