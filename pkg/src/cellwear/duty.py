"""Daily duty schedules: drive / rest / charge / grid-discharge segments.

A schedule tiles exactly one day (86400 s). Four scenarios are built around
a two-commute day (morning and afternoon drives):

* ``no_v2g``        - charge at C/8 at home and C/4 at work, nothing else;
* ``v2g_moderate``  - one hour of C/4 grid discharge after each drive,
                      charge timing picked so the first-cycle average SOC
                      matches the no-V2G baseline;
* ``v2g_early``     - charges start immediately after the grid discharges
                      (rests fully charged, highest average SOC);
* ``v2g_late``      - charges end right before the next drive (rests at the
                      lowest SOC).

Charge start times are found by bisection on a single "earliness" knob so
first-cycle average SOCs hit their published anchors; the afternoon pattern
mirrors the morning one.
"""

from __future__ import annotations

import enum
import importlib.resources
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import SECONDS_PER_DAY, SECONDS_PER_HOUR
from .errors import ProfileError, ScheduleError
from .params import CellParameters


class Scenario(str, enum.Enum):
    NO_V2G = "no_v2g"
    V2G_MODERATE = "v2g_moderate"
    V2G_EARLY = "v2g_early"
    V2G_LATE = "v2g_late"

    @property
    def is_v2g(self) -> bool:
        return self is not Scenario.NO_V2G


class DriveVariant(str, enum.Enum):
    LONG = "long"    # 1 h each way
    SHORT = "short"  # 30 min each way


# clock anchors [s from midnight]
MORNING_DRIVE_START = 7.0 * SECONDS_PER_HOUR
AFTERNOON_DRIVE_START = 17.0 * SECONDS_PER_HOUR
GRID_DISCHARGE_CRATE = 0.25
GRID_DISCHARGE_DURATION = 1.0 * SECONDS_PER_HOUR
WORK_CHARGE_CRATE = 0.25
HOME_CHARGE_CRATE = 0.125

SOC_AVE_TARGETS = {Scenario.NO_V2G: 0.79, Scenario.V2G_MODERATE: 0.79,
                   Scenario.V2G_EARLY: 0.88, Scenario.V2G_LATE: 0.61}


@dataclass
class CurrentProfile:
    """Piecewise-constant C-rate profile; value i holds over [t_i, t_{i+1})."""

    times: np.ndarray       # sample times [s], strictly increasing from 0
    c_rates: np.ndarray     # C-rate [1/h] per interval, discharge positive
    distance_mi: float = 0.0

    def __post_init__(self):
        if self.times.ndim != 1 or self.times.size < 2:
            raise ProfileError("need at least two time samples")
        if self.times[0] != 0.0:
            raise ProfileError("profile must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ProfileError("time samples must strictly increase")
        if self.c_rates.size != self.times.size - 1:
            raise ProfileError("need one C-rate per interval")
        if self.net_soc < 0:
            raise ProfileError("drive profile must be net-discharging")

    @property
    def total_duration(self) -> float:
        return float(self.times[-1])

    @property
    def net_soc(self) -> float:
        """Net SOC consumed over the full profile (positive = discharged)."""
        return float(np.sum(self.c_rates * np.diff(self.times)) / SECONDS_PER_HOUR)

    @property
    def gross_soc(self) -> float:
        """|Ah| throughput of the profile in SOC units."""
        return float(np.sum(np.abs(self.c_rates) * np.diff(self.times))
                     / SECONDS_PER_HOUR)

    def truncate(self, duration_s: float, distance_mi: float) -> "CurrentProfile":
        """First `duration_s` seconds of the profile."""
        if not 0 < duration_s <= self.total_duration:
            raise ProfileError("truncation must lie inside the profile")
        keep = self.times < duration_s
        times = np.append(self.times[keep], duration_s)
        return CurrentProfile(times=times, c_rates=self.c_rates[: times.size - 1],
                              distance_mi=distance_mi)

    def step_arrays(self, dt_max: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
        """(dt, c_rate) arrays covering the profile with steps <= dt_max."""
        dts, rates = [], []
        for t0, t1, c in zip(self.times[:-1], self.times[1:], self.c_rates):
            span = t1 - t0
            n = max(1, int(math.ceil(span / dt_max - 1e-12)))
            dts.extend([span / n] * n)
            rates.extend([c] * n)
        return np.asarray(dts), np.asarray(rates)


def load_drive_profile(path) -> CurrentProfile:
    """Parse a two-column drive profile file (seconds, C-rate).

    Header comments may carry ``# distance_mi: <value>`` metadata. Raises
    ProfileError with the offending line number on schema violations.
    """
    times, rates, distance = [], [], 0.0
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if stripped.startswith("#"):
                if "distance_mi:" in stripped:
                    try:
                        distance = float(stripped.split("distance_mi:")[1].strip())
                    except ValueError as exc:
                        raise ProfileError("bad distance metadata", line=lineno) from exc
                continue
            if not stripped:
                continue
            parts = stripped.replace(",", " ").split()
            if len(parts) != 2:
                raise ProfileError("expected two columns (seconds, c_rate)",
                                   line=lineno)
            try:
                t, c = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise ProfileError(f"non-numeric value {parts!r}", line=lineno) from exc
            if times:
                if t == times[-1]:
                    raise ProfileError(f"duplicated timestamp {t:g}", line=lineno)
                if t < times[-1]:
                    raise ProfileError(f"non-monotone timestamp {t:g}", line=lineno)
            times.append(t)
            rates.append(c)
    if len(times) < 2:
        raise ProfileError("profile needs at least two samples")
    return CurrentProfile(times=np.asarray(times), c_rates=np.asarray(rates[:-1]),
                          distance_mi=distance)


def bundled_drive_profile(variant: DriveVariant | str = DriveVariant.LONG) -> CurrentProfile:
    """The packaged synthetic commute profile (1 h; `short` truncates to 30 min)."""
    variant = DriveVariant(variant)
    res = importlib.resources.files("cellwear").joinpath("data/drive/commute_1h.csv")
    with importlib.resources.as_file(res) as path:
        profile = load_drive_profile(Path(path))
    if variant is DriveVariant.SHORT:
        return profile.truncate(profile.total_duration / 2.0,
                                profile.distance_mi / 2.0)
    return profile


# --- segment kinds ---------------------------------------------------------

@dataclass(frozen=True)
class Drive:
    profile: CurrentProfile


@dataclass(frozen=True)
class Rest:
    pass


@dataclass(frozen=True)
class ChargeCC:
    c_rate: float           # [1/h] on nominal capacity
    target_soc: float
    v_max: float


@dataclass(frozen=True)
class ChargeCV:
    v_max: float
    cutoff_c_rate: float


@dataclass(frozen=True)
class V2GDischargeCC:
    c_rate: float


@dataclass(frozen=True)
class Segment:
    kind: object
    start: float            # [s from midnight]
    duration: float         # [s]

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass
class DutySchedule:
    scenario: Scenario
    drive_variant: DriveVariant
    segments: list[Segment]
    initial_soc: float = 1.0    # ideal first-cycle SOC at midnight
    soc_ave_ideal: float = 0.0
    soc_min_ideal: float = 0.0
    charge_earliness: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        segs = sorted(self.segments, key=lambda s: s.start)
        if not segs or segs[0].start != 0.0:
            raise ScheduleError("schedule must start at t = 0")
        t = 0.0
        for seg in segs:
            if abs(seg.start - t) > 1e-6:
                raise ScheduleError(f"gap/overlap at t = {t:.3f} s")
            if seg.duration <= 0:
                raise ScheduleError("segments must have positive duration")
            t = seg.end
        if abs(t - SECONDS_PER_DAY) > 1e-6:
            raise ScheduleError(f"schedule covers {t:.3f} s, expected 86400")
        n_drive = sum(isinstance(s.kind, Drive) for s in segs)
        if n_drive != 2:
            raise ScheduleError(f"expected exactly two drive segments, got {n_drive}")
        if self.scenario.is_v2g:
            grid = [s for s in segs if isinstance(s.kind, V2GDischargeCC)]
            if len(grid) != 2 or any(abs(s.duration - GRID_DISCHARGE_DURATION) > 1e-6
                                     or s.kind.c_rate != GRID_DISCHARGE_CRATE
                                     for s in grid):
                raise ScheduleError("V2G scenarios need two 1 h C/4 grid discharges")
        self.segments = segs


# --- construction ----------------------------------------------------------

@dataclass
class _Plan:
    """Raw interval layout on the wrapped 24 h clock, before tiling."""
    drive_net_soc: float
    drive_duration: float
    intervals: list = field(default_factory=list)  # (start, dur, kind, dsoc_rate/h)

    def add(self, start, dur, kind, soc_rate):
        self.intervals.append((start, dur, kind, soc_rate))


def _layout(scenario: Scenario, profile: CurrentProfile, earliness: float,
            guard_v: float) -> _Plan:
    d = profile.net_soc
    dur_drive = profile.total_duration
    plan = _Plan(drive_net_soc=d, drive_duration=dur_drive)
    md_end = MORNING_DRIVE_START + dur_drive
    ad_end = AFTERNOON_DRIVE_START + dur_drive

    need = d + (GRID_DISCHARGE_CRATE if scenario.is_v2g else 0.0)
    dur_work = need / WORK_CHARGE_CRATE * SECONDS_PER_HOUR
    dur_home = need / HOME_CHARGE_CRATE * SECONDS_PER_HOUR

    plan.add(MORNING_DRIVE_START, dur_drive, Drive(profile), -d / (dur_drive / SECONDS_PER_HOUR))
    plan.add(AFTERNOON_DRIVE_START, dur_drive, Drive(profile), -d / (dur_drive / SECONDS_PER_HOUR))

    work_avail = md_end
    home_avail = ad_end
    if scenario.is_v2g:
        plan.add(md_end, GRID_DISCHARGE_DURATION, V2GDischargeCC(GRID_DISCHARGE_CRATE),
                 -GRID_DISCHARGE_CRATE)
        plan.add(ad_end, GRID_DISCHARGE_DURATION, V2GDischargeCC(GRID_DISCHARGE_CRATE),
                 -GRID_DISCHARGE_CRATE)
        work_avail += GRID_DISCHARGE_DURATION
        home_avail += GRID_DISCHARGE_DURATION

    work_slack = (AFTERNOON_DRIVE_START - dur_work) - work_avail
    home_slack = (MORNING_DRIVE_START + SECONDS_PER_DAY - dur_home) - home_avail
    if work_slack < 0 or home_slack < 0:
        raise ScheduleError(
            f"{scenario.value}: charge cannot restore SOC within its window "
            f"(work slack {work_slack:.0f} s, home slack {home_slack:.0f} s)")

    work_start = work_avail + (1.0 - earliness) * work_slack
    home_start = home_avail + (1.0 - earliness) * home_slack
    plan.add(work_start, dur_work, ChargeCC(WORK_CHARGE_CRATE, 1.0, guard_v),
             WORK_CHARGE_CRATE)
    plan.add(home_start % SECONDS_PER_DAY, dur_home,
             ChargeCC(HOME_CHARGE_CRATE, 1.0, guard_v), HOME_CHARGE_CRATE)
    return plan


def _ideal_trace(plan: _Plan) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear first-cycle SOC trace, anchored at SOC = 1 when the
    morning drive starts. Time axis is relative to that anchor; average and
    minimum are rotation-invariant, and the midnight value is read off at
    the anchor's complement. No segment crosses the anchor: charges are
    constructed to end at or before the next drive."""
    t0 = MORNING_DRIVE_START
    rel = sorted(((s % SECONDS_PER_DAY - t0) % SECONDS_PER_DAY,
                  dur, r / SECONDS_PER_HOUR)
                 for s, dur, _kind, r in plan.intervals)
    times = [0.0]
    socs = [1.0]
    cursor = 0.0
    soc = 1.0
    for off, dur, rate in rel:
        if off + dur > SECONDS_PER_DAY + 1e-6:
            raise ScheduleError("segment crosses the morning-drive anchor")
        if off > cursor + 1e-9:          # rest gap
            times.append(off)
            socs.append(soc)
        soc = min(1.0, soc + rate * dur)
        times.append(off + dur)
        socs.append(soc)
        cursor = off + dur
    if cursor < SECONDS_PER_DAY - 1e-9:
        times.append(SECONDS_PER_DAY)
        socs.append(soc)
    return np.asarray(times), np.asarray(socs)


def soc_average(times: np.ndarray, socs: np.ndarray) -> float:
    """Time-weighted mean of a piecewise-linear SOC trace over a full day."""
    times = np.asarray(times, dtype=float)
    socs = np.asarray(socs, dtype=float)
    span = times[-1] - times[0]
    if span < SECONDS_PER_DAY - 1.0:
        raise ScheduleError("trace must cover the full 24 h day")
    mid = 0.5 * (socs[:-1] + socs[1:])
    return float(np.sum(mid * np.diff(times)) / span)


def _plan_stats(plan: _Plan) -> tuple[float, float, float]:
    t, s = _ideal_trace(plan)
    midnight_rel = (SECONDS_PER_DAY - MORNING_DRIVE_START) % SECONDS_PER_DAY
    soc_midnight = float(np.interp(midnight_rel, t, s))
    return soc_average(t, s), float(s.min()), soc_midnight


def _tile(plan: _Plan) -> list[Segment]:
    pieces = []
    for start, dur, kind, _rate in plan.intervals:
        start = start % SECONDS_PER_DAY
        end = start + dur
        if end <= SECONDS_PER_DAY + 1e-9:
            pieces.append((start, min(dur, SECONDS_PER_DAY - start), kind))
        else:
            pieces.append((start, SECONDS_PER_DAY - start, kind))
            pieces.append((0.0, end - SECONDS_PER_DAY, kind))
    pieces.sort(key=lambda p: p[0])
    segments = []
    cursor = 0.0
    for start, dur, kind in pieces:
        if start > cursor + 1e-9:
            segments.append(Segment(Rest(), cursor, start - cursor))
        elif start < cursor - 1e-9:
            raise ScheduleError(f"overlapping segments at {start:.1f} s")
        segments.append(Segment(kind, start, dur))
        cursor = start + dur
    if cursor < SECONDS_PER_DAY - 1e-9:
        segments.append(Segment(Rest(), cursor, SECONDS_PER_DAY - cursor))
    # snap float drift
    segments[-1] = Segment(segments[-1].kind, segments[-1].start,
                           SECONDS_PER_DAY - segments[-1].start)
    return segments


def build_schedule(scenario: Scenario | str, drive_variant: DriveVariant | str,
                   profile: CurrentProfile | None = None,
                   cell: CellParameters | None = None) -> DutySchedule:
    """Construct one 24 h duty schedule.

    The charge "earliness" knob is bisected so the ideal first-cycle average
    SOC hits the scenario's published anchor. The short drive variant has no
    published anchors: it uses the structural timings (late charging except
    for ``v2g_early``) with the moderate case matched to its own no-V2G
    average.
    """
    scenario = Scenario(scenario)
    drive_variant = DriveVariant(drive_variant)
    if profile is None:
        profile = bundled_drive_profile(drive_variant)
    guard_v = cell.charge_v_guard if cell is not None else 4.2

    def stats_at(lam: float):
        return _plan_stats(_layout(scenario, profile, lam, guard_v))

    if drive_variant is DriveVariant.LONG:
        target = SOC_AVE_TARGETS.get(scenario)
    else:
        if scenario is Scenario.V2G_MODERATE:
            target = _plan_stats(_layout(Scenario.NO_V2G, profile, 0.0, guard_v))[0]
        else:
            target = None   # structural late/early charging

    if target is None:
        lam = 1.0 if scenario is Scenario.V2G_EARLY else 0.0
    else:
        lo, hi = 0.0, 1.0
        ave_lo = stats_at(lo)[0]
        ave_hi = stats_at(hi)[0]
        if not ave_lo - 1e-3 <= target <= ave_hi + 1e-3:
            raise ScheduleError(
                f"{scenario.value}: target SOC_ave {target:.3f} outside the "
                f"reachable range [{ave_lo:.3f}, {ave_hi:.3f}]")
        lam = 0.5
        for _ in range(50):
            lam = 0.5 * (lo + hi)
            ave = stats_at(lam)[0]
            if abs(ave - target) < 1e-5:
                break
            if ave < target:
                lo = lam
            else:
                hi = lam
    plan = _layout(scenario, profile, lam, guard_v)
    ave, soc_min, soc0 = _plan_stats(plan)
    return DutySchedule(
        scenario=scenario, drive_variant=drive_variant, segments=_tile(plan),
        initial_soc=soc0, soc_ave_ideal=ave, soc_min_ideal=soc_min,
        charge_earliness=lam,
    )
