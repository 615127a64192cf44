"""Physics-based lithium-ion degradation digital twin.

Simulates full-lifetime aging of automotive cells under driving and
vehicle-to-grid duty cycles, calibrates the degradation mechanisms against
aging data, and quantifies the value of grid services through the
throughput-gained-versus-days-lost ratio.
"""

from .duty import (CurrentProfile, DriveVariant, DutySchedule, Scenario,
                   build_schedule, bundled_drive_profile, load_drive_profile,
                   soc_average)
from .engine import (DayLog, LifetimeResult, capacity, choose_jump,
                     extrapolate, run_lifetime, simulate_day)
from .errors import CellwearError
from .params import (CellParameters, bundled_cell, bundled_cell_names,
                     load_cell, resolve_cell)
from .state import CellState, initial_state

__version__ = "0.1.0"

__all__ = [
    "CurrentProfile", "DriveVariant", "DutySchedule", "Scenario",
    "build_schedule", "bundled_drive_profile", "load_drive_profile",
    "soc_average", "DayLog", "LifetimeResult", "capacity", "choose_jump",
    "extrapolate", "run_lifetime", "simulate_day", "CellwearError",
    "CellParameters", "bundled_cell", "bundled_cell_names", "load_cell",
    "resolve_cell", "CellState", "initial_state", "__version__",
]
