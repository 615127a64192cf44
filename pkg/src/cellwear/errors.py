"""Exception hierarchy shared across the package."""


class CellwearError(Exception):
    """Base class for all package errors."""


class ConfigError(CellwearError):
    """Invalid configuration, parameter file, or CLI arguments."""


class ProfileError(ConfigError):
    """Malformed drive-profile file. Carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SaturationError(CellwearError):
    """A particle concentration left [0, c_s_max].

    Signals an infeasible C-rate or a depleted electrode. `electrode` is
    "negative"/"positive", `direction` is "overfill"/"depletion".
    """

    def __init__(self, electrode, direction, value):
        self.electrode = electrode
        self.direction = direction
        self.value = value
        super().__init__(
            f"{electrode} electrode concentration {direction} ({value:.6g} mol/m^3)"
        )


class KineticStarvationError(CellwearError):
    """Nonzero intercalation current demanded at zero exchange current."""


class ScheduleError(CellwearError):
    """A duty schedule cannot be constructed (e.g. charge window too short)."""


class CapacityCollapseError(CellwearError):
    """An electrode's active material ratio degenerated to ~zero."""


class SimulationError(CellwearError):
    """Intra-day solver failure; carries segment index and timestamp."""

    def __init__(self, message, segment=None, time_s=None):
        self.segment = segment
        self.time_s = time_s
        if segment is not None:
            message = f"segment {segment} @ t={time_s:.1f}s: {message}"
        super().__init__(message)


class LedgerClosureError(CellwearError):
    """Per-mechanism lithium ledger does not close against total LLI."""


class BookkeepingError(CellwearError):
    """Impossible accounting value (e.g. negative lithium loss)."""


class ComparisonError(CellwearError):
    """Results being compared are not comparable (family/variant mismatch)."""


class FitError(CellwearError):
    """Calibration pipeline failure; carries the stage name."""

    def __init__(self, message, stage=None):
        self.stage = stage
        if stage is not None:
            message = f"{stage}: {message}"
        super().__init__(message)
