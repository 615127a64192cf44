"""Tabulated open-circuit-potential curves.

Curves map electrode stoichiometry (fraction of c_s_max) to the half-cell
potential against Li/Li+ and are required to be strictly decreasing, the
normal convention for both graphite lithiation x and layered-oxide
lithiation y.
"""

from __future__ import annotations

import importlib.resources

import numpy as np

from .errors import ConfigError

_N_FAST = 2048  # uniform resample size for the scalar fast path


class OCPCurve:
    """Monotone tabulated open-circuit potential, linearly interpolated.

    Parameters
    ----------
    sto : array_like
        Stoichiometry samples, strictly increasing, spanning [0, 1].
    volts : array_like
        Potential vs Li/Li+ [V], strictly decreasing in stoichiometry.
    name : str
        Identifier used in error messages and config round-trips.
    """

    def __init__(self, sto, volts, name="ocp"):
        sto = np.asarray(sto, dtype=float)
        volts = np.asarray(volts, dtype=float)
        if sto.ndim != 1 or sto.shape != volts.shape or sto.size < 2:
            raise ConfigError(f"{name}: need two equal-length 1-D columns")
        if np.any(np.diff(sto) <= 0):
            raise ConfigError(f"{name}: stoichiometry samples must strictly increase")
        if sto[0] > 1e-9 or sto[-1] < 1 - 1e-9:
            raise ConfigError(f"{name}: table must cover [0, 1]")
        if np.any(np.diff(volts) >= 0):
            raise ConfigError(f"{name}: potential must strictly decrease in stoichiometry")
        self.name = name
        self.sto = sto
        self.volts = volts
        # dense uniform grid so the inner loop can interpolate in O(1)
        self._grid = np.interp(np.linspace(0.0, 1.0, _N_FAST + 1), sto, volts)
        self._inv_dx = float(_N_FAST)

    def __call__(self, x):
        return np.interp(x, self.sto, self.volts)

    def at(self, x: float) -> float:
        """Scalar fast path; clamps to [0, 1]."""
        if x <= 0.0:
            return float(self._grid[0])
        if x >= 1.0:
            return float(self._grid[-1])
        t = x * self._inv_dx
        i = int(t)
        f = t - i
        g = self._grid
        return g[i] * (1.0 - f) + g[i + 1] * f

    def __repr__(self):
        return f"OCPCurve({self.name!r}, {self.sto.size} points)"


def load_ocp_file(path, name=None) -> OCPCurve:
    """Read a two-column text table (stoichiometry, volts); '#' comments."""
    sto, volts = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ConfigError(f"{path}: line {lineno}: expected two columns")
            sto.append(float(parts[0]))
            volts.append(float(parts[1]))
    return OCPCurve(sto, volts, name=name or str(path))


_BUNDLED_CACHE: dict[str, OCPCurve] = {}


def bundled_ocp(name: str) -> OCPCurve:
    """Load a packaged curve by short name ('graphite' or 'nmc')."""
    if name not in _BUNDLED_CACHE:
        res = importlib.resources.files("cellwear").joinpath(f"data/ocp/{name}.csv")
        if not res.is_file():
            raise ConfigError(f"no bundled OCP curve named {name!r}")
        with importlib.resources.as_file(res) as path:
            _BUNDLED_CACHE[name] = load_ocp_file(path, name=name)
    return _BUNDLED_CACHE[name]
