"""Cell parameterization: geometry, kinetics, and degradation constants.

A cell family is described by one YAML file (see ``data/cells/``). Every
physical value carries a unit-suffixed key. Derived quantities (active
material ratios, electrode capacities, the voltage window implied by the
stoichiometry windows) are computed at load time.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .constants import FARADAY
from .errors import ConfigError
from .ocp import OCPCurve, bundled_ocp, load_ocp_file


@dataclass
class ElectrodeParameters:
    c_s_max: float          # max solid concentration [mol/m^3]
    d_s: float              # solid diffusivity [m^2/s]
    r_p: float              # particle radius [m]
    thickness: float        # electrode thickness [m]
    k_0: float              # reaction rate constant (i0 = k_0*F*sqrt(c_e*c_ss*(c_max-c_ss)))
    alpha: float            # charge-transfer coefficient
    ocp: OCPCurve
    youngs_modulus: float   # [Pa]
    poisson_ratio: float
    partial_molar_volume: float  # [m^3/mol]
    sigma_critical: float   # [Pa]
    stoich_window: tuple[float, float]  # stoichiometry at SOC 0 and SOC 1
    eps_s0: float = field(default=0.0)  # derived from C_nom at load

    def __post_init__(self):
        if self.c_s_max <= 0:
            raise ConfigError("c_s_max must be positive")
        if self.r_p <= 0 or self.thickness <= 0:
            raise ConfigError("particle radius and thickness must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("charge-transfer coefficient must lie in (0, 1)")
        lo, hi = self.stoich_window
        if not (0.0 <= lo < hi <= 1.0) and not (0.0 <= hi < lo <= 1.0):
            raise ConfigError("stoichiometry window endpoints must lie in [0, 1]")

    @property
    def stress_prefactor(self) -> float:
        """2*Omega*E / (9*(1-nu)), Pa per (mol/m^3) of concentration contrast."""
        return (2.0 * self.partial_molar_volume * self.youngs_modulus
                / (9.0 * (1.0 - self.poisson_ratio)))


@dataclass
class SEIParameters:
    k_sei: float            # kinetic rate constant [m/s]
    d_sei: float            # solvent diffusivity through the film [m^2/s]
    alpha_sei: float
    u_sei: float            # reaction potential [V]
    kappa_sei: float        # film ionic conductivity [S/m]
    omega_sei: float        # film partial molar volume [m^3/mol]
    c_ec_bulk: float        # bulk solvent concentration [mol/m^3]
    delta_sei0: float       # initial film thickness [m]

    def __post_init__(self):
        for name in ("k_sei", "d_sei", "u_sei", "kappa_sei", "omega_sei",
                     "c_ec_bulk", "delta_sei0"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"SEI parameter {name} must be strictly positive")
        if not 0.0 < self.alpha_sei < 1.0:
            raise ConfigError("alpha_sei must lie in (0, 1)")


@dataclass
class PlatingParameters:
    k_0_pl: float           # kinetic rate constant [m/s]
    kappa_pl: float         # plated-lithium conductivity [S/m]
    omega_pl: float         # plated-lithium partial molar volume [m^3/mol]
    gamma_ce: float = 0.2   # electrolyte-concentration boost per unit C-rate
    phi_e_shift: float = 0.0  # electrolyte polarization [V per unit C-rate], charging

    def __post_init__(self):
        if self.k_0_pl <= 0 or self.kappa_pl <= 0 or self.omega_pl <= 0:
            raise ConfigError("plating constants must be strictly positive")


@dataclass
class DissolutionParameters:
    i_0_diss: float         # exchange current density [A/m^2]; 0 disables
    e_eq_diss: float = 4.0  # equilibrium potential [V]

    def __post_init__(self):
        if self.i_0_diss < 0:
            raise ConfigError("i_0_diss must be >= 0")


@dataclass
class CrackParameters:
    beta_neg: float         # fatigue rate coefficient, negative electrode [1/s]
    beta_pos: float         # fatigue rate coefficient, positive electrode [1/s]
    m_crack: float          # fatigue exponent

    def __post_init__(self):
        if self.beta_neg < 0 or self.beta_pos < 0:
            raise ConfigError("crack rate coefficients must be >= 0")
        if self.m_crack < 1.0:
            raise ConfigError("m_crack must be >= 1")


@dataclass
class CellParameters:
    name: str
    c_nom: float            # nominal capacity [Ah]
    area: float             # electrode plate area [m^2]
    neg: ElectrodeParameters
    pos: ElectrodeParameters
    c_e: float              # electrolyte concentration [mol/m^3]
    temperature: float      # [K]
    r_ohmic0: float         # fresh lumped ohmic resistance [Ohm]
    sei: SEIParameters
    plating: PlatingParameters
    dissolution: DissolutionParameters
    crack: CrackParameters
    charge_v_guard: float = 4.2  # CC charge voltage guard [V]

    def __post_init__(self):
        if self.c_nom <= 0 or self.area <= 0 or self.temperature <= 0:
            raise ConfigError("C_nom, area and temperature must be positive")
        self._derive()

    def _derive(self):
        """Fill eps_s0 from nominal capacity and attach the voltage window."""
        x0, x100 = self.neg.stoich_window
        y0, y100 = self.pos.stoich_window
        if not x100 > x0:
            raise ConfigError("negative stoich window must have x100 > x0")
        if not y0 > y100:
            raise ConfigError("positive stoich window must have y0 > y100")
        self.c_n_bol = self.c_nom / (x100 - x0)   # full electrode capacity [Ah]
        self.c_p_bol = self.c_nom / (y0 - y100)
        for elec, cap in ((self.neg, self.c_n_bol), (self.pos, self.c_p_bol)):
            eps = cap * 3600.0 / (FARADAY * self.area * elec.thickness * elec.c_s_max)
            if not 0.0 < eps <= 1.0:
                raise ConfigError(
                    f"derived active-material ratio {eps:.3f} outside (0, 1]; "
                    "check capacity/thickness/c_s_max consistency")
            elec.eps_s0 = eps
        # cyclable lithium at beginning of life, in Ah units (n_li * F / 3600)
        self.n_li_bol_ah = x100 * self.c_n_bol + y100 * self.c_p_bol
        self.v_max = float(self.pos.ocp(y100) - self.neg.ocp(x100))
        self.v_min = float(self.pos.ocp(y0) - self.neg.ocp(x0))

    @property
    def n_li_bol(self) -> float:
        """Cyclable lithium at beginning of life [mol]."""
        return self.n_li_bol_ah * 3600.0 / FARADAY


def _require(section: dict, key: str, context: str):
    if key not in section:
        raise ConfigError(f"{context}: missing key {key!r}")
    return section[key]


def _electrode_from_dict(sec: dict, which: str, base_dir: Path | None) -> ElectrodeParameters:
    ctx = f"{which} electrode"
    ocp_ref = _require(sec, "ocp", ctx)
    if isinstance(ocp_ref, str) and not ocp_ref.endswith((".csv", ".txt")):
        curve = bundled_ocp(ocp_ref)
    else:
        path = Path(ocp_ref)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        curve = load_ocp_file(path)
    return ElectrodeParameters(
        c_s_max=float(_require(sec, "c_s_max_mol_per_m3", ctx)),
        d_s=float(_require(sec, "diffusivity_m2_per_s", ctx)),
        r_p=float(_require(sec, "particle_radius_m", ctx)),
        thickness=float(_require(sec, "thickness_m", ctx)),
        k_0=float(_require(sec, "reaction_rate_constant", ctx)),
        alpha=float(sec.get("charge_transfer_coeff", 0.5)),
        ocp=curve,
        youngs_modulus=float(_require(sec, "youngs_modulus_pa", ctx)),
        poisson_ratio=float(_require(sec, "poisson_ratio", ctx)),
        partial_molar_volume=float(_require(sec, "partial_molar_volume_m3_per_mol", ctx)),
        sigma_critical=float(_require(sec, "critical_stress_pa", ctx)),
        stoich_window=(float(_require(sec, "stoich_at_soc0", ctx)),
                       float(_require(sec, "stoich_at_soc1", ctx))),
    )


def cell_from_dict(doc: dict, base_dir: Path | None = None) -> CellParameters:
    """Build CellParameters from a parsed YAML document."""
    try:
        sei_sec = _require(doc, "sei", "cell file")
        pl_sec = _require(doc, "plating", "cell file")
        diss_sec = _require(doc, "dissolution", "cell file")
        crack_sec = _require(doc, "cracking", "cell file")
        return CellParameters(
            name=str(_require(doc, "name", "cell file")),
            c_nom=float(_require(doc, "nominal_capacity_ah", "cell file")),
            area=float(_require(doc, "electrode_area_m2", "cell file")),
            neg=_electrode_from_dict(_require(doc, "negative_electrode", "cell file"),
                                     "negative", base_dir),
            pos=_electrode_from_dict(_require(doc, "positive_electrode", "cell file"),
                                     "positive", base_dir),
            c_e=float(doc.get("electrolyte_conc_mol_per_m3", 1000.0)),
            temperature=float(_require(doc, "temperature_c", "cell file")) + 273.15,
            r_ohmic0=float(_require(doc, "r_ohmic_ohm", "cell file")),
            sei=SEIParameters(
                k_sei=float(_require(sei_sec, "k_sei_m_per_s", "sei")),
                d_sei=float(_require(sei_sec, "d_sei_m2_per_s", "sei")),
                alpha_sei=float(sei_sec.get("alpha_sei", 0.5)),
                u_sei=float(_require(sei_sec, "u_sei_v", "sei")),
                kappa_sei=float(_require(sei_sec, "kappa_sei_s_per_m", "sei")),
                omega_sei=float(_require(sei_sec, "omega_sei_m3_per_mol", "sei")),
                c_ec_bulk=float(_require(sei_sec, "c_ec_bulk_mol_per_m3", "sei")),
                delta_sei0=float(_require(sei_sec, "initial_thickness_m", "sei")),
            ),
            plating=PlatingParameters(
                k_0_pl=float(_require(pl_sec, "k0_pl_m_per_s", "plating")),
                kappa_pl=float(_require(pl_sec, "kappa_pl_s_per_m", "plating")),
                omega_pl=float(_require(pl_sec, "omega_pl_m3_per_mol", "plating")),
                gamma_ce=float(pl_sec.get("electrolyte_gradient_per_crate", 0.2)),
                phi_e_shift=float(pl_sec.get("electrolyte_polarization_v_per_crate", 0.0)),
            ),
            dissolution=DissolutionParameters(
                i_0_diss=float(_require(diss_sec, "i0_diss_a_per_m2", "dissolution")),
                e_eq_diss=float(diss_sec.get("e_eq_diss_v", 4.0)),
            ),
            crack=CrackParameters(
                beta_neg=float(_require(crack_sec, "beta_neg_per_s", "cracking")),
                beta_pos=float(_require(crack_sec, "beta_pos_per_s", "cracking")),
                m_crack=float(_require(crack_sec, "m_crack", "cracking")),
            ),
            charge_v_guard=float(doc.get("charge_v_guard_v", 4.2)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cell file: {exc}") from exc


def load_cell(path) -> CellParameters:
    """Load a cell parameter YAML file."""
    path = Path(path)
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: not a mapping")
    return cell_from_dict(doc, base_dir=path.parent)


def bundled_cell_names() -> list[str]:
    root = importlib.resources.files("cellwear").joinpath("data/cells")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def bundled_cell(name: str) -> CellParameters:
    """Load a packaged cell family by name (e.g. 'nmc111')."""
    res = importlib.resources.files("cellwear").joinpath(f"data/cells/{name}.yaml")
    if not res.is_file():
        raise ConfigError(
            f"no bundled cell named {name!r}; available: {bundled_cell_names()}")
    with importlib.resources.as_file(res) as path:
        return load_cell(path)


def resolve_cell(ref: str) -> CellParameters:
    """Accept either a bundled family name or a path to a YAML file."""
    if ref.endswith((".yaml", ".yml")) or "/" in ref:
        return load_cell(ref)
    return bundled_cell(ref)
