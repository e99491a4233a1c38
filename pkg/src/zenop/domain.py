"""Catalog types, neighbourhood description and pre-optimisation parameters."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

logger = logging.getLogger(__name__)

HOURS_PER_DAY = 24
HOURS_PER_YEAR = 8760
LOAD_ROLES = ("electric", "sh", "dhw")
WEATHER_ROLES = ("spot", "co2_el", "temperature", "irradiance")
ELECTRICITY = "electricity"


class CatalogError(ValueError):
    """Inconsistent technology, fuel, storage or topology data."""


class TechKind(str, Enum):
    FUEL_BURNER = "fuel_burner"
    ELECTRIC_HEATER = "electric_heater"
    CHP = "chp"
    PV = "pv"
    SOLAR_THERMAL = "solar_thermal"
    HEAT_PUMP = "heat_pump"


class Scope(str, Enum):
    BUILDING = "building"
    NEIGHBORHOOD = "neighborhood"


class Medium(str, Enum):
    HEAT = "heat"
    ELECTRIC = "electric"


@dataclass(frozen=True)
class TechnologySpec:
    id: str
    kind: TechKind
    scope: Scope
    produces_heat: bool
    produces_electricity: bool
    can_serve_dhw: bool
    eta: float = 1.0
    alpha_chp: float = 0.0
    alpha_partload: float = 0.0
    x_min: float = 0.0
    x_max: float = 5000.0
    cost_fix: float = 0.0
    cost_var: float = 0.0
    om_frac: float = 0.0
    lifetime: int = 25
    fuel_id: str | None = None
    area_coeff: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TechKind(self.kind))
        object.__setattr__(self, "scope", Scope(self.scope))
        if not 0.0 < self.eta <= 1.15:
            raise CatalogError(f"{self.id}: eta={self.eta} outside (0, 1.15]")
        if not 0.0 <= self.alpha_partload <= 1.0:
            raise CatalogError(f"{self.id}: alpha_partload={self.alpha_partload} outside [0, 1]")
        if self.x_min > self.x_max:
            raise CatalogError(f"{self.id}: x_min > x_max")
        if (self.alpha_chp > 0) != (self.kind is TechKind.CHP):
            raise CatalogError(f"{self.id}: alpha_chp must be positive exactly for CHP units")
        solar = self.kind in (TechKind.PV, TechKind.SOLAR_THERMAL)
        if solar != (self.area_coeff is not None and self.area_coeff > 0):
            raise CatalogError(f"{self.id}: area_coeff must be positive exactly for solar units")
        if self.lifetime < 1:
            raise CatalogError(f"{self.id}: lifetime must be >= 1")
        if self.kind in (TechKind.FUEL_BURNER, TechKind.CHP) and not self.fuel_id:
            raise CatalogError(f"{self.id}: fuel-burning unit without fuel_id")

    @property
    def has_partload_binary(self) -> bool:
        return self.kind is not TechKind.HEAT_PUMP and self.alpha_partload > 0

    @property
    def uses_electricity(self) -> bool:
        return self.kind in (TechKind.ELECTRIC_HEATER, TechKind.HEAT_PUMP)


@dataclass(frozen=True)
class FuelSpec:
    id: str
    price: float | np.ndarray = 0.0
    co2_factor: float | np.ndarray = 0.0

    def __post_init__(self):
        if np.isscalar(self.price) and self.price < 0:
            raise CatalogError(f"fuel {self.id}: negative price")
        if np.any(np.asarray(self.co2_factor) < 0):
            raise CatalogError(f"fuel {self.id}: negative CO2 factor")


@dataclass(frozen=True)
class StorageSpec:
    id: str
    medium: Medium
    eta_oneway: float
    cost_per_kwh: float = 0.0
    om_frac: float = 0.0
    lifetime: int = 20
    cap_min: float = 0.0
    rate_frac: float = 1.0
    cap_max: float = 1.0e6

    def __post_init__(self):
        object.__setattr__(self, "medium", Medium(self.medium))
        if not 0.0 < self.eta_oneway <= 1.0:
            raise CatalogError(f"storage {self.id}: eta_oneway outside (0, 1]")
        if not 0.0 < self.rate_frac <= 1.0:
            raise CatalogError(f"storage {self.id}: rate_frac outside (0, 1]")
        if self.cap_min > self.cap_max:
            raise CatalogError(f"storage {self.id}: cap_min > cap_max")


@dataclass(frozen=True)
class PanelParams:
    """PV module and inverter data. Defaults are generic crystalline-silicon assumptions."""

    t_noct: float = 45.0
    t_coef: float = 0.004
    t_stc: float = 25.0
    eta_inv: float = 0.97
    g_stc: float = 1000.0


@dataclass(frozen=True)
class CopCurve:
    """Piecewise-linear COP and max-input maps of a 1 kW heat pump vs outdoor temperature."""

    temperatures: tuple[float, ...]
    cop_sh: tuple[float, ...]
    cop_dhw: tuple[float, ...]
    pmax_sh: tuple[float, ...]
    pmax_dhw: tuple[float, ...]

    def __post_init__(self):
        n = len(self.temperatures)
        if n == 0 or any(len(getattr(self, f)) != n for f in ("cop_sh", "cop_dhw", "pmax_sh", "pmax_dhw")):
            raise CatalogError("COP curve columns must be non-empty and of equal length")
        if list(self.temperatures) != sorted(self.temperatures):
            raise CatalogError("COP curve temperatures must be ascending")
        if min(self.cop_sh + self.cop_dhw) <= 1.0:
            raise CatalogError("COP must exceed 1")
        if not all(0.0 < p <= 1.0 for p in self.pmax_sh + self.pmax_dhw):
            raise CatalogError("P_input_max must lie in (0, 1]")


@dataclass(frozen=True)
class CopProfile:
    cop_sh: np.ndarray
    cop_dhw: np.ndarray
    pmax_sh: np.ndarray
    pmax_dhw: np.ndarray


@dataclass
class Catalog:
    technologies: dict[str, TechnologySpec]
    fuels: dict[str, FuelSpec]
    storages: dict[str, StorageSpec]
    panel: PanelParams = field(default_factory=PanelParams)
    cop_model: dict[str, CopCurve] = field(default_factory=dict)

    def __post_init__(self):
        for t in self.technologies.values():
            if t.fuel_id and t.fuel_id not in self.fuels:
                raise CatalogError(f"{t.id}: unknown fuel {t.fuel_id!r}")

    def fuel_co2(self, tech_id: str) -> float:
        fuel = self.technologies[tech_id].fuel_id
        if fuel is None:
            raise CatalogError(f"{tech_id} has no fuel")
        return self.fuels[fuel].co2_factor

    def fuel_price(self, tech_id: str) -> float:
        return self.fuels[self.technologies[tech_id].fuel_id].price


@dataclass(frozen=True)
class Building:
    id: str
    roof_area: float = 0.0
    allowed_techs: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "allowed_techs", frozenset(self.allowed_techs))


@dataclass(frozen=True)
class Pipe:
    source: str
    target: str
    loss: float = 0.0
    max_flow: float = 1000.0

    def __post_init__(self):
        if self.loss < 0:
            raise CatalogError(f"pipe {self.source}->{self.target}: negative loss")
        if self.max_flow <= 0:
            raise CatalogError(f"pipe {self.source}->{self.target}: max_flow must be positive")


@dataclass(frozen=True)
class HeatingGridTopology:
    pipes: tuple[Pipe, ...] = ()
    hg_cost: float = 0.0
    plant_id: str = "PP"


@dataclass(frozen=True)
class EconomicParams:
    discount_rate: float = 0.04
    study_years: int = 60
    grid_tariff: float = 0.05
    retail_tariff: float = 0.01
    grid_connection: float = 1000.0
    big_m: float = 1.0e5
    gc_mode: str = "sum"

    def __post_init__(self):
        if not 0.0 < self.discount_rate < 1.0:
            raise CatalogError("discount_rate must lie in (0, 1)")
        if self.study_years < 1:
            raise CatalogError("study_years must be >= 1")
        if self.grid_connection <= 0:
            raise CatalogError("grid_connection must be positive")
        if self.gc_mode not in ("sum", "separate"):
            raise CatalogError("gc_mode must be 'sum' or 'separate'")


@dataclass
class Neighborhood:
    """Static description of the site: buildings, plant, grid and catalog."""

    buildings: list[Building]
    catalog: Catalog
    econ: EconomicParams = field(default_factory=EconomicParams)
    topology: HeatingGridTopology | None = None

    def __post_init__(self):
        ids = [b.id for b in self.buildings]
        if len(set(ids)) != len(ids):
            raise CatalogError("duplicate building ids")
        known = set(self.catalog.technologies) | set(self.catalog.storages)
        for b in self.buildings:
            missing = set(b.allowed_techs) - known
            if missing:
                raise CatalogError(f"building {b.id}: unknown technologies {sorted(missing)}")
            for tid in b.allowed_techs & set(self.catalog.technologies):
                tech = self.catalog.technologies[tid]
                on_plant = self.topology is not None and b.id == self.topology.plant_id
                if tech.scope is Scope.NEIGHBORHOOD and not on_plant:
                    raise CatalogError(f"{tid} is neighborhood-scale but assigned to building {b.id}")
        if self.topology is not None:
            if self.topology.plant_id not in ids:
                raise CatalogError(f"plant node {self.topology.plant_id!r} is not a building")
            for p in self.topology.pipes:
                for node in (p.source, p.target):
                    if node not in ids:
                        raise CatalogError(f"pipe references unknown node {node!r}")
                if p.target == self.topology.plant_id:
                    raise CatalogError("pipes may not feed the plant node")

    @property
    def plant_id(self) -> str | None:
        return self.topology.plant_id if self.topology else None

    def building(self, bid: str) -> Building:
        for b in self.buildings:
            if b.id == bid:
                return b
        raise KeyError(bid)

    def load_buildings(self) -> list[Building]:
        return [b for b in self.buildings if b.id != self.plant_id]


# --------------------------------------------------------------------------
# economics


def annuity_factor(r: float, years: int) -> float:
    """Present value of 1 per year for ``years`` years at rate ``r``."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"discount rate {r} outside (0, 1)")
    if years < 1:
        raise ValueError("years must be >= 1")
    return (1.0 - (1.0 + r) ** (-years)) / r


def reinvestment_factor(lifetime: int, r: float, years: int) -> float:
    """Discounted multiplier on an up-front cost, with re-investments and salvage.

    Units are replaced every ``lifetime`` years while the study lasts; the last
    unit's unused share is credited straight-line at the study horizon.
    """
    if lifetime < 1:
        raise ValueError("lifetime must be >= 1")
    n = 0
    total = 0.0
    while n * lifetime < years:
        total += (1.0 + r) ** (-n * lifetime)
        n += 1
    used = years - (n - 1) * lifetime
    salvage = (1.0 - used / lifetime) * (1.0 + r) ** (-years)
    return total - salvage


def discounted_investment_cost(spec: TechnologySpec | StorageSpec, econ: EconomicParams) -> tuple[float, float]:
    """(variable cost per kW or kWh, fixed cost) discounted to the study start."""
    f = reinvestment_factor(spec.lifetime, econ.discount_rate, econ.study_years)
    if isinstance(spec, StorageSpec):
        return spec.cost_per_kwh * f, 0.0
    return spec.cost_var * f, spec.cost_fix * f


def maintenance_cost(spec: TechnologySpec | StorageSpec) -> float:
    """Annual O&M per kW (or kWh of storage)."""
    base = spec.cost_per_kwh if isinstance(spec, StorageSpec) else spec.cost_var
    return spec.om_frac * base


# --------------------------------------------------------------------------
# derived hourly parameters


def pv_efficiency_profile(temperature, irradiance, panel: PanelParams = PanelParams()) -> np.ndarray:
    """Hourly PV conversion factor; production is ``eta * x_pv * irradiance``."""
    t = np.asarray(temperature, dtype=float)
    irr = np.asarray(irradiance, dtype=float)
    if np.any(irr < 0):
        raise ValueError("irradiance must be non-negative")
    t_cell = t + (panel.t_noct - 20.0) * irr / 800.0
    eta = panel.eta_inv / panel.g_stc * (1.0 - panel.t_coef * (t_cell - panel.t_stc))
    if np.any(eta < 0):
        logger.warning("PV efficiency negative in %d hours (cell too hot); clamped to 0", int(np.sum(eta < 0)))
        eta = np.maximum(eta, 0.0)
    return eta


def cop_profiles(model: dict[str, CopCurve], temperature, tech_ids) -> dict[str, CopProfile]:
    """Interpolate COP and max-input curves; temperatures outside the table are clamped."""
    t = np.asarray(temperature, dtype=float)
    out = {}
    for tid in tech_ids:
        if tid not in model:
            raise CatalogError(f"heat pump {tid!r} has no COP model entry")
        c = model[tid]
        xs = np.asarray(c.temperatures)
        # np.interp clamps to the end values outside the breakpoints
        out[tid] = CopProfile(
            cop_sh=np.interp(t, xs, c.cop_sh),
            cop_dhw=np.interp(t, xs, c.cop_dhw),
            pmax_sh=np.interp(t, xs, c.pmax_sh),
            pmax_dhw=np.interp(t, xs, c.pmax_dhw),
        )
    return out


# --------------------------------------------------------------------------
# catalog file IO


def _clean(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, Enum):
            v = v.value
        elif isinstance(v, tuple):
            v = list(v)
        elif isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, np.generic):
            v = v.item()
        out[k] = v
    return out


def catalog_to_dict(cat: Catalog) -> dict:
    return {
        "technologies": [_clean(asdict(t)) for t in cat.technologies.values()],
        "fuels": [_clean(asdict(f)) for f in cat.fuels.values()],
        "storages": [_clean(asdict(s)) for s in cat.storages.values()],
        "panel": _clean(asdict(cat.panel)),
        "cop_model": {k: _clean(asdict(v)) for k, v in cat.cop_model.items()},
    }


def _only_fields(cls, d: dict) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise CatalogError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    return d


def catalog_from_dict(d: dict) -> Catalog:
    techs = {t["id"]: TechnologySpec(**_only_fields(TechnologySpec, t)) for t in d.get("technologies", [])}
    fuels = {f["id"]: FuelSpec(**_only_fields(FuelSpec, f)) for f in d.get("fuels", [])}
    stor = {s["id"]: StorageSpec(**_only_fields(StorageSpec, s)) for s in d.get("storages", [])}
    panel = PanelParams(**d.get("panel", {}))
    cops = {
        k: CopCurve(**{f: tuple(v[f]) for f in ("temperatures", "cop_sh", "cop_dhw", "pmax_sh", "pmax_dhw")})
        for k, v in d.get("cop_model", {}).items()
    }
    return Catalog(techs, fuels, stor, panel, cops)


def load_catalog(path) -> Catalog:
    with open(path) as fh:
        return catalog_from_dict(yaml.safe_load(fh))


def dump_catalog(cat: Catalog, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(catalog_to_dict(cat), fh, sort_keys=False)


def default_catalog() -> Catalog:
    """Technology, fuel and storage data of the Norwegian campus case."""
    text = resources.files("zenop.data").joinpath("catalog.yaml").read_text()
    return catalog_from_dict(yaml.safe_load(text))


def neighborhood_from_dict(d: dict, catalog: Catalog) -> Neighborhood:
    buildings = [
        Building(b["id"], float(b.get("roof_area", 0.0)), frozenset(b.get("allowed_techs", [])))
        for b in d["buildings"]
    ]
    econ = EconomicParams(**d.get("economics", {}))
    topo = None
    if d.get("topology"):
        t = d["topology"]
        topo = HeatingGridTopology(
            pipes=tuple(Pipe(**p) for p in t.get("pipes", [])),
            hg_cost=float(t.get("hg_cost", 0.0)),
            plant_id=t.get("plant_id", "PP"),
        )
    return Neighborhood(buildings, catalog, econ, topo)


def neighborhood_to_dict(nb: Neighborhood) -> dict:
    d = {
        "buildings": [
            {"id": b.id, "roof_area": b.roof_area, "allowed_techs": sorted(b.allowed_techs)} for b in nb.buildings
        ],
        "economics": _clean(asdict(nb.econ)),
    }
    if nb.topology:
        d["topology"] = {
            "plant_id": nb.topology.plant_id,
            "hg_cost": nb.topology.hg_cost,
            "pipes": [_clean(asdict(p)) for p in nb.topology.pipes],
        }
    return d


def read_yaml(path) -> dict:
    with open(Path(path)) as fh:
        return yaml.safe_load(fh)


# --------------------------------------------------------------------------
# hourly data handed to the optimisation models


@dataclass(frozen=True)
class Block:
    """Contiguous run of hours; cyclic blocks wrap storage from last to first hour."""

    start: int
    length: int
    cyclic: bool = False


@dataclass
class HourlyProfile:
    """Hour-indexed inputs for one model: a chronological window, clusters, or both."""

    spot: np.ndarray
    co2_el: np.ndarray
    temperature: np.ndarray
    irradiance: np.ndarray
    loads: dict[str, dict[str, np.ndarray]]
    weight: np.ndarray
    blocks: list[Block]
    hour: np.ndarray
    cluster: np.ndarray

    @property
    def n_hours(self) -> int:
        return len(self.spot)

    def predecessor(self) -> np.ndarray:
        """Index of the previous hour for storage dynamics, -1 where the initial level applies."""
        prev = np.arange(self.n_hours) - 1
        for b in self.blocks:
            prev[b.start] = b.start + b.length - 1 if b.cyclic else -1
        return prev

    def load(self, building: str, role: str) -> np.ndarray:
        try:
            return self.loads[building][role]
        except KeyError:
            return np.zeros(self.n_hours)


def concat_profiles(*profiles: HourlyProfile) -> HourlyProfile:
    profiles = [p for p in profiles if p.n_hours > 0]
    if len(profiles) == 1:
        return profiles[0]
    buildings = sorted({b for p in profiles for b in p.loads})
    loads = {
        b: {r: np.concatenate([p.load(b, r) for p in profiles]) for r in LOAD_ROLES} for b in buildings
    }
    blocks = []
    offset = 0
    for p in profiles:
        blocks += [Block(b.start + offset, b.length, b.cyclic) for b in p.blocks]
        offset += p.n_hours

    def cat(name):
        return np.concatenate([getattr(p, name) for p in profiles])

    return HourlyProfile(
        cat("spot"), cat("co2_el"), cat("temperature"), cat("irradiance"), loads,
        cat("weight"), blocks, cat("hour"), cat("cluster"),
    )
