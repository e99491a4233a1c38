"""Small hand-made neighbourhoods and scenario years shared by the tests."""

from __future__ import annotations

import numpy as np

from zenop.domain import (
    Building,
    Catalog,
    CopCurve,
    EconomicParams,
    FuelSpec,
    HeatingGridTopology,
    Neighborhood,
    PanelParams,
    Pipe,
    StorageSpec,
    TechnologySpec,
)
from zenop.ingest import ScenarioYear

# temperature-insensitive panel with a unit inverter: g = x * irr / 1000
FLAT_PANEL = PanelParams(t_coef=0.0, eta_inv=1.0)


def series(n_hours: int, value) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.ndim == 0:
        return np.full(n_hours, float(v))
    reps = -(-n_hours // len(v))
    return np.tile(v, reps)[:n_hours]


def make_year(
    n_days: int = 1,
    spot=0.05,
    co2=100.0,
    temp=0.0,
    irr=0.0,
    electric=0.0,
    sh=0.0,
    dhw=0.0,
    buildings=("B1",),
    year: int = 2016,
    reference: bool = False,
) -> ScenarioYear:
    n = 24 * n_days
    loads = {b: {"electric": series(n, electric), "sh": series(n, sh), "dhw": series(n, dhw)} for b in buildings}
    return ScenarioYear(year, series(n, spot), series(n, co2), series(n, temp), series(n, irr), loads, reference)


def micro_catalog(
    battery_eta: float = 1.0, battery_rate: float = 0.5, heater_alpha: float = 0.0, boiler_alpha: float = 0.0
) -> Catalog:
    techs = {
        "pv": TechnologySpec("pv", "pv", "building", False, True, False, x_max=1e4, cost_var=730,
                             lifetime=35, area_coeff=5.3),
        "el_heater": TechnologySpec("el_heater", "electric_heater", "building", True, False, True, eta=1.0,
                                    alpha_partload=heater_alpha, cost_var=100, lifetime=30),
        "gas_boiler": TechnologySpec("gas_boiler", "fuel_burner", "building", True, False, True, eta=1.0,
                                     alpha_partload=boiler_alpha, cost_var=100, lifetime=30, fuel_id="gas"),
        "hp": TechnologySpec("hp", "heat_pump", "building", True, False, True, eta=1.0, cost_var=100, lifetime=30),
        "chp": TechnologySpec("chp", "chp", "neighborhood", True, True, True, eta=0.5, alpha_chp=1.0,
                              alpha_partload=0.5, cost_var=1000, lifetime=25, fuel_id="biogas"),
    }
    fuels = {
        "gas": FuelSpec("gas", 0.07, 200.0),
        "biogas": FuelSpec("biogas", 0.07, 0.0),
    }
    storages = {
        "battery": StorageSpec("battery", "electric", battery_eta, cost_per_kwh=500, lifetime=15,
                               rate_frac=battery_rate, cap_max=1000),
        "tank": StorageSpec("tank", "heat", 1.0, cost_per_kwh=50, lifetime=20, rate_frac=0.5, cap_max=1000),
    }
    flat = CopCurve((-30.0, 30.0), (3.0, 3.0), (3.0, 3.0), (1.0, 1.0), (1.0, 1.0))
    return Catalog(techs, fuels, storages, FLAT_PANEL, {"hp": flat})


def micro_site(techs, catalog: Catalog | None = None, gc: float = 1000.0, roof: float = 1e5, **econ) -> Neighborhood:
    return Neighborhood(
        [Building("B1", roof, frozenset(techs))],
        catalog or micro_catalog(),
        EconomicParams(grid_connection=gc, **econ),
    )


def micro_grid_site(techs, plant_techs=("chp",), loss: float = 1.0, catalog: Catalog | None = None,
                    gc: float = 1000.0) -> Neighborhood:
    return Neighborhood(
        [Building("B1", 1e5, frozenset(techs)), Building("PP", 0.0, frozenset(plant_techs))],
        catalog or micro_catalog(),
        EconomicParams(grid_connection=gc),
        HeatingGridTopology((Pipe("PP", "B1", loss=loss, max_flow=500.0),), hg_cost=1000.0),
    )
