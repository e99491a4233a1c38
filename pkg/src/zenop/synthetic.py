"""Synthetic scenario years and neighbourhood fixtures.

Measured load data of the campus case is not public, so tests, examples
and the CLI demo run on generated years with a cold-climate shape: median
outdoor temperature around 5 degC, short winter days, heating-dominated
loads and an hourly grid CO2 factor that peaks in winter evenings.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .domain import (
    HOURS_PER_DAY,
    Building,
    Catalog,
    EconomicParams,
    HeatingGridTopology,
    Neighborhood,
    Pipe,
    catalog_to_dict,
    default_catalog,
    neighborhood_to_dict,
)
from .ingest import ScenarioYear, write_series_csv
from .model import SystemDesign


def synthetic_year(
    year: int = 2016,
    buildings: dict[str, float] | None = None,
    n_days: int = 365,
    seed: int = 0,
    temp_mean: float = 6.0,
    temp_amplitude: float = 11.0,
    reference: bool = False,
) -> ScenarioYear:
    """Generate one year of weather, prices, grid CO2 factors and loads.

    ``buildings`` maps building id to a size factor (1.0 is roughly a
    5000 m2 institutional building).
    """
    buildings = {"B1": 1.0} if buildings is None else buildings
    rng = np.random.default_rng(seed)
    n = n_days * HOURS_PER_DAY
    h = np.arange(n) % HOURS_PER_DAY
    d = np.arange(n) // HOURS_PER_DAY
    season = np.cos(2 * np.pi * (d - 200) / 365.0)  # +1 mid-July, -1 mid-January

    # day-to-day weather persistence through an AR(1) anomaly
    anomaly = np.zeros(n_days)
    for i in range(1, n_days):
        anomaly[i] = 0.8 * anomaly[i - 1] + rng.normal(0, 2.0)
    temp = temp_mean + temp_amplitude * season + anomaly[d] - 3.0 * np.cos(2 * np.pi * (h - 3) / 24)
    temp += rng.normal(0, 0.7, n)

    daylength = 12.0 + 6.5 * season
    sunrise = 12.5 - daylength / 2
    frac = np.clip((h + 0.5 - sunrise) / np.maximum(daylength, 1e-9), 0, 1)
    clear = np.sin(np.pi * frac) ** 1.5 * (450 + 400 * (season + 1) / 2)
    cloud = np.clip(rng.beta(2.0, 1.6, n_days), 0.05, 1.0)
    irr = np.maximum(clear * cloud[d], 0.0)
    irr[(h + 0.5 < sunrise) | (h + 0.5 > sunrise + daylength)] = 0.0

    peak = np.exp(-0.5 * ((h - 8) / 1.5) ** 2) + 1.2 * np.exp(-0.5 * ((h - 18) / 2.0) ** 2)
    spot = 0.03 - 0.008 * season + 0.012 * peak + 0.004 * anomaly[d] / -2.0
    spot = np.maximum(spot + rng.normal(0, 0.003, n), 0.001)

    co2 = 110 - 45 * season + 40 * peak - 0.03 * irr + rng.normal(0, 8, n)
    co2 = np.maximum(co2, 5.0)

    loads = {}
    for bid, size in buildings.items():
        weekday = ((d % 7) < 5).astype(float)
        occupied = ((h >= 7) & (h <= 18)).astype(float) * (0.6 + 0.4 * weekday)
        el = size * (55 + 45 * occupied + 10 * peak) * (1 + rng.normal(0, 0.05, n))
        sh = size * 14.0 * np.maximum(15.0 - temp, 0.0) * (0.85 + 0.3 * occupied)
        dhw = size * (8 + 22 * np.exp(-0.5 * ((h - 7) / 1.2) ** 2) + 18 * np.exp(-0.5 * ((h - 19) / 1.5) ** 2))
        loads[bid] = {
            "electric": np.maximum(el, 0.0),
            "sh": np.maximum(sh, 0.0),
            "dhw": np.maximum(dhw * (1 + rng.normal(0, 0.05, n)), 0.0),
        }
    return ScenarioYear(year, spot, co2, temp, irr, loads, reference)


def fixture_catalog(binaries: bool = True) -> Catalog:
    """Shipped catalog; with ``binaries=False`` part-load limits are removed."""
    cat = default_catalog()
    if binaries:
        return cat
    techs = {k: replace(t, alpha_partload=0.0) for k, t in cat.technologies.items()}
    return Catalog(techs, cat.fuels, cat.storages, cat.panel, cat.cop_model)


def pvlim_like_case(binaries: bool = True, gc: float = 1000.0) -> tuple[Neighborhood, SystemDesign]:
    """Roof-limited PV, a biogas CHP at the plant and a pellet boiler in the building.

    Meeting the annual balance needs CHP exports, which cost money, so
    cost-only operation falls short on compensations.
    """
    cat = fixture_catalog(binaries)
    nb = Neighborhood(
        [
            Building("B1", 400.0, frozenset({"pv", "pellet_boiler", "el_heater", "battery1", "heat_storage1"})),
            Building("PP", 0.0, frozenset({"chp_biogas"})),
        ],
        cat,
        EconomicParams(grid_connection=gc),
        HeatingGridTopology((Pipe("PP", "B1", loss=2.0, max_flow=1000.0),), hg_cost=50000.0),
    )
    design = SystemDesign(
        {
            "pv@B1": 75.0,
            "pellet_boiler@B1": 450.0,
            "el_heater@B1": 450.0,
            "battery1@B1": 100.0,
            "heat_storage1@B1": 300.0,
            "chp_biogas@PP": 200.0,
        },
        heating_grid=True,
    )
    return nb, design


def base_like_case(gc: float = 1000.0) -> tuple[Neighborhood, SystemDesign]:
    """PV-heavy design whose exports alone exceed the annual emissions."""
    cat = default_catalog()
    nb = Neighborhood(
        [Building("B1", 1.0e5, frozenset({"pv", "ashp", "el_heater", "battery1"}))],
        cat,
        EconomicParams(grid_connection=gc),
    )
    design = SystemDesign({"pv@B1": 900.0, "ashp@B1": 250.0, "el_heater@B1": 400.0, "battery1@B1": 100.0})
    return nb, design


def write_demo_inputs(
    out_dir,
    years=(2016, 2017),
    seed: int = 0,
    case: str = "pvlim",
    n_days: int = 365,
    binaries: bool = True,
) -> Path:
    """Write scenario CSVs, catalog, site, design and a run manifest; returns the manifest path.

    Full years are written as one timestamped CSV per series role; shorter
    fixtures as a single aligned table per year.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    nb, design = pvlim_like_case(binaries) if case == "pvlim" else base_like_case()
    load_ids = [b.id for b in nb.load_buildings()]
    scenarios: dict[str, object] = {}
    for k, y in enumerate(years):
        sc = synthetic_year(y, {b: 1.0 for b in load_ids}, n_days=n_days, seed=seed + k, reference=(k == 0))
        if n_days < 365:
            sc.save_csv(out / f"scenario_{y}.csv")
            scenarios[str(y)] = f"scenario_{y}.csv"
            continue
        files = {}
        for role in sc.roles():
            p = out / str(y) / f"{role.replace(':', '_')}.csv"
            write_series_csv(p, y, sc.series(role))
            files[role] = str(p.relative_to(out))
        scenarios[str(y)] = files
    (out / "catalog.yaml").write_text(yaml.safe_dump(catalog_to_dict(nb.catalog), sort_keys=False))
    (out / "site.yaml").write_text(yaml.safe_dump(neighborhood_to_dict(nb), sort_keys=False))
    design.save(out / "design.yaml")
    manifest = {
        "catalog": "catalog.yaml",
        "site": "site.yaml",
        "scenarios": scenarios,
        "reference_year": int(years[0]),
        "seed": seed,
        "output": "runs",
    }
    path = out / "manifest.yaml"
    path.write_text(yaml.safe_dump(manifest, sort_keys=False))
    return path
