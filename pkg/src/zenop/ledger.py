"""Emission and compensation accounting recomputed from dispatch values alone."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .domain import Catalog

# annual emissions of the two published design cases, tCO2 (reference lines only)
REFERENCE_LINES_T = {"Base": 11.69, "PVlim": 5.25}

LEDGER_COLUMNS = ["hour", "weight", "emissions_g", "compensations_g", "cum_emissions_g", "cum_compensations_g"]


class LedgerError(ValueError):
    pass


def _split(col: str) -> tuple[str, str]:
    family, unit = col.split(":", 1)
    return family, unit.split("@", 1)[0]


def account(dispatch: pd.DataFrame, catalog: Catalog) -> pd.DataFrame:
    """Hourly emissions and compensations (gCO2) with weighted running sums.

    Emissions: grid imports (direct and into batteries) at the hourly grid
    factor plus fuel use at each fuel's factor.  Compensations: generator
    exports and battery exports (after discharge losses) at the grid factor.
    """
    phi = dispatch["phi_el"].to_numpy(dtype=float)
    n = len(phi)
    weight = dispatch["weight"].to_numpy(dtype=float) if "weight" in dispatch else np.ones(n)
    imports = dispatch["y_imp"].to_numpy(dtype=float).copy() if "y_imp" in dispatch else np.zeros(n)
    exports = np.zeros(n)
    fuel_em = np.zeros(n)
    for col in dispatch.columns:
        if ":" not in col:
            continue
        family, item = _split(col)
        values = dispatch[col].to_numpy(dtype=float)
        if family == "y_imp_est":
            imports += values
        elif family == "y_exp_est":
            if item not in catalog.storages:
                raise LedgerError(f"unknown storage {item!r} in column {col}")
            exports += catalog.storages[item].eta_oneway * values
        elif family == "g_exp":
            exports += values
        elif family == "f":
            tech = catalog.technologies.get(item)
            fuel = catalog.fuels.get(tech.fuel_id) if tech is not None and tech.fuel_id else None
            if fuel is None:
                raise LedgerError(f"missing fuel CO2 factor for dispatched column {col}")
            fuel_em += np.asarray(fuel.co2_factor, dtype=float) * values
    emissions = phi * imports + fuel_em
    compensations = phi * exports
    hour = dispatch["hour"].to_numpy() if "hour" in dispatch else np.arange(n)
    return pd.DataFrame(
        {
            "hour": hour,
            "weight": weight,
            "emissions_g": emissions,
            "compensations_g": compensations,
            "cum_emissions_g": np.cumsum(weight * emissions),
            "cum_compensations_g": np.cumsum(weight * compensations),
        }
    )


def totals(ledger: pd.DataFrame) -> tuple[float, float]:
    w = ledger["weight"].to_numpy()
    return float(w @ ledger["emissions_g"].to_numpy()), float(w @ ledger["compensations_g"].to_numpy())


def zeb_gap(ledger: pd.DataFrame) -> float:
    """Annual emissions minus compensations; <= 0 means the balance holds."""
    em, comp = totals(ledger)
    return em - comp


def compare_runs(runs: list[dict], reference_lines: dict[str, float] | None = None) -> pd.DataFrame:
    """One row per run with cost, emissions, compensations, gap and slack.

    Each run is a dict with ``ledger`` and optional ``name``, ``strategy``,
    ``year``, ``total_cost`` and ``slack``.  Rows of the same year get a
    ``cost_vs_pf`` ratio when a perfect-foresight row exists.  Reference
    lines (tCO2) are attached as ``table.attrs["reference_lines_t"]``.
    """
    rows = []
    for i, r in enumerate(runs):
        em, comp = totals(r["ledger"])
        rows.append(
            {
                "run": r.get("name", f"run{i}"),
                "strategy": r.get("strategy", ""),
                "year": r.get("year"),
                "total_cost": float(r.get("total_cost", np.nan)),
                "emissions_t": em / 1e6,
                "compensations_t": comp / 1e6,
                "zeb_gap_g": em - comp,
                "slack_g": float(r.get("slack", 0.0)),
            }
        )
    table = pd.DataFrame(rows)
    if not len(table):
        return table
    ratio = np.full(len(table), np.nan)
    for year, grp in table.groupby(table["year"].astype(str)):
        pf = grp[grp["strategy"] == "pf"]["total_cost"]
        if len(pf) and pf.iloc[0] != 0:
            ratio[grp.index] = grp["total_cost"] / pf.iloc[0]
    table["cost_vs_pf"] = ratio
    table["balance_met"] = table["zeb_gap_g"] <= 1e-3
    if reference_lines:
        table.attrs["reference_lines_t"] = dict(reference_lines)
    return table


def write_report(table: pd.DataFrame, path) -> list[Path]:
    """CSV table plus a JSON sidecar with reference-line metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False)
    meta = path.with_suffix(".meta.json")
    meta.write_text(json.dumps({"reference_lines_t": table.attrs.get("reference_lines_t", {})}, indent=2))
    return [path, meta]
