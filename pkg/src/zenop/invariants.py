"""Physical consistency checks of a dispatch, computed without the optimisation model.

Every check returns the largest violation in kWh (or in capacity units),
so a clean dispatch gives values near zero.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .domain import HourlyProfile, Medium, Neighborhood, TechKind
from .model import SystemDesign


def _cols(frame: pd.DataFrame, family: str, building: str | None = None) -> list[str]:
    out = []
    for c in frame.columns:
        if c.startswith(family + ":"):
            unit = c.split(":", 1)[1]
            if building is None or unit.endswith("@" + building) or unit == building:
                out.append(c)
    return out


def _sum(frame: pd.DataFrame, cols, coef=None) -> np.ndarray:
    total = np.zeros(len(frame))
    for c in cols:
        total += (coef(c) if coef else 1.0) * frame[c].to_numpy()
    return total


def dispatch_residuals(
    frame: pd.DataFrame,
    nb: Neighborhood,
    design: SystemDesign,
    profile: HourlyProfile,
    initial_storage: dict[str, float] | None = None,
) -> dict[str, float]:
    """Largest absolute residual per invariant family.

    ``profile`` must be row-aligned with ``frame``.  Storage continuity uses
    the profile's blocks, so cyclic representative days and chronological
    years are both handled.
    """
    if profile.n_hours != len(frame):
        raise ValueError("profile and dispatch differ in length")
    cat = nb.catalog
    plant = nb.plant_id
    initial_storage = initial_storage or {}
    res: dict[str, float] = {}

    def worst(name, arr):
        arr = np.abs(np.asarray(arr, dtype=float))
        res[name] = max(res.get(name, 0.0), float(arr.max(initial=0.0)))

    def eta_of(col):
        return cat.storages[col.split(":", 1)[1].split("@")[0]].eta_oneway

    # electricity, whole neighbourhood
    supply = frame["y_imp"].to_numpy() + _sum(frame, _cols(frame, "g_selfc")) + _sum(frame, _cols(frame, "y_dch"), eta_of)
    use = _sum(frame, _cols(frame, "d") + _cols(frame, "d_sh") + _cols(frame, "d_dhw"))
    e_load = sum((profile.load(b.id, "electric") for b in nb.load_buildings()), np.zeros(len(frame)))
    worst("electricity", supply - use - e_load)

    for b in nb.load_buildings():
        bid = b.id
        dhw = (
            _sum(frame, _cols(frame, "q_dhw", bid))
            + _sum(frame, _cols(frame, "dch_dhw", bid), eta_of)
            - _sum(frame, _cols(frame, "ch_dhw", bid))
            + _sum(frame, _cols(frame, "hg_used_dhw", bid))
            - _sum(frame, _cols(frame, "q_dump", bid))
        )
        worst("dhw", dhw - profile.load(bid, "dhw"))
        sh = (
            _sum(frame, _cols(frame, "q_sh", bid))
            + _sum(frame, _cols(frame, "dch_sh", bid), eta_of)
            - _sum(frame, _cols(frame, "ch_sh", bid))
            + _sum(frame, _cols(frame, "hg_used_sh", bid))
        )
        worst("sh", sh - profile.load(bid, "sh"))

    if plant is not None and design.heating_grid:
        prod = _sum(frame, _cols(frame, "q", plant))
        stor = _sum(frame, _cols(frame, "dch", plant), eta_of) - _sum(frame, _cols(frame, "ch", plant))
        out = _sum(frame, [c for c in _cols(frame, "trans") if c.split(":")[1].startswith(plant + ">")])
        worst("plant", prod + stor - out - _sum(frame, _cols(frame, "q_dump", plant)))
        for p in nb.topology.pipes:
            c = f"trans:{p.source}>{p.target}"
            if c in frame:
                worst("pipe", np.maximum(frame[c].to_numpy() - p.max_flow, 0.0))

    for key, cap in design.capacity.items():
        tid, bid = key.split("@")
        if tid in cat.storages:
            _storage_checks(frame, cat.storages[tid], key, cap, profile, initial_storage.get(key, 0.0), worst)
            continue
        t = cat.technologies[tid]
        q = frame.get(f"q:{key}")
        g = frame.get(f"g:{key}")
        if q is None and g is None:
            continue  # not part of the operated system
        out = (g if t.kind is TechKind.PV else q).to_numpy()
        if t.kind is TechKind.CHP:
            worst("chp_ratio", g.to_numpy() * t.alpha_chp - q.to_numpy())
        if t.kind in (TechKind.FUEL_BURNER, TechKind.CHP):
            worst("fuel", frame[f"f:{key}"].to_numpy() * t.eta - q.to_numpy())
        if t.kind is TechKind.ELECTRIC_HEATER:
            worst("electric_heater", frame[f"d:{key}"].to_numpy() * t.eta - q.to_numpy())
        if t.kind is not TechKind.HEAT_PUMP:
            worst("capacity", np.maximum(out - cap, 0.0))
        if t.has_partload_binary and f"o:{key}" in frame:
            o = np.round(frame[f"o:{key}"].to_numpy())
            worst("partload_off", np.where(o == 0, out, 0.0))
            worst("partload_on", np.where(o == 1, np.maximum(t.alpha_partload * cap - out, 0.0), 0.0))
        if not t.can_serve_dhw and f"q_dhw:{key}" in frame:
            worst("dhw_gate", frame[f"q_dhw:{key}"].to_numpy())
    return res


def _storage_checks(frame, spec, key, cap, profile, v0, worst):
    v = frame[f"v:{key}"].to_numpy()
    worst("storage_bounds", np.maximum(v - cap, 0.0) + np.maximum(-v, 0.0))
    if spec.medium is Medium.ELECTRIC:
        ch = frame[f"y_ch:{key}"].to_numpy() + frame[f"y_imp_est:{key}"].to_numpy()
        dch = frame[f"y_dch:{key}"].to_numpy() + frame[f"y_exp_est:{key}"].to_numpy()
    else:
        names = [c for c in frame.columns if c.endswith(":" + key)]
        ch = sum((frame[c].to_numpy() for c in names if c.split(":")[0] in ("ch", "ch_sh", "ch_dhw")), np.zeros(len(v)))
        dch = sum((frame[c].to_numpy() for c in names if c.split(":")[0] in ("dch", "dch_sh", "dch_dhw")), np.zeros(len(v)))
    worst("storage_rate", np.maximum(ch - spec.rate_frac * cap, 0.0) + np.maximum(dch - spec.rate_frac * cap, 0.0))
    prev = profile.predecessor()
    before = np.where(prev >= 0, v[np.maximum(prev, 0)], v0)
    worst("storage_dynamics", v - before - spec.eta_oneway * ch + dch)
