"""Investment and operation MILPs of the neighbourhood energy system.

Both variants share one builder.  In the investment variant capacities and
investment binaries are decision variables and operation costs are
discounted over the study period; in the operation variant capacities are
fixed to a ``SystemDesign`` and only the hourly dispatch is optimised.

Hours come from an ``HourlyProfile``: chronological blocks carry storage
from an initial level, cyclic blocks (representative days) wrap around.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import solver as _solver
from .domain import (
    HourlyProfile,
    Medium,
    Neighborhood,
    StorageSpec,
    TechKind,
    TechnologySpec,
    annuity_factor,
    cop_profiles,
    discounted_investment_cost,
    maintenance_cost,
    pv_efficiency_profile,
)
from .solver import INF, LinearModel, SolveResult

logger = logging.getLogger(__name__)

DEFAULT_DELTAS = (0.03, 3.0, 300.0)


class ModelError(ValueError):
    """Inputs cannot be turned into a consistent model."""


@dataclass(frozen=True)
class Unit:
    tech: TechnologySpec
    building: str

    @property
    def key(self) -> str:
        return f"{self.tech.id}@{self.building}"


@dataclass(frozen=True)
class StorageUnit:
    spec: StorageSpec
    building: str

    @property
    def key(self) -> str:
        return f"{self.spec.id}@{self.building}"


@dataclass
class SystemDesign:
    """Installed capacities keyed ``tech@building`` (kW, storage in kWh)."""

    capacity: dict[str, float]
    heating_grid: bool = False

    def get(self, key: str) -> float:
        return float(self.capacity.get(key, 0.0))

    def to_dict(self) -> dict:
        return {"heating_grid": bool(self.heating_grid), "capacity": {k: float(v) for k, v in self.capacity.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemDesign":
        return cls({k: float(v) for k, v in d.get("capacity", {}).items()}, bool(d.get("heating_grid", False)))

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "SystemDesign":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))


@dataclass
class ModelInstance:
    lp: LinearModel
    profile: HourlyProfile
    nb: Neighborhood
    invest: bool
    units: list[Unit]
    storages: list[StorageUnit]
    hourly: dict[str, np.ndarray]
    scalars: dict[str, np.ndarray]
    em_terms: list = field(default_factory=list)
    comp_terms: list = field(default_factory=list)
    cost_terms: list = field(default_factory=list)
    op_weight: float = 1.0
    has_hg: bool = False
    design: SystemDesign | None = None
    blocks: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    @property
    def n_hours(self) -> int:
        return self.profile.n_hours

    def weighted(self, terms) -> list:
        w = self.profile.weight
        return [(i, np.asarray(c) * w) for i, c in terms]

    def expression_value(self, x: np.ndarray, terms) -> np.ndarray:
        """Per-hour (unweighted) value of an hourly expression."""
        out = np.zeros(self.n_hours)
        for i, c in terms:
            out += np.asarray(c) * x[i]
        return out


def _eta_pv(nb: Neighborhood, profile: HourlyProfile) -> np.ndarray:
    return pv_efficiency_profile(profile.temperature, profile.irradiance, nb.catalog.panel)


def _select_units(nb: Neighborhood, design: SystemDesign | None, has_hg: bool):
    cat = nb.catalog
    plant = nb.plant_id
    units, storages = [], []
    for b in nb.buildings:
        if b.id == plant and not has_hg:
            continue
        for tid in sorted(b.allowed_techs):
            key = f"{tid}@{b.id}"
            if design is not None and design.get(key) <= 0:
                continue
            if tid in cat.technologies:
                units.append(Unit(cat.technologies[tid], b.id))
            else:
                storages.append(StorageUnit(cat.storages[tid], b.id))
    if design is not None:
        known = {u.key for u in units} | {s.key for s in storages}
        unknown = [k for k, v in design.capacity.items() if v > 0 and k not in known]
        if unknown:
            raise ModelError(f"design has capacity for units not allowed here: {unknown}")
    return units, storages


def _build(
    nb: Neighborhood,
    profile: HourlyProfile,
    design: SystemDesign | None,
    roof_limit: bool = False,
    initial_storage: dict[str, float] | None = None,
    name: str = "zen",
) -> ModelInstance:
    invest = design is None
    cat, econ = nb.catalog, nb.econ
    H = profile.n_hours
    if H == 0:
        raise ModelError("empty time window")
    plant = nb.plant_id
    has_hg = plant is not None and (invest or design.heating_grid)
    units, storages = _select_units(nb, design, has_hg)
    initial_storage = initial_storage or {}

    lp = LinearModel(name)
    annuity = annuity_factor(econ.discount_rate, econ.study_years)
    op_weight = annuity if invest else 1.0
    hourly: dict[str, np.ndarray] = {}
    scalars: dict[str, np.ndarray] = {}

    def hv(key, lb=0.0, ub=INF, integer=False):
        idx = lp.add_vars(key, H, lb, ub, integer)
        hourly[key] = idx
        return idx

    # ---- capacities and investment decisions -----------------------------
    b_hg = None
    if has_hg:
        if invest:
            b_hg = lp.add_binaries("b_hg", 1, cost=nb.topology.hg_cost)
        else:
            b_hg = lp.add_vars("b_hg", 1, 1.0, 1.0)
        scalars["b_hg"] = b_hg

    x: dict[str, np.ndarray] = {}
    for item in [*units, *storages]:
        spec = item.tech if isinstance(item, Unit) else item.spec
        key = item.key
        lo_cap = spec.x_min if isinstance(spec, TechnologySpec) else spec.cap_min
        hi_cap = spec.x_max if isinstance(spec, TechnologySpec) else spec.cap_max
        if invest:
            var_disc, fix_disc = discounted_investment_cost(spec, econ)
            x[key] = lp.add_vars(f"x[{key}]", 1, 0.0, hi_cap, cost=var_disc + maintenance_cost(spec) * annuity)
            built = lp.add_binaries(f"b[{key}]", 1, cost=fix_disc)
            lp.le("invest_max", [(x[key], 1.0), (built, -hi_cap)], 0.0)
            lp.ge("invest_min", [(x[key], 1.0), (built, -lo_cap)], 0.0)
            if item.building == plant:
                lp.le("hg_gate", [(x[key], 1.0), (b_hg, -hi_cap)], 0.0)
            scalars[f"b[{key}]"] = built
        else:
            cap = design.get(key)
            x[key] = lp.add_vars(f"x[{key}]", 1, cap, cap)
        scalars[f"x[{key}]"] = x[key]

    if invest and roof_limit:
        for b in nb.buildings:
            solar = [u for u in units if u.building == b.id and u.tech.area_coeff]
            if solar:
                lp.add_row("roof_area", [(x[u.key], u.tech.area_coeff) for u in solar], -INF, b.roof_area)

    # ---- hourly data --------------------------------------------------------
    spot = profile.spot
    phi = profile.co2_el
    buy = spot + econ.grid_tariff + econ.retail_tariff
    eta_pv = _eta_pv(nb, profile) if any(u.tech.kind is TechKind.PV for u in units) else None
    hp_ids = sorted({u.tech.id for u in units if u.tech.kind is TechKind.HEAT_PUMP})
    cops = cop_profiles(cat.cop_model, profile.temperature, hp_ids) if hp_ids else {}

    elec, gc_imp, gc_exp, gc_gen_exp = [], [], [], []
    em, comp, cost = [], [], []
    sh = defaultdict(list)
    dhw = defaultdict(list)
    plant_bal = []
    gen_ch = defaultdict(list)
    bat_ch = defaultdict(list)

    y_imp = hv("y_imp")
    elec.append((y_imp, 1.0))
    gc_imp.append((y_imp, 1.0))
    cost.append((y_imp, buy))
    em.append((y_imp, phi))

    load_ids = [b.id for b in nb.load_buildings()]
    with_battery = {s.building for s in storages if s.spec.medium is Medium.ELECTRIC}

    # ---- producers ------------------------------------------------------------
    for u in units:
        t, key, bid = u.tech, u.key, u.building
        at_plant = bid == plant
        out = None
        q = q_sh = q_dhw = None
        if t.produces_heat:
            q = hv(f"q:{key}")
            out = q
            if at_plant:
                plant_bal.append((q, 1.0))
            else:
                q_sh = hv(f"q_sh:{key}")
                # the DHW gate multiplies a fixed 0/1 parameter, so it is a plain bound
                q_dhw = hv(f"q_dhw:{key}", ub=INF if t.can_serve_dhw else 0.0)
                lp.eq("heat_split", [(q, 1.0), (q_sh, -1.0), (q_dhw, -1.0)], 0.0)
                sh[bid].append((q_sh, 1.0))
                dhw[bid].append((q_dhw, 1.0))

        if t.kind in (TechKind.FUEL_BURNER, TechKind.CHP):
            f = hv(f"f:{key}")
            lp.eq("fuel_link", [(f, 1.0), (q, -1.0 / t.eta)], 0.0)
            cost.append((f, cat.fuel_price(t.id)))
            em.append((f, cat.fuel_co2(t.id)))
        elif t.kind is TechKind.ELECTRIC_HEATER:
            d = hv(f"d:{key}")
            lp.eq("elec_link", [(d, 1.0), (q, -1.0 / t.eta)], 0.0)
            elec.append((d, -1.0))
        elif t.kind is TechKind.SOLAR_THERMAL:
            lp.eq("solar_thermal", [(q, 1.0), (x[key], -t.eta * profile.irradiance / cat.panel.g_stc)], 0.0)
        elif t.kind is TechKind.HEAT_PUMP:
            cp = cops[t.id]
            if at_plant:
                d_dhw = hv(f"d_dhw:{key}")
                lp.eq("hp_cop", [(q, 1.0), (d_dhw, -cp.cop_dhw)], 0.0)
                lp.le("hp_capacity", [(d_dhw, 1.0 / cp.pmax_dhw), (x[key], -1.0)], 0.0)
                elec.append((d_dhw, -1.0))
            else:
                d_sh = hv(f"d_sh:{key}")
                d_dhw = hv(f"d_dhw:{key}")
                lp.eq("hp_cop", [(q_sh, 1.0), (d_sh, -cp.cop_sh)], 0.0)
                lp.eq("hp_cop", [(q_dhw, 1.0), (d_dhw, -cp.cop_dhw)], 0.0)
                lp.le("hp_capacity", [(d_sh, 1.0 / cp.pmax_sh), (d_dhw, 1.0 / cp.pmax_dhw), (x[key], -1.0)], 0.0)
                elec.append((d_sh, -1.0))
                elec.append((d_dhw, -1.0))

        if t.produces_electricity:
            g = hv(f"g:{key}")
            if t.kind is TechKind.PV:
                curt = hv(f"curt:{key}")
                lp.eq("solar_pv", [(g, 1.0), (curt, 1.0), (x[key], -eta_pv * profile.irradiance)], 0.0)
                out = g
            else:
                lp.eq("chp_ratio", [(g, 1.0), (q, -1.0 / t.alpha_chp)], 0.0)
            g_exp = hv(f"g_exp:{key}")
            g_selfc = hv(f"g_selfc:{key}")
            g_dump = hv(f"g_dump:{key}")
            split = [(g, 1.0), (g_exp, -1.0), (g_selfc, -1.0), (g_dump, -1.0)]
            if bid in with_battery:
                g_ch = hv(f"g_ch:{key}")
                split.append((g_ch, -1.0))
                gen_ch[bid].append((g_ch, 1.0))
            lp.eq("gen_split", split, 0.0)
            elec.append((g_selfc, 1.0))
            gc_gen_exp.append((g_exp, 1.0))
            cost.append((g_exp, -spot))
            comp.append((g_exp, phi))

        if t.kind is TechKind.HEAT_PUMP:
            continue
        if t.has_partload_binary:
            o = hv(f"o:{key}", 0.0, 1.0, integer=True)
            if invest:
                xmax = t.x_max
                xb = hv(f"xbar:{key}")
                lp.le("partload", [(xb, 1.0), (o, -xmax)], 0.0)
                lp.le("partload", [(xb, 1.0), (x[key], -1.0)], 0.0)
                lp.ge("partload", [(xb, 1.0), (x[key], -1.0), (o, -xmax)], -xmax)
                lp.le("partload", [(out, 1.0), (xb, -1.0)], 0.0)
                lp.ge("partload", [(out, 1.0), (xb, -t.alpha_partload)], 0.0)
            else:
                cap = design.get(key)
                lp.le("partload", [(out, 1.0), (o, -cap)], 0.0)
                lp.ge("partload", [(out, 1.0), (o, -t.alpha_partload * cap)], 0.0)
        else:
            lp.le("capacity", [(out, 1.0), (x[key], -1.0)], 0.0)

    # ---- storage ------------------------------------------------------------
    prev = profile.predecessor()
    has_prev = prev >= 0
    prev_idx = np.where(has_prev, prev, 0)
    for s in storages:
        spec, key, bid = s.spec, s.key, s.building
        eta = spec.eta_oneway
        v = hv(f"v:{key}")
        if spec.medium is Medium.HEAT:
            if bid == plant:
                ch = hv(f"ch:{key}")
                dch = hv(f"dch:{key}")
                plant_bal += [(dch, eta), (ch, -1.0)]
                charges, discharges = [ch], [dch]
            else:
                ch_sh, ch_dhw = hv(f"ch_sh:{key}"), hv(f"ch_dhw:{key}")
                dch_sh, dch_dhw = hv(f"dch_sh:{key}"), hv(f"dch_dhw:{key}")
                sh[bid] += [(dch_sh, eta), (ch_sh, -1.0)]
                dhw[bid] += [(dch_dhw, eta), (ch_dhw, -1.0)]
                charges, discharges = [ch_sh, ch_dhw], [dch_sh, dch_dhw]
        else:
            y_ch = hv(f"y_ch:{key}")
            y_imp_s = hv(f"y_imp_est:{key}")
            y_dch = hv(f"y_dch:{key}")
            y_exp_s = hv(f"y_exp_est:{key}")
            elec.append((y_dch, eta))
            bat_ch[bid].append((y_ch, 1.0))
            gc_imp.append((y_imp_s, 1.0))
            gc_exp.append((y_exp_s, eta))
            cost += [(y_imp_s, buy), (y_exp_s, -spot * eta)]
            em.append((y_imp_s, phi))
            comp.append((y_exp_s, phi * eta))
            charges, discharges = [y_ch, y_imp_s], [y_dch, y_exp_s]
        v0 = float(initial_storage.get(key, 0.0))
        if not invest and v0 > design.get(key) + 1e-9:
            raise ModelError(f"initial level {v0} of {key} exceeds capacity {design.get(key)}")
        lp.eq(
            "storage_dynamics",
            [(v, 1.0), (v[prev_idx], np.where(has_prev, -1.0, 0.0))]
            + [(c, -eta) for c in charges]
            + [(d, 1.0) for d in discharges],
            np.where(has_prev, 0.0, v0),
        )
        lp.le("storage_level", [(v, 1.0), (x[key], -1.0)], 0.0)
        lp.le("charge_rate", [(c, 1.0) for c in charges] + [(x[key], -spec.rate_frac)], 0.0)
        lp.le("discharge_rate", [(d, 1.0) for d in discharges] + [(x[key], -spec.rate_frac)], 0.0)

    # ---- heating grid and building heat balances ------------------------------
    pipes = list(nb.topology.pipes) if has_hg else []
    trans = {}
    for p in pipes:
        tr = hv(f"trans:{p.source}>{p.target}")
        lp.le("pipe_limit", [(tr, 1.0), (b_hg, -p.max_flow)], 0.0)
        trans[(p.source, p.target)] = tr

    for bid in load_ids:
        incoming = [(s_, t_) for (s_, t_) in trans if t_ == bid]
        outgoing = [(s_, t_) for (s_, t_) in trans if s_ == bid]
        if incoming:
            used_sh = hv(f"hg_used_sh:{bid}")
            used_dhw = hv(f"hg_used_dhw:{bid}")
            sh[bid].append((used_sh, 1.0))
            dhw[bid].append((used_dhw, 1.0))
            loss_in = sum(p.loss for p in pipes if p.target == bid)
            flow = [(trans[k], -1.0) for k in incoming] + [(trans[k], 1.0) for k in outgoing]
            lp.eq("hg_used", [(used_sh, 1.0), (used_dhw, 1.0), *flow, (b_hg, loss_in)], 0.0, n=H)
            lp.le("hg_no_reinjection", [*flow, (b_hg, loss_in)], 0.0, n=H)
        elif outgoing:
            lp.le("hg_no_reinjection", [(trans[k], 1.0) for k in outgoing], 0.0)
        dump = hv(f"q_dump:{bid}")
        dhw[bid].append((dump, -1.0))
        lp.eq("dhw_balance", dhw[bid], profile.load(bid, "dhw"), n=H)
        lp.eq("sh_balance", sh[bid], profile.load(bid, "sh"), n=H)

    if has_hg:
        dump_pp = hv(f"q_dump:{plant}")
        plant_bal.append((dump_pp, -1.0))
        plant_bal += [(tr, -1.0) for (s_, _), tr in trans.items() if s_ == plant]
        lp.eq("plant_balance", plant_bal, 0.0, n=H)

    # ---- electricity ------------------------------------------------------------
    e_load = sum((profile.load(bid, "electric") for bid in load_ids), np.zeros(H))
    lp.eq("elec_balance", elec, e_load, n=H)
    for bid in set(gen_ch) | set(bat_ch):
        lp.eq("battery_routing", gen_ch[bid] + [(i, -1.0) for i, _ in bat_ch[bid]], 0.0, n=H)
    gc = econ.grid_connection
    if econ.gc_mode == "sum":
        lp.le("grid_connection", gc_imp + gc_gen_exp, gc, n=H)
    else:
        lp.le("grid_connection", gc_imp, gc, n=H)
        if gc_gen_exp or gc_exp:
            lp.le("grid_connection", gc_gen_exp + gc_exp, gc, n=H)

    inst = ModelInstance(
        lp, profile, nb, invest, units, storages, hourly, scalars,
        em_terms=em, comp_terms=comp, cost_terms=cost, op_weight=op_weight, has_hg=has_hg, design=design,
    )
    for i, c in inst.weighted(cost):
        lp.add_cost(i, np.asarray(c) * op_weight)
    return inst


def build_investment_model(
    clusters_profile: HourlyProfile, nb: Neighborhood, roof_limit: bool = False, zeb: bool = True
) -> ModelInstance:
    """Design model over representative days with the annual zero-emission balance."""
    if clusters_profile.n_hours == 0:
        raise ModelError("no representative days")
    inst = _build(nb, clusters_profile, None, roof_limit=roof_limit, name="investment")
    if zeb:
        inst.lp.add_row(
            "zeb",
            inst.weighted(inst.em_terms) + [(i, -np.asarray(c)) for i, c in inst.weighted(inst.comp_terms)],
            -INF,
            0.0,
        )
    return inst


def build_operation_model(
    design: SystemDesign,
    profile: HourlyProfile,
    nb: Neighborhood,
    initial_storage: dict[str, float] | None = None,
    name: str = "operation",
) -> ModelInstance:
    """Dispatch model for a fixed design over the hours (and blocks) of ``profile``."""
    return _build(nb, profile, design, initial_storage=initial_storage, name=name)


def attach_emission_penalty(
    inst: ModelInstance, em_target: float, comp_target: float, deltas=DEFAULT_DELTAS
) -> ModelInstance:
    """Tiered penalties for exceeding the emission target or missing the compensation target."""
    d1, d2, d3 = deltas
    if min(deltas) < 0:
        raise ModelError("penalty deltas must be non-negative")
    if em_target < 0 or comp_target < 0:
        raise ModelError("targets must be non-negative")
    lp = inst.lp
    e = em_target
    within = lp.add_vars("em_within", 1, 0.0, e)
    e11 = lp.add_vars("em_1.1", 1, 0.0, 0.1 * e, cost=d1)
    e15 = lp.add_vars("em_1.5", 1, 0.0, 0.4 * e, cost=d2)
    esup = lp.add_vars("em_sup", 1, 0.0, INF, cost=d3)
    lp.add_row("penalty_em", inst.weighted(inst.em_terms) + [(within, -1), (e11, -1), (e15, -1), (esup, -1)], 0, 0)

    c = comp_target
    comp_max = _compensation_bound(inst) + c + 1.0
    b0 = lp.add_binaries("b_comp_0", 1, cost=d3 * c)
    b05 = lp.add_binaries("b_comp_0.5", 1, cost=d2 * c)
    b09 = lp.add_binaries("b_comp_0.9", 1, cost=d1 * c)
    bsup = lp.add_binaries("b_comp_sup", 1)
    z0 = lp.add_vars("comp_0", 1, cost=-d3)
    z05 = lp.add_vars("comp_0.5", 1, cost=-d2)
    z09 = lp.add_vars("comp_0.9", 1, cost=-d1)
    zsup = lp.add_vars("comp_sup", 1)
    lp.add_row("penalty_comp", inst.weighted(inst.comp_terms) + [(z, -1) for z in (z0, z05, z09, zsup)], 0, 0)
    lp.eq("penalty_tier", [(b0, 1), (b05, 1), (b09, 1), (bsup, 1)], 1.0)
    lp.le("penalty_tier", [(z0, 1), (b0, -0.5 * c)], 0.0)
    lp.ge("penalty_tier", [(z05, 1), (b05, -0.5 * c)], 0.0)
    lp.le("penalty_tier", [(z05, 1), (b05, -0.9 * c)], 0.0)
    lp.ge("penalty_tier", [(z09, 1), (b09, -0.9 * c)], 0.0)
    lp.le("penalty_tier", [(z09, 1), (b09, -c)], 0.0)
    lp.ge("penalty_tier", [(zsup, 1), (bsup, -c)], 0.0)
    lp.le("penalty_tier", [(zsup, 1), (bsup, -comp_max)], 0.0)
    inst.blocks["penalty"] = {
        "em": (within, e11, e15, esup),
        "tiers": (b0, b05, b09, bsup),
        "comp": (z0, z05, z09, zsup),
        "targets": (em_target, comp_target),
        "deltas": tuple(deltas),
    }
    return inst


def _compensation_bound(inst: ModelInstance) -> float:
    """Upper bound on the weighted compensation of the window."""
    per_hour = inst.nb.econ.grid_connection
    for s in inst.storages:
        if s.spec.medium is Medium.ELECTRIC:
            cap = s.spec.cap_max if inst.invest else inst.design.get(s.key)
            per_hour += s.spec.eta_oneway * s.spec.rate_frac * cap
    return float(np.sum(inst.profile.weight * inst.profile.co2_el) * per_hour)


def attach_receding_zeb(
    inst: ModelInstance, em_so_far: float, comp_so_far: float, slack_penalty: float = 10 * DEFAULT_DELTAS[2]
) -> ModelInstance:
    """Year-end emission balance carried by running accumulators, with a priced slack."""
    if em_so_far < 0 or comp_so_far < 0:
        raise ModelError("accumulators must be non-negative")
    lp = inst.lp
    slack = lp.add_vars("zeb_slack", 1, 0.0, INF, cost=slack_penalty)
    lp.add_row(
        "receding_zeb",
        inst.weighted(inst.em_terms) + [(i, -np.asarray(c)) for i, c in inst.weighted(inst.comp_terms)] + [(slack, -1)],
        -INF,
        comp_so_far - em_so_far,
    )
    inst.blocks["zeb"] = {"slack": slack, "so_far": (em_so_far, comp_so_far)}
    return inst


def solve(inst: ModelInstance, mipgap: float = 0.01, time_limit: float | None = None, backend=None) -> SolveResult:
    return _solver.solve(inst.lp, mipgap, time_limit, backend)


# ---- results ------------------------------------------------------------------


def extract_design(inst: ModelInstance, res: SolveResult) -> SystemDesign:
    cap = {}
    for name, idx in inst.scalars.items():
        if name.startswith("x["):
            val = float(res.x[idx][0])
            if val > 1e-6:
                cap[name[2:-1]] = val
    hg = bool(inst.has_hg and res.x[inst.scalars["b_hg"]][0] > 0.5) if "b_hg" in inst.scalars else False
    if not hg and inst.nb.plant_id:
        cap = {k: v for k, v in cap.items() if not k.endswith("@" + inst.nb.plant_id)}
    return SystemDesign(cap, hg)


def extract_dispatch(inst: ModelInstance, res: SolveResult) -> pd.DataFrame:
    """One row per model hour; variable columns are named ``family:unit``."""
    p = inst.profile
    data = {
        "hour": p.hour,
        "cluster": p.cluster,
        "weight": p.weight,
        "spot": p.spot,
        "phi_el": p.co2_el,
        "cost": inst.expression_value(res.x, inst.cost_terms),
    }
    for name, idx in inst.hourly.items():
        data[name] = res.x[idx]
    return pd.DataFrame(data)


def cost_breakdown(inst: ModelInstance, res: SolveResult) -> dict[str, float]:
    """Objective split into investment, operation and penalty parts."""
    op = float(np.sum(inst.expression_value(res.x, inst.cost_terms) * inst.profile.weight)) * inst.op_weight
    out = {"objective": res.objective, "operation": op}
    pen = 0.0
    if "penalty" in inst.blocks:
        out.update(penalty_values(inst, res))
        pen += out["c_em"] + out["c_comp"]
    if "zeb" in inst.blocks:
        out["zeb_slack"] = float(res.x[inst.blocks["zeb"]["slack"]][0])
        pen += out["zeb_slack"] * inst.lp.objective()[inst.blocks["zeb"]["slack"]][0]
    out["investment"] = res.objective - op - pen
    return out


def penalty_values(inst: ModelInstance, res: SolveResult) -> dict[str, float]:
    blk = inst.blocks["penalty"]
    d1, d2, d3 = blk["deltas"]
    x = res.x
    _, e11, e15, esup = (float(x[i][0]) for i in blk["em"])
    b = [int(round(x[i][0])) for i in blk["tiers"]]
    z = [float(x[i][0]) for i in blk["comp"]]
    _, c = blk["targets"]
    c_em = d1 * e11 + d2 * e15 + d3 * esup
    c_comp = d3 * (c * b[0] - z[0]) + d2 * (c * b[1] - z[1]) + d1 * (c * b[2] - z[2])
    tier = ["0", "0.5", "0.9", "sup"][int(np.argmax(b))]
    return {"c_em": c_em, "c_comp": c_comp, "tier": tier, "tier_count": sum(b)}


def emission_penalty(emissions: float, target: float, deltas=DEFAULT_DELTAS) -> float:
    """Scalar reference of the tiered emission penalty."""
    d1, d2, d3 = deltas
    over = max(0.0, emissions - target)
    band1 = min(over, 0.1 * target)
    band2 = min(max(over - 0.1 * target, 0.0), 0.4 * target)
    rest = max(over - 0.5 * target, 0.0)
    return d1 * band1 + d2 * band2 + d3 * rest


def compensation_penalty(compensation: float, target: float, deltas=DEFAULT_DELTAS) -> tuple[float, str]:
    """Scalar reference of the tiered compensation penalty and the active tier."""
    d1, d2, d3 = deltas
    if compensation >= target:
        return 0.0, "sup"
    short = target - compensation
    if compensation >= 0.9 * target:
        return d1 * short, "0.9"
    if compensation >= 0.5 * target:
        return d2 * short, "0.5"
    return d3 * short, "0"
