import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _fixtures import make_year, micro_catalog, micro_grid_site, micro_site
from zenop.cluster import cluster_days
from zenop.domain import Building, EconomicParams, Neighborhood
from zenop.invariants import dispatch_residuals
from zenop.ledger import account, totals
from zenop.model import (
    ModelError,
    SystemDesign,
    attach_emission_penalty,
    attach_receding_zeb,
    build_investment_model,
    build_operation_model,
    compensation_penalty,
    cost_breakdown,
    emission_penalty,
    extract_design,
    extract_dispatch,
    penalty_values,
    solve,
)

TARIFF = 0.06  # grid + retail tariff of the default economics


def operate(nb, design, sc, start=0, stop=None, **kw):
    profile = sc.window(start, stop or sc.n_hours)
    inst = build_operation_model(design, profile, nb, **kw)
    return inst, profile


def assert_clean(frame, nb, design, profile, tol=1e-6):
    res = dispatch_residuals(frame, nb, design, profile)
    assert max(res.values()) <= tol, res


class TestZeroLoad:
    def test_operation_objective_zero(self):
        nb = micro_site({"gas_boiler", "battery"})
        design = SystemDesign({"gas_boiler@B1": 10.0, "battery@B1": 5.0})
        inst, _ = operate(nb, design, make_year(1))
        res = solve(inst, mipgap=0.0)
        assert res.objective == pytest.approx(0.0, abs=1e-9)
        assert np.allclose(extract_dispatch(inst, res)["y_imp"], 0.0)

    def test_investment_builds_nothing(self):
        nb = micro_site({"pv", "gas_boiler", "battery"})
        inst = build_investment_model(make_year(1).window(0, 24, cyclic=True), nb)
        res = solve(inst, mipgap=0.0)
        assert res.objective == pytest.approx(0.0, abs=1e-6)
        assert extract_design(inst, res).capacity == {}


class TestDispatchOptima:
    def test_battery_arbitrage_two_hours(self):
        nb = micro_site({"battery"})
        sc = make_year(1, spot=[0.0, 1.0] * 12, electric=[0.0, 5.0] * 12)
        inst, profile = operate(nb, SystemDesign({"battery@B1": 10.0}), sc, 0, 2)
        res = solve(inst, mipgap=0.0)
        # 5 kWh bought at the cheap hour (tariff only) and discharged to the load
        assert res.objective == pytest.approx(5 * TARIFF)
        frame = extract_dispatch(inst, res)
        assert frame["y_dch:battery@B1"].iloc[1] == pytest.approx(5.0)
        assert_clean(frame, nb, SystemDesign({"battery@B1": 10.0}), profile)

    def test_no_battery_pays_spot(self):
        nb = micro_site(set())
        sc = make_year(1, spot=[0.0, 1.0] * 12, electric=[0.0, 5.0] * 12)
        inst, _ = operate(nb, SystemDesign({}), sc, 0, 2)
        assert solve(inst).objective == pytest.approx(5 * (1.0 + TARIFF))

    @pytest.mark.parametrize("spot, winner", [(0.30, "gas_boiler"), (0.10, "hp")])
    def test_heat_pump_or_boiler(self, spot, winner):
        nb = micro_site({"hp", "gas_boiler"})
        design = SystemDesign({"hp@B1": 100.0, "gas_boiler@B1": 100.0})
        inst, profile = operate(nb, design, make_year(1, spot=spot, sh=10.0), 0, 4)
        res = solve(inst, mipgap=0.0)
        per_kwh = {"hp": (spot + TARIFF) / 3.0, "gas_boiler": 0.07}
        assert res.objective == pytest.approx(4 * 10 * per_kwh[winner])
        frame = extract_dispatch(inst, res)
        assert np.allclose(frame[f"q_sh:{winner}@B1"], 10.0)
        assert_clean(frame, nb, design, profile)

    @pytest.mark.parametrize("spot, boiler_on", [(0.05, False), (0.20, True)])
    def test_part_load_exclusion(self, spot, boiler_on):
        nb = micro_site({"el_heater", "gas_boiler"}, micro_catalog(boiler_alpha=0.5))
        design = SystemDesign({"el_heater@B1": 10.0, "gas_boiler@B1": 10.0})
        inst, profile = operate(nb, design, make_year(1, spot=spot, sh=2.0), 0, 3)
        res = solve(inst, mipgap=0.0)
        frame = extract_dispatch(inst, res)
        q = frame["q:gas_boiler@B1"].to_numpy()
        if boiler_on:
            # on means at least half of capacity; the surplus goes to the DHW dump
            assert np.all(q >= 5.0 - 1e-9)
            assert res.objective == pytest.approx(3 * 5.0 * 0.07)
        else:
            assert np.allclose(q, 0.0) and np.allclose(frame["o:gas_boiler@B1"], 0.0)
            assert res.objective == pytest.approx(3 * 2.0 * (spot + TARIFF))
        assert_clean(frame, nb, design, profile)


class TestGridConnection:
    @pytest.mark.parametrize("gc", [10.0, 20.0, 40.0])
    def test_export_capped(self, gc):
        nb = micro_site({"pv"}, gc=gc)
        sc = make_year(1, spot=0.1, irr=1000.0)
        inst, _ = operate(nb, SystemDesign({"pv@B1": 100.0}), sc, 0, 2)
        assert solve(inst).objective == pytest.approx(-2 * 0.1 * gc)

    def test_monotone_in_capacity(self):
        objs = []
        for gc in (5.0, 15.0, 60.0):
            nb = micro_site({"pv", "battery"}, gc=gc)
            sc = make_year(1, spot=[0.02, 0.3] * 12, irr=[800.0, 0.0] * 12, electric=20.0)
            inst, _ = operate(nb, SystemDesign({"pv@B1": 50.0, "battery@B1": 40.0}), sc)
            objs.append(solve(inst, mipgap=0.0).objective)
        assert objs[0] >= objs[1] - 1e-9 >= objs[2] - 2e-9

    def test_separate_mode_rows(self):
        sc = make_year(1)
        design = SystemDesign({"pv@B1": 1.0})
        rows = {}
        for mode in ("sum", "separate"):
            nb = micro_site({"pv"}, gc_mode=mode)
            inst, _ = operate(nb, design, sc)
            rows[mode] = len(inst.lp.rows_of("grid_connection"))
        assert rows == {"sum": 24, "separate": 48}


class TestHeatingGrid:
    def test_losses_added_at_source(self):
        nb = micro_grid_site(set(), loss=1.0)
        design = SystemDesign({"chp@PP": 10.0}, heating_grid=True)
        inst, profile = operate(nb, design, make_year(1, sh=5.0), 0, 3)
        res = solve(inst, mipgap=0.0)
        frame = extract_dispatch(inst, res)
        assert np.allclose(frame["trans:PP>B1"], 6.0)
        assert np.allclose(frame["q:chp@PP"], 6.0)
        assert np.allclose(frame["hg_used_sh:B1"], 5.0)
        assert_clean(frame, nb, design, profile)

    def test_grid_off_drops_plant_units(self):
        nb = micro_grid_site({"gas_boiler"})
        inst, _ = operate(nb, SystemDesign({"gas_boiler@B1": 10.0}), make_year(1, sh=1.0))
        assert "b_hg" not in inst.scalars
        assert not any(k.endswith("@PP") for k in inst.hourly)

    def test_plant_capacity_without_grid_rejected(self):
        nb = micro_grid_site({"gas_boiler"})
        design = SystemDesign({"gas_boiler@B1": 10.0, "chp@PP": 10.0})
        with pytest.raises(ModelError, match="chp@PP"):
            operate(nb, design, make_year(1))

    def test_investment_grid_gated(self):
        nb = micro_grid_site({"gas_boiler"})
        inst = build_investment_model(make_year(1, sh=1.0).window(0, 24, cyclic=True), nb, zeb=False)
        res = solve(inst, mipgap=0.0)
        design = extract_design(inst, res)
        # the grid costs more than it saves here
        assert not design.heating_grid and "chp@PP" not in design.capacity


class TestPenalties:
    def test_scalar_emission_example(self):
        assert emission_penalty(120.0, 100.0, (0.03, 3.0, 300.0)) == pytest.approx(30.3, abs=1e-9)

    def test_scalar_compensation_tier(self):
        value, tier = compensation_penalty(70.0, 100.0)
        assert tier == "0.5" and value == pytest.approx(3.0 * 30.0)
        assert compensation_penalty(100.0, 100.0) == (0.0, "sup")
        assert compensation_penalty(95.0, 100.0)[1] == "0.9"
        assert compensation_penalty(10.0, 100.0)[1] == "0"

    def test_model_emission_penalty_matches_scalar(self):
        # 0.6 kWh of gas heat at 200 g/kWh: 120 g against a 100 g target
        nb = micro_site({"gas_boiler"})
        inst, _ = operate(nb, SystemDesign({"gas_boiler@B1": 10.0}), make_year(1, sh=[0.6] + [0.0] * 23), 0, 1)
        attach_emission_penalty(inst, 100.0, 0.0)
        res = solve(inst, mipgap=0.0)
        pv = penalty_values(inst, res)
        assert pv["c_em"] == pytest.approx(30.3, abs=1e-7)
        assert pv["tier_count"] == 1
        assert res.objective == pytest.approx(0.6 * 0.07 + 30.3, abs=1e-7)

    def test_model_compensation_tier(self):
        # PV can export at most 0.7 kWh at 100 g/kWh: 70 g against a 100 g target
        nb = micro_site({"pv"})
        sc = make_year(1, spot=0.0, co2=100.0, irr=1000.0)
        inst, _ = operate(nb, SystemDesign({"pv@B1": 0.7}), sc, 0, 1)
        attach_emission_penalty(inst, 0.0, 100.0)
        res = solve(inst, mipgap=0.0)
        pv = penalty_values(inst, res)
        assert pv["tier"] == "0.5" and pv["tier_count"] == 1
        assert pv["c_comp"] == pytest.approx(90.0, abs=1e-6)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 2.0), st.floats(1.0, 300.0))
    def test_model_penalty_agrees_with_scalar(self, heat, target):
        nb = micro_site({"gas_boiler"})
        inst, _ = operate(nb, SystemDesign({"gas_boiler@B1": 10.0}), make_year(1, sh=heat), 0, 1)
        attach_emission_penalty(inst, target, 0.0)
        res = solve(inst, mipgap=0.0)
        pv = penalty_values(inst, res)
        assert pv["c_em"] == pytest.approx(emission_penalty(200.0 * heat, target), abs=1e-6)
        assert pv["tier_count"] == 1

    def test_negative_target_rejected(self):
        nb = micro_site(set())
        inst, _ = operate(nb, SystemDesign({}), make_year(1), 0, 1)
        with pytest.raises(ModelError):
            attach_emission_penalty(inst, -1.0, 0.0)


class TestRecedingZeb:
    def setup_method(self):
        self.nb = micro_site({"gas_boiler"})
        self.sc = make_year(1, sh=[0.6] + [0.0] * 23)

    def slack(self, em, comp):
        inst, _ = operate(self.nb, SystemDesign({"gas_boiler@B1": 10.0}), self.sc, 0, 1)
        attach_receding_zeb(inst, em, comp)
        res = solve(inst, mipgap=0.0)
        return cost_breakdown(inst, res)["zeb_slack"]

    @pytest.mark.parametrize("em, comp, expected", [(0.0, 0.0, 120.0), (50.0, 0.0, 170.0), (0.0, 200.0, 0.0)])
    def test_slack(self, em, comp, expected):
        assert self.slack(em, comp) == pytest.approx(expected, abs=1e-7)

    def test_negative_accumulator_rejected(self):
        inst, _ = operate(self.nb, SystemDesign({"gas_boiler@B1": 10.0}), self.sc, 0, 1)
        with pytest.raises(ModelError):
            attach_receding_zeb(inst, -1.0, 0.0)


class TestLedgerAgreement:
    def test_ledger_matches_model_expressions(self):
        nb = micro_site({"pv", "gas_boiler", "battery"})
        sc = make_year(2, spot=[0.02, 0.2, 0.05], co2=[50.0, 150.0, 80.0], irr=[0, 600, 900, 0],
                       electric=12.0, sh=6.0)
        design = SystemDesign({"pv@B1": 30.0, "gas_boiler@B1": 20.0, "battery@B1": 20.0})
        inst, profile = operate(nb, design, sc)
        res = solve(inst, mipgap=0.0)
        frame = extract_dispatch(inst, res)
        em, comp = totals(account(frame, nb.catalog))
        assert em == pytest.approx(np.sum(inst.expression_value(res.x, inst.em_terms)), rel=1e-9)
        assert comp == pytest.approx(np.sum(inst.expression_value(res.x, inst.comp_terms)), rel=1e-9)
        assert_clean(frame, nb, design, profile)

    def test_clustered_weights(self):
        nb = micro_site({"pv", "gas_boiler"})
        sc = make_year(3, irr=[0, 500, 0], sh=3.0)
        profile = cluster_days(sc, 1, seed=0).to_profile()
        inst = build_investment_model(profile, nb)
        res = solve(inst, mipgap=1e-6)
        frame = extract_dispatch(inst, res)
        em, comp = totals(account(frame, nb.catalog))
        assert em - comp <= 1e-3


class TestValidation:
    def test_empty_window(self):
        nb = micro_site(set())
        with pytest.raises(ModelError):
            build_operation_model(SystemDesign({}), make_year(1).window(0, 0), nb)

    def test_initial_storage_above_capacity(self):
        nb = micro_site({"battery"})
        with pytest.raises(ModelError, match="initial level"):
            operate(nb, SystemDesign({"battery@B1": 5.0}), make_year(1), initial_storage={"battery@B1": 6.0})

    def test_design_round_trip(self, tmp_path):
        d = SystemDesign({"pv@B1": 12.5, "chp@PP": 3.0}, heating_grid=True)
        d.save(tmp_path / "d.yaml")
        assert SystemDesign.load(tmp_path / "d.yaml") == d

    def test_roof_limit(self):
        nb = Neighborhood([Building("B1", 53.0, {"pv"})], micro_catalog(), EconomicParams())
        # PV pays for itself through exports at a high price; the roof caps it at 10 kW
        sc = make_year(1, spot=5.0, irr=800.0)
        inst = build_investment_model(sc.window(0, 24, cyclic=True), nb, roof_limit=True, zeb=False)
        design = extract_design(inst, solve(inst, mipgap=1e-6))
        assert design.get("pv@B1") == pytest.approx(10.0)
