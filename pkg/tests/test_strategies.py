import numpy as np
import pandas as pd
import pytest

from _fixtures import make_year, micro_site
from zenop.cluster import cluster_days
from zenop.ledger import zeb_gap
from zenop.model import SystemDesign
from zenop.strategies import (
    DispatchRecord,
    HorizonTargets,
    StrategyConfig,
    StrategyError,
    compute_horizon_targets,
    expand_clustered_dispatch,
    run_eme_mpc,
    run_empc,
    run_perfect_foresight,
    run_rh_mpc,
)

CHRONO = StrategyConfig(pf_clusters=None, mipgap=1e-9)


def spiky_year(n_days=2, **kw):
    spot = np.full(24, 0.01)
    spot[19] = 1.0
    return make_year(n_days, spot=spot, electric=5.0, **kw)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs", [dict(t_mpc=0), dict(implement_hours=0), dict(t_mpc=4, implement_hours=5),
                   dict(pf_clusters=0), dict(rh_tail_clusters=0), dict(deltas=(-1, 0, 0))]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            StrategyConfig(**kwargs)

    def test_default_steps(self):
        cfg = StrategyConfig()
        assert (cfg.step("empc"), cfg.step("eme-mpc"), cfg.step("rh-mpc")) == (1, 1, 6)
        assert StrategyConfig(implement_hours=3).step("rh-mpc") == 3


class TestZeroLoad:
    nb = micro_site({"gas_boiler", "battery"})
    design = SystemDesign({"gas_boiler@B1": 5.0, "battery@B1": 5.0})
    sc = make_year(2)

    def test_all_strategies_cost_nothing(self):
        cfg = StrategyConfig(pf_clusters=2, t_mpc=12)
        pf, led = run_perfect_foresight(self.design, self.sc, self.nb, cfg)
        targets = compute_horizon_targets(expand_clustered_dispatch(pf, pf.clusters), self.nb, 12)
        runs = [
            pf,
            run_empc(self.design, self.sc, self.nb, cfg)[0],
            run_eme_mpc(self.design, self.sc, self.nb, targets, cfg)[0],
            run_rh_mpc(self.design, self.sc, make_year(2), self.nb, cfg)[0],
        ]
        for rec in runs:
            assert rec.total_cost == pytest.approx(0.0, abs=1e-9)
        assert zeb_gap(led) == 0.0


class TestForesight:
    def test_empc_equals_pf_without_coupling(self):
        # no storage and no emissions: every hour is independent
        nb = micro_site({"pv"})
        sc = make_year(3, spot=[0.02, 0.1, 0.05], co2=0.0, irr=[0, 300, 800, 0], electric=[10, 30])
        design = SystemDesign({"pv@B1": 20.0})
        pf, _ = run_perfect_foresight(design, sc, nb, CHRONO)
        em, _ = run_empc(design, sc, nb, CHRONO)
        assert em.total_cost == pytest.approx(pf.total_cost, abs=1e-9)
        assert np.allclose(em.column("y_imp"), pf.column("y_imp"))

    def test_window_sees_price_spike(self):
        nb = micro_site({"battery"})
        sc = spiky_year()
        design = SystemDesign({"battery@B1": 10.0})
        pf, _ = run_perfect_foresight(design, sc, nb, CHRONO)
        full, _ = run_empc(design, sc, nb, CHRONO)
        blind, _ = run_empc(design, sc, nb, StrategyConfig(t_mpc=1, mipgap=1e-9))
        assert full.total_cost == pytest.approx(pf.total_cost, rel=1e-9)
        assert blind.total_cost > full.total_cost + 1.0
        # the battery covers the spike hour
        assert full.column("y_imp")[19] == pytest.approx(0.0, abs=1e-9)

    def test_pf_clustered_weights(self):
        nb = micro_site({"battery"})
        sc = spiky_year(4)
        pf, led = run_perfect_foresight(SystemDesign({"battery@B1": 10.0}), sc, nb, StrategyConfig(pf_clusters=1))
        assert pf.frame["weight"].sum() == 4 * 24
        assert len(led) == 24 and pf.clusters.k == 1


class TestTargets:
    def ledger(self, n):
        return pd.DataFrame({"weight": 1.0, "emissions_g": np.ones(n), "compensations_g": np.full(n, 2.0)})

    def test_constant_emissions(self):
        t = compute_horizon_targets(self.ledger(72), t_mpc=24)
        assert np.all(t.em_target[:49] == 24.0)
        assert np.all(t.comp_target[:49] == 48.0)
        # horizons are truncated at year end
        assert t.em_target[-1] == 1.0 and t.em_target[60] == 12.0

    def test_negative_target_rejected(self):
        with pytest.raises(ValueError):
            HorizonTargets(np.arange(2), np.array([1.0, -1.0]), np.zeros(2))

    def test_dispatch_needs_neighborhood(self):
        frame = pd.DataFrame({"weight": [1.0], "phi_el": [10.0], "y_imp": [1.0]})
        with pytest.raises(ValueError):
            compute_horizon_targets(frame)

    def test_targets_from_dispatch(self):
        nb = micro_site(set())
        rec, _ = run_perfect_foresight(SystemDesign({}), make_year(2, co2=50.0, electric=2.0), nb, CHRONO)
        t = compute_horizon_targets(rec, nb, 24)
        assert t.em_target[0] == pytest.approx(24 * 100.0)


class TestExpand:
    def test_identities(self):
        nb = micro_site({"battery"})
        sc = spiky_year(10, co2=[60.0, 90.0])
        cs = cluster_days(sc, 3, seed=0)
        pf, _ = run_perfect_foresight(SystemDesign({"battery@B1": 10.0}), sc, nb, clusters=cs)
        out = expand_clustered_dispatch(pf, cs)
        assert len(out) == sc.n_hours
        assert out["hour"].tolist() == list(range(sc.n_hours))
        assert (out["weight"] == 1.0).all()
        for col in ("y_imp", "cost"):
            assert out[col].sum() == pytest.approx((pf.frame[col] * pf.frame["weight"]).sum())

    def test_wrong_length_rejected(self):
        cs = cluster_days(spiky_year(4), 2, seed=0)
        with pytest.raises(ValueError):
            expand_clustered_dispatch(pd.DataFrame({"cost": np.zeros(24 * cs.k + 1)}), cs)


class TestEmeMpc:
    nb = micro_site({"pv"})
    sc = make_year(2, spot=[0.02, 0.1], co2=[40.0, 120.0], irr=[0, 500, 900, 0], electric=8.0)
    design = SystemDesign({"pv@B1": 20.0})

    def test_own_targets_reproduce_empc(self):
        em, _ = run_empc(self.design, self.sc, self.nb, CHRONO)
        targets = compute_horizon_targets(em, self.nb, CHRONO.t_mpc)
        eme, _ = run_eme_mpc(self.design, self.sc, self.nb, targets, CHRONO)
        assert np.allclose(eme.column("y_imp"), em.column("y_imp"), atol=1e-7)
        assert np.allclose(eme.column("g_exp:pv@B1"), em.column("g_exp:pv@B1"), atol=1e-7)
        assert (eme.trace["tier_count"] == 1).all()
        assert eme.trace["c_em"].max() <= 1e-6

    def test_short_targets_rejected(self):
        t = HorizonTargets(np.arange(10), np.zeros(10), np.zeros(10))
        with pytest.raises(ValueError):
            run_eme_mpc(self.design, self.sc, self.nb, t, CHRONO)


class TestRhMpc:
    def test_trace_and_step(self):
        nb = micro_site({"pv", "battery"})
        sc = make_year(2, irr=[0, 900, 0], electric=5.0, co2=[50.0, 150.0])
        rec, led = run_rh_mpc(SystemDesign({"pv@B1": 30.0, "battery@B1": 10.0}), sc, sc, nb, StrategyConfig())
        assert rec.n_solves == 8 and len(rec.trace) == 8
        assert rec.trace["t0"].tolist() == list(range(0, 48, 6))
        assert len(rec.frame) == 48
        assert zeb_gap(led) <= rec.slack + 1e-3

    def test_slack_reports_unreachable_balance(self):
        # gas heat only, nothing to export: the whole annual emission stays open
        nb = micro_site({"gas_boiler"})
        sc = make_year(2, sh=1.0)
        rec, led = run_rh_mpc(SystemDesign({"gas_boiler@B1": 5.0}), sc, sc, nb, StrategyConfig())
        assert zeb_gap(led) == pytest.approx(48 * 200.0)
        assert rec.slack == pytest.approx(zeb_gap(led), rel=1e-6)

    def test_length_mismatch(self):
        nb = micro_site(set())
        with pytest.raises(ValueError):
            run_rh_mpc(SystemDesign({}), make_year(2), make_year(3), nb)

    def test_repeatable(self):
        nb = micro_site({"pv", "battery"})
        sc = make_year(3, irr=[0, 700, 0], electric=[4.0, 6.0, 5.0], co2=[50.0, 150.0])
        ref = make_year(3, irr=[0, 500], electric=5.0, co2=[80.0, 120.0])
        design = SystemDesign({"pv@B1": 30.0, "battery@B1": 10.0})
        cfg = StrategyConfig(rh_tail_clusters=2, seed=3)
        a, la = run_rh_mpc(design, sc, ref, nb, cfg)
        b, lb = run_rh_mpc(design, sc, ref, nb, cfg)
        pd.testing.assert_frame_equal(la, lb)
        assert a.total_cost == b.total_cost


def test_infeasible_window_raises():
    nb = micro_site(set(), gc=1.0)
    with pytest.raises(StrategyError, match="iteration 0"):
        run_empc(SystemDesign({}), make_year(1, electric=5.0), nb)


def test_record_column_defaults_to_zero():
    rec = DispatchRecord("pf", pd.DataFrame({"cost": [1.0, 2.0], "weight": [1.0, 3.0]}), 7.0)
    assert rec.total_cost == 7.0
    assert rec.column("g:chp@PP").tolist() == [0.0, 0.0]
