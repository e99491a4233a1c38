"""Command-line entry point: ``zenop {ingest,stats,invest,operate,report}``.

Exit codes: 0 success, 2 invalid input or usage, 3 infeasible model,
4 failure during an operation run.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import ledger as _ledger
from .cluster import cluster_days, write_year_stats, year_stats
from .domain import (
    LOAD_ROLES,
    WEATHER_ROLES,
    CatalogError,
    EconomicParams,
    Neighborhood,
    default_catalog,
    load_catalog,
    neighborhood_from_dict,
    read_yaml,
)
from .ingest import IngestError, ScenarioYear, build_scenario, load_series_csv
from .model import (
    ModelError,
    SystemDesign,
    build_investment_model,
    cost_breakdown,
    extract_design,
    extract_dispatch,
    solve,
)
from .solver import SolverError
from .strategies import (
    STRATEGIES,
    StrategyConfig,
    StrategyError,
    compute_horizon_targets,
    expand_clustered_dispatch,
    run_eme_mpc,
    run_empc,
    run_perfect_foresight,
    run_rh_mpc,
)

logger = logging.getLogger("zenop")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_RUN = 0, 2, 3, 4
# the design MILP with hourly on/off binaries can stall far from the gap target
INVEST_TIME_LIMIT = 600.0


class ManifestError(ValueError):
    pass


@dataclass
class RunManifest:
    """Everything a run needs, with paths resolved against the manifest's folder."""

    root: Path
    site: dict
    scenarios: dict[int, dict | str]
    reference_year: int
    seed: int
    catalog_path: Path | None = None
    strategy: dict = field(default_factory=dict)
    invest: dict = field(default_factory=dict)
    output: Path = Path("runs")

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        if not path.is_file():
            raise ManifestError(f"manifest {path} not found")
        d = read_yaml(path) or {}
        root = path.parent
        if "seed" not in d:
            raise ManifestError("manifest must set an explicit 'seed'")
        for key in ("site", "scenarios", "reference_year"):
            if key not in d:
                raise ManifestError(f"manifest lacks '{key}'")
        site = d["site"]
        if isinstance(site, str):
            site_path = root / site
            if not site_path.is_file():
                raise ManifestError(f"site file {site_path} not found")
            site = read_yaml(site_path)
        catalog = root / d["catalog"] if d.get("catalog") else None
        if catalog is not None and not catalog.is_file():
            raise ManifestError(f"catalog file {catalog} not found")
        scenarios = {int(y): v for y, v in d["scenarios"].items()}
        for y, spec in scenarios.items():
            files = {"scenario": spec} if isinstance(spec, str) else spec
            for role, f in files.items():
                if not (root / f).is_file():
                    raise ManifestError(f"scenario {y}: {role} series file {root / f} not found")
        return cls(
            root, site, scenarios, int(d["reference_year"]), int(d["seed"]), catalog,
            d.get("strategy", {}) or {}, d.get("invest", {}) or {}, Path(d.get("output", "runs")),
        )

    def neighborhood(self, gc_mode: str | None = None) -> Neighborhood:
        cat = load_catalog(self.catalog_path) if self.catalog_path else default_catalog()
        nb = neighborhood_from_dict(self.site, cat)
        if gc_mode:
            nb = replace(nb, econ=replace(nb.econ, gc_mode=gc_mode))
        return nb

    def scenario(self, year: int, nb: Neighborhood) -> ScenarioYear:
        if year not in self.scenarios:
            raise ManifestError(f"no scenario configured for {year}")
        spec = self.scenarios[year]
        ref = year == self.reference_year
        if isinstance(spec, str):
            return ScenarioYear.load_csv(self.root / spec, year, reference=ref)
        series = {r: load_series_csv(self.root / spec[r], r) for r in WEATHER_ROLES if r in spec}
        loads: dict[str, dict] = {}
        for role, f in spec.items():
            if ":" in role:
                b, r = role.split(":")
                loads.setdefault(b, {})[r] = load_series_csv(self.root / f, role)
        return build_scenario(year, series, nb.load_buildings(), loads, reference=ref)

    def strategy_config(self, args) -> StrategyConfig:
        s = dict(self.strategy)
        if "deltas" in s:
            s["deltas"] = tuple(float(v) for v in s["deltas"])
        s["seed"] = self.seed if args.seed is None else args.seed
        if args.mipgap is not None:
            s["mipgap"] = args.mipgap
        if args.time_limit is not None:
            s["time_limit"] = args.time_limit
        if getattr(args, "tmpc", None) is not None:
            s["t_mpc"] = args.tmpc
        if getattr(args, "step", None) is not None:
            s["implement_hours"] = args.step
        return StrategyConfig(**s)


def _out_dir(args, manifest: RunManifest | None) -> Path:
    if args.out:
        return Path(args.out)
    if manifest is not None:
        return manifest.root / manifest.output
    return Path("runs")


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=float))


# ---- commands -------------------------------------------------------------------


def cmd_ingest(args, manifest: RunManifest) -> int:
    nb = manifest.neighborhood()
    out = _out_dir(args, manifest)
    out.mkdir(parents=True, exist_ok=True)
    for year in args.year or sorted(manifest.scenarios):
        sc = manifest.scenario(year, nb)
        path = out / f"scenario_{year}.csv"
        sc.save_csv(path)
        print(f"{year}: {sc.n_hours} hours -> {path}")
    return EXIT_OK


def cmd_stats(args, manifest: RunManifest) -> int:
    nb = manifest.neighborhood()
    year = args.year or manifest.reference_year
    sc = manifest.scenario(year, nb)
    roles = args.roles or list(WEATHER_ROLES)
    unknown = set(roles) - set(sc.roles())
    if unknown:
        raise ManifestError(f"unknown roles {sorted(unknown)}")
    files = write_year_stats(year_stats(sc, roles), _out_dir(args, manifest) / "stats" / str(year))
    for f in files:
        print(f)
    return EXIT_OK


def cmd_invest(args, manifest: RunManifest) -> int:
    nb = manifest.neighborhood(args.gc_mode)
    cfg = manifest.strategy_config(args)
    sc = manifest.scenario(manifest.reference_year, nb)
    k = int(manifest.invest.get("clusters", 50))
    clusters = cluster_days(sc, min(k, sc.n_days), cfg.seed)
    inst = build_investment_model(clusters.to_profile(), nb, roof_limit=(args.case == "pvlim"))
    if args.dump_lp:
        inst.lp.write_lp(args.dump_lp)
    limit = args.time_limit if args.time_limit is not None else manifest.invest.get("time_limit", INVEST_TIME_LIMIT)
    try:
        res = solve(inst, cfg.mipgap, limit)
    except SolverError as exc:
        print(f"investment model not solved: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if not res.feasible:
        print(f"investment model {res.status}; constraint families: {', '.join(res.infeasible_families)}",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    design = extract_design(inst, res)
    out = _out_dir(args, manifest) / f"invest_{args.case}"
    out.mkdir(parents=True, exist_ok=True)
    design.save(out / "design.yaml")
    clusters.save(out / "clusters.json")
    dispatch = extract_dispatch(inst, res)
    dispatch.to_csv(out / "dispatch.csv", index=False)
    led = _ledger.account(dispatch, nb.catalog)
    em, comp = _ledger.totals(led)
    parts = cost_breakdown(inst, res)
    _write_json(
        out / "summary.json",
        {
            "case": args.case,
            "status": res.status,
            "gap": res.gap,
            "objective": res.objective,
            "investment_cost": parts["investment"],
            "operation_cost_discounted": parts["operation"],
            "emissions_g": em,
            "compensations_g": comp,
            "zeb_gap_g": em - comp,
            "capacity": design.capacity,
            "heating_grid": design.heating_grid,
        },
    )
    print(f"{args.case}: objective {res.objective:.2f} (gap {res.gap:.4f}) -> {out}")
    return EXIT_OK


def _targets_for(design, manifest, nb, cfg):
    ref = manifest.scenario(manifest.reference_year, nb)
    pf, _ = run_perfect_foresight(design, ref, nb, cfg)
    proxy = expand_clustered_dispatch(pf, pf.clusters) if pf.clusters is not None else pf.frame
    return compute_horizon_targets(proxy, nb, cfg.t_mpc)


def run_one(manifest_path: str, design_path: str, strategy: str, year: int, out_root: str, opts: dict) -> dict:
    """One (strategy, year) run; returns its summary.  Safe to call in a worker process."""
    args = argparse.Namespace(**opts)
    manifest = RunManifest.load(manifest_path)
    nb = manifest.neighborhood(opts.get("gc_mode"))
    cfg = manifest.strategy_config(args)
    design = SystemDesign.load(design_path)
    sc = manifest.scenario(year, nb)
    t0 = time.perf_counter()
    if strategy == "pf":
        rec, led = run_perfect_foresight(design, sc, nb, cfg)
    elif strategy == "empc":
        rec, led = run_empc(design, sc, nb, cfg)
    elif strategy == "eme-mpc":
        rec, led = run_eme_mpc(design, sc, nb, _targets_for(design, manifest, nb, cfg), cfg)
    else:
        ref_year = opts.get("reference_year") or manifest.reference_year
        ref = manifest.scenario(ref_year, nb)
        rec, led = run_rh_mpc(design, sc, ref, nb, cfg)
    wall = time.perf_counter() - t0
    out = Path(out_root) / f"{strategy}_{year}"
    out.mkdir(parents=True, exist_ok=True)
    rec.frame.to_csv(out / "dispatch.csv", index=False, float_format="%.10g")
    led.to_csv(out / "ledger.csv", index=False, float_format="%.10g")
    if rec.trace is not None:
        rec.trace.to_csv(out / "trace.csv", index=False, float_format="%.10g")
    em, comp = _ledger.totals(led)
    summary = {
        "strategy": strategy,
        "year": year,
        "total_cost": rec.total_cost,
        "objective": rec.objective,
        "emissions_g": em,
        "compensations_g": comp,
        "zeb_gap_g": em - comp,
        "slack_g": rec.slack,
        "max_gap": rec.max_gap,
        "n_solves": rec.n_solves,
        "step": cfg.step(strategy),
        "t_mpc": cfg.t_mpc,
    }
    _write_json(out / "summary.json", summary)
    _write_json(out / "timing.json", {"wall_time_s": wall})
    return summary


def cmd_operate(args, manifest: RunManifest) -> int:
    if not Path(args.design).is_file():
        raise ManifestError(f"design file {args.design} not found")
    years = args.year or [manifest.reference_year]
    for y in years:
        if y not in manifest.scenarios:
            raise ManifestError(f"no scenario configured for {y}")
    strategies = args.strategy
    out = _out_dir(args, manifest)
    opts = {k: getattr(args, k) for k in ("seed", "mipgap", "time_limit", "tmpc", "step", "gc_mode", "reference_year")}
    jobs = [(str(args.manifest), args.design, s, y, str(out), opts) for s in strategies for y in years]
    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                summaries = list(pool.map(run_one, *zip(*jobs)))
        else:
            summaries = [run_one(*j) for j in jobs]
    except (StrategyError, ModelError, SolverError) as exc:
        print(f"operation failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    for s in summaries:
        print(f"{s['strategy']} {s['year']}: cost {s['total_cost']:.2f}, zeb gap {s['zeb_gap_g']:.1f} g")
    return EXIT_OK


def cmd_report(args, manifest: RunManifest | None) -> int:
    runs = []
    for d in args.runs:
        d = Path(d)
        if not (d / "summary.json").is_file() or not (d / "ledger.csv").is_file():
            raise ManifestError(f"{d} is not a run directory")
        s = json.loads((d / "summary.json").read_text())
        runs.append({"name": d.name, "ledger": pd.read_csv(d / "ledger.csv"), "slack": s.get("slack_g", 0.0), **s})
    if not runs:
        raise ManifestError("no runs given")
    table = _ledger.compare_runs(runs, _ledger.REFERENCE_LINES_T if args.reference_lines else None)
    out = _out_dir(args, manifest) / "report.csv"
    _ledger.write_report(table, out)
    with pd.option_context("display.width", 160, "display.max_columns", 20):
        print(table.to_string(index=False))
    return EXIT_OK


# ---- argument parsing ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zenop", description="Design and operation of zero-emission neighbourhoods.")
    p.add_argument("--manifest", help="run manifest (YAML)")
    p.add_argument("--out", help="output directory (default: manifest 'output')")
    p.add_argument("--mipgap", type=float, default=None, help="relative MIP gap (default 0.01)")
    p.add_argument("--time-limit", type=float, default=None, help="per-solve time limit in seconds")
    p.add_argument("--seed", type=int, default=None, help="override the manifest seed")
    p.add_argument("--gc-mode", choices=("sum", "separate"), default=None, help="grid-connection constraint form")
    p.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="align raw series and write one CSV per scenario year")
    s.add_argument("--year", type=int, action="append")

    s = sub.add_parser("stats", help="duration, boxplot and density data of a year")
    s.add_argument("--year", type=int)
    s.add_argument("--roles", nargs="+", help="series roles (default: the four weather series)")

    s = sub.add_parser("invest", help="solve the investment model on the reference year")
    s.add_argument("--case", choices=("base", "pvlim"), default="base")
    s.add_argument("--dump-lp", help="also write the model in LP format to this path")

    s = sub.add_parser("operate", help="operate a design with one or more strategies")
    s.add_argument("--design", required=True)
    s.add_argument("--strategy", nargs="+", choices=STRATEGIES, required=True)
    s.add_argument("--year", type=int, nargs="+")
    s.add_argument("--reference-year", type=int, default=None)
    s.add_argument("--step", type=int, default=None, help="implemented hours per iteration")
    s.add_argument("--tmpc", type=int, default=None, help="MPC window length in hours")
    s.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("report", help="compare finished runs")
    s.add_argument("runs", nargs="*")
    s.add_argument("--reference-lines", action="store_true", help="attach published annual emission levels")
    return p


COMMANDS = {"ingest": cmd_ingest, "stats": cmd_stats, "invest": cmd_invest, "operate": cmd_operate,
            "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = RunManifest.load(args.manifest) if args.manifest else None
        if manifest is None and args.command != "report":
            raise ManifestError("--manifest is required")
        return COMMANDS[args.command](args, manifest)
    except (ManifestError, IngestError, CatalogError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
