"""Experiment matrix, comparison report and plot-ready CSV emission.

``run_experiment`` solves the day-ahead problem without and with demand
response (scenarios 1 and 2), draws one seeded renewable realization and
executes the chosen plan either verbatim (strategy 1) or through the rolling
controller (strategy 2).  Every figure file is plain RFC-4180 CSV; all JSON
artifacts carry the manifest hash, and ``artifacts.json`` ties each CSV to it
through its sha256.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .day_ahead import DispatchPlan, RepairLog, peak_valley_metric, solve_with_repair
from .intraday import ExecutionTrace, execute_day_ahead, fresh_forecast, realized_availability, roll
from .scenario import ScenarioConfig
from .timegrid import resample, table_csv

logger = logging.getLogger(__name__)

STRATEGIES = ("both", "day-ahead-only", "rolling")


@dataclass(frozen=True)
class RunManifest:
    """Everything that determines a run's outputs."""

    scenario: str
    seed: int
    dr: bool = True
    strategy: str = "both"
    out_dir: str = "out"
    solver: str = "highs"
    tool_version: str = __version__
    config_hash: str = ""

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")

    @property
    def hash(self) -> str:
        # the output location does not change results
        d = asdict(self)
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps({**asdict(self), "manifest_hash": self.hash}, indent=1, sort_keys=True)


@dataclass
class RunArtifacts:
    """In-memory results behind a report, used for plot data."""

    cfg: ScenarioConfig
    plans: dict[int, DispatchPlan] = field(default_factory=dict)
    repair: dict[int, RepairLog] = field(default_factory=dict)
    traces: dict[int, ExecutionTrace] = field(default_factory=dict)
    realization_seed: int = 0


@dataclass
class ComparisonReport:
    manifest_hash: str
    runs: dict[str, dict]
    peak_valley: dict[str, float]
    deviation: dict[str, dict]
    curtailment_kwh: dict[str, float]
    renewable_used_kwh: dict[str, float]
    stations: dict[str, dict]
    artifacts: RunArtifacts | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "artifacts"}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _energy(x: np.ndarray, dt: float) -> float:
    return float(np.sum(x) * dt)


def _plan_summary(plan: DispatchPlan, dr: bool, log: RepairLog) -> dict:
    pk, vl, diff = peak_valley_metric(plan.p_grid)
    return {
        "kind": "day-ahead",
        "dr": dr,
        "objective": plan.objective,
        "costs": plan.costs.to_dict(),
        "grid_peak_valley": {"peak": pk, "valley": vl, "difference": diff},
        "repair": log.to_dict(),
    }


def _trace_summary(trace: ExecutionTrace, scenario: int) -> dict:
    return {"kind": "intra-day", "plan_scenario": scenario, **trace.summary()}


def _artifact_path(out: Path, name: str, text: str, written: dict[str, str]) -> None:
    p = out / name
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(text.encode())
    written[name] = hashlib.sha256(text.encode()).hexdigest()


def run_experiment(manifest: RunManifest, cfg: ScenarioConfig | None = None, write: bool = True) -> ComparisonReport:
    """Run the scenario/strategy matrix described by ``manifest`` and write its artifacts.

    Scenario 1 is the plan without demand response, scenario 2 with it.  The
    intra-day strategies execute the scenario-2 plan, or the scenario-1 plan
    when demand response is switched off.

    Raises:
        ConfigError: invalid scenario.
        DayAheadInfeasible: no feasible day-ahead plan.
        WindowError: an intra-day window could not be solved even with slacks.
    """
    cfg = cfg or ScenarioConfig.load(manifest.scenario)
    if manifest.config_hash and manifest.config_hash != cfg.config_hash():
        raise ValueError("manifest config hash does not match the scenario")
    out = Path(manifest.out_dir)
    written: dict[str, str] = {}
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").write_text(manifest.to_json() + "\n")
    mh = manifest.hash
    art = RunArtifacts(cfg, realization_seed=manifest.seed)

    scenarios = (1, 2) if manifest.dr else (1,)
    runs: dict[str, dict] = {}
    for sc in scenarios:
        t0 = time.perf_counter()
        plan, log = solve_with_repair(cfg, dr_enabled=sc == 2, backend=manifest.solver)
        logger.info("scenario %d day-ahead solved in %.2f s, objective %.4f", sc, time.perf_counter() - t0, plan.objective)
        art.plans[sc], art.repair[sc] = plan, log
        runs[f"scenario{sc}"] = _plan_summary(plan, sc == 2, log)

    base = scenarios[-1]
    ref_plan = art.plans[base]
    if manifest.strategy in ("both",):
        art.traces[1] = execute_day_ahead(cfg, ref_plan, manifest.seed)
    if manifest.strategy in ("both", "rolling"):
        t0 = time.perf_counter()
        art.traces[2] = roll(cfg, ref_plan, manifest.seed, backend=manifest.solver)
        logger.info("rolling controller finished in %.2f s", time.perf_counter() - t0)
    for k, tr in art.traces.items():
        runs[f"strategy{k}"] = _trace_summary(tr, base)

    peak_valley = {}
    if 1 in art.plans and 2 in art.plans:
        d1 = runs["scenario1"]["grid_peak_valley"]["difference"]
        d2 = runs["scenario2"]["grid_peak_valley"]["difference"]
        peak_valley = {"scenario1": d1, "scenario2": d2, "reduction_pct": 100.0 * (d1 - d2) / d1 if d1 > 0 else 0.0}

    curtail, used = {}, {}
    for sc, plan in art.plans.items():
        dt = plan.grid.dt
        curtail[f"scenario{sc}"] = _energy(plan.p_curtailed, dt)
        used[f"scenario{sc}"] = _energy(plan.p_pv_used + plan.p_wt_used, dt)
    for k, tr in art.traces.items():
        ex = tr.executed
        curtail[f"strategy{k}"] = _energy(ex.p_curtailed, ex.grid.dt)
        used[f"strategy{k}"] = _energy(ex.p_pv_used + ex.p_wt_used, ex.grid.dt)

    stations = {}
    for sc, log in art.repair.items():
        for sid in sorted(log.decomposable):
            stations.setdefault(sid, {})[f"scenario{sc}"] = {
                "decomposable": log.decomposable[sid], "gap_kw": log.gaps.get(sid, 0.0)}

    report = ComparisonReport(
        manifest_hash=mh,
        runs=runs,
        peak_valley=peak_valley,
        deviation={f"strategy{k}": tr.deviation.to_dict() for k, tr in art.traces.items()},
        curtailment_kwh=curtail,
        renewable_used_kwh=used,
        stations=stations,
        artifacts=art,
    )
    if write:
        for sc, plan in art.plans.items():
            _artifact_path(out, f"day_ahead_scenario{sc}.csv", plan.to_csv(), written)
            _artifact_path(out, f"day_ahead_scenario{sc}_costs.json",
                           plan.cost_json(manifest_hash=mh, repair=art.repair[sc].to_dict()) + "\n", written)
        for k, tr in art.traces.items():
            _artifact_path(out, f"trace_strategy{k}.csv", tr.to_csv(), written)
            ledger = {**json.loads(tr.ledger_json()), "manifest_hash": mh}
            _artifact_path(out, f"ledger_strategy{k}.json", json.dumps(ledger, indent=1, sort_keys=True) + "\n", written)
        _artifact_path(out, "report.json", report.to_json() + "\n", written)
        for name, text in plot_tables(report).items():
            _artifact_path(out, f"plot_data/{name}", text, written)
        index = {"manifest_hash": mh, "files": dict(sorted(written.items()))}
        (out / "artifacts.json").write_text(json.dumps(index, indent=1) + "\n")
    return report


# -- plot data ---------------------------------------------------------------------


def _balance_stacks(plan: DispatchPlan) -> tuple[dict, dict]:
    st_dis = sum((s.p_dis for s in plan.stations), np.zeros(plan.grid.n_steps))
    st_ch = sum((s.p_ch for s in plan.stations), np.zeros(plan.grid.n_steps))
    electric = {
        "supply_gt": plan.p_gt,
        "supply_grid_buy": plan.p_buy,
        "supply_pv": plan.p_pv_used,
        "supply_wt": plan.p_wt_used,
        "supply_ess_dis": plan.p_ess_dis,
        "supply_ev_dis": st_dis,
        "demand_load": plan.load_e,
        "demand_grid_sell": plan.p_sell,
        "demand_ess_ch": plan.p_ess_ch,
        "demand_ev_ch": st_ch,
        "demand_hp": plan.p_hp,
        "base_load": plan.load_e + plan.dr.shift_out.values - plan.dr.shift_in.values + plan.dr.curtail_e.values,
    }
    heat = {
        "supply_hp": plan.q_hp,
        "supply_hs_dis": plan.h_hs_dis,
        "demand_load": plan.load_h,
        "demand_hs_ch": plan.h_hs_ch,
        "base_load": plan.load_h + plan.dr.curtail_h.values,
    }
    return electric, heat


def plot_tables(report: ComparisonReport) -> dict[str, str]:
    """CSV text per figure file name (see the README for the column layout)."""
    art = report.artifacts
    if art is None:
        raise ValueError("report carries no in-memory results; rerun the experiment")
    cfg = art.cfg
    da, fine = cfg.day_ahead_grid, cfg.intra_day_grid
    files: dict[str, str] = {}

    # day-ahead forecast, one-step-ahead intra-day forecast and realization
    models = cfg.renewable_models()
    cols = {}
    realized = realized_availability(cfg, art.realization_seed, fine)
    rc = cfg.rolling
    for src in ("pv", "wt"):
        ahead = np.empty(fine.n_steps)
        ahead[0] = realized[src][0]
        for k in range(1, fine.n_steps):
            ahead[k] = fresh_forecast({src: realized[src]}, k - 1, 2, 1, rc.intraday_sigma_fraction, art.realization_seed)[src][1]
        cols[f"{src}_day_ahead"] = resample(models[src].forecast, fine).values
        cols[f"{src}_intra_day"] = ahead
        cols[f"{src}_actual"] = realized[src]
    files["fig2_forecasts.csv"] = table_csv(fine, cols)

    envs_da = cfg.envelopes(da)
    envs_id = cfg.envelopes(fine)
    for env in envs_da:
        files[f"fig3_envelope_station{env.station_id}.csv"] = env.to_csv()
    files["fig4_station_potential.csv"] = table_csv(da, {
        **{f"st{e.station_id}_s_max_kwh": e.s_max.values for e in envs_da},
        **{f"st{e.station_id}_p_ch_max_kw": e.p_ch_max.values for e in envs_da},
    })
    for sc, plan in art.plans.items():
        el, ht = _balance_stacks(plan)
        files[f"fig5_electric_balance_scenario{sc}.csv"] = table_csv(da, el)
        files[f"fig6_heat_balance_scenario{sc}.csv"] = table_csv(da, ht)
    files["fig7_max_potential.csv"] = table_csv(fine, {
        **{f"st{e.station_id}_s_max_day_ahead": resample(e.s_max, fine).values for e in envs_da},
        **{f"st{e.station_id}_s_max_intra_day": e.s_max.values for e in envs_id},
    })
    if 2 in art.traces:
        tr = art.traces[2]
        ref, ex = tr.reference, tr.executed
        cols = {}
        for name, f in (("gt", lambda p: p.p_gt), ("grid", lambda p: p.p_grid),
                        ("ess", lambda p: p.p_ess_dis - p.p_ess_ch), ("hp", lambda p: p.p_hp),
                        ("hs", lambda p: p.h_hs_dis - p.h_hs_ch)):
            cols[f"{name}_plan"] = f(ref)
            cols[f"{name}_output"] = f(ex)
        for r, e in zip(ref.stations, ex.stations):
            cols[f"st{r.station_id}_plan"] = r.p_dis - r.p_ch
            cols[f"st{r.station_id}_output"] = e.p_dis - e.p_ch
        files["fig8_plan_vs_output.csv"] = table_csv(fine, cols)
    if art.traces:
        cols = {}
        # deliverable minus committed: negative entries are shortages
        for k, tr in sorted(art.traces.items()):
            for src in ("pv", "wt"):
                cols[f"{src}_strategy{k}"] = tr.realized[src] - tr.committed[src]
        files["fig9_forecast_difference.csv"] = table_csv(fine, cols)
    return files


def emit_plot_data(report: ComparisonReport, out_dir) -> list[Path]:
    """Write one CSV per figure into ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in plot_tables(report).items():
        p = out / name
        p.write_bytes(text.encode())
        paths.append(p)
    return paths
