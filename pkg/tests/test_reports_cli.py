import csv
import hashlib
import json

import numpy as np
import pytest
from conftest import toy_doc

from menet import cli
from menet.reports import RunManifest
from menet.scenario import load_baseline


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["run", "--seed", "42", "--out", str(out)]) == 0
    return out


def test_run_writes_the_indexed_artifacts(run_dir):
    index = json.loads((run_dir / "artifacts.json").read_text())
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert index["manifest_hash"] == manifest["manifest_hash"]
    for name, digest in index["files"].items():
        assert hashlib.sha256((run_dir / name).read_bytes()).hexdigest() == digest
    report = json.loads((run_dir / "report.json").read_text())
    assert set(report["runs"]) == {"scenario1", "scenario2", "strategy1", "strategy2"}


def test_electric_balance_table_closes(run_dir):
    for sc in (1, 2):
        t = read_csv(run_dir / f"plot_data/fig5_electric_balance_scenario{sc}.csv")
        supply = sum(v for k, v in t.items() if k.startswith("supply_"))
        demand = sum(v for k, v in t.items() if k.startswith("demand_"))
        assert np.max(np.abs(supply - demand)) < 1e-4
        h = read_csv(run_dir / f"plot_data/fig6_heat_balance_scenario{sc}.csv")
        hs = sum(v for k, v in h.items() if k.startswith("supply_"))
        hd = sum(v for k, v in h.items() if k.startswith("demand_"))
        assert np.max(np.abs(hs - hd)) < 1e-4


def test_rolling_forecast_difference_is_never_a_shortage(run_dir):
    t = read_csv(run_dir / "plot_data/fig9_forecast_difference.csv")
    assert t["pv_strategy2"].min() >= -1e-6 and t["wt_strategy2"].min() >= -1e-6
    assert len(t["step"]) == 96


def test_envelope_tables_have_one_row_per_step(run_dir):
    files = sorted((run_dir / "plot_data").glob("fig3_envelope_station*.csv"))
    assert len(files) == len(load_baseline().stations)
    for f in files:
        assert len(read_csv(f)["step"]) == 24


def test_report_costs_follow_from_the_csv(run_dir):
    cfg = load_baseline()
    report = json.loads((run_dir / "report.json").read_text())
    t = read_csv(run_dir / "day_ahead_scenario2.csv")
    tie = cfg.grid_tie
    c_gird = np.sum((tie.price_buy.values + tie.sigma_gird) * t["p_buy"]
                    - (tie.price_sell.values - tie.sigma_gird) * t["p_sell"])
    assert c_gird == pytest.approx(report["runs"]["scenario2"]["costs"]["c_gird"], abs=1e-3)
    c_cur = cfg.prices.lambda_cur * t["p_curtailed"].sum()
    assert c_cur == pytest.approx(report["runs"]["scenario2"]["costs"]["c_cur"], abs=1e-4)
    tr = read_csv(run_dir / "trace_strategy1.csv")
    dev = cfg.penalty_rate * (tr["pv_shortage"] + tr["wt_shortage"]).sum() * 0.25
    assert dev == pytest.approx(report["deviation"]["strategy1"]["total"], abs=1e-4)
    c_g = json.loads((run_dir / "ledger_strategy2.json").read_text())["c_g"]
    assert read_csv(run_dir / "trace_strategy2.csv")["c_g"].sum() == pytest.approx(c_g, abs=1e-4)


def test_day_ahead_only_without_dr_gives_one_plan(tmp_path, capsys):
    assert cli.main(["run", "--no-dr", "--strategy", "day-ahead-only", "--out", str(tmp_path)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert list(report["runs"]) == ["scenario1"]
    assert report["peak_valley"] == {} and report["deviation"] == {}
    assert not (tmp_path / "trace_strategy1.csv").exists()


def test_malformed_scenario_exits_with_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"version": 7}')
    out = tmp_path / "out"
    assert cli.main(["day-ahead", "--scenario", str(bad), "--out", str(out)]) == cli.EXIT_CONFIG
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and err["exit_code"] == 2
    assert json.loads((out / "error.json").read_text()) == err
    assert cli.main(["validate", "--scenario", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG


def test_infeasible_scenario_exits_with_code_three(tmp_path, capsys):
    d = toy_doc()
    d["loads"]["electric"][7] = 5000.0
    path = tmp_path / "infeasible.json"
    path.write_text(json.dumps(d))
    assert cli.main(["day-ahead", "--no-dr", "--scenario", str(path), "--out", str(tmp_path)]) == cli.EXIT_INFEASIBLE
    err = json.loads(capsys.readouterr().err)
    assert err["step"] == 7 and err["constraint"] == "electric_balance"


def test_validate_reports_station_sizes(capsys):
    assert cli.main(["validate"]) == 0
    info = json.loads(capsys.readouterr().out)
    cfg = load_baseline()
    assert info["status"] == "ok" and info["config_hash"] == cfg.config_hash()
    assert info["stations"] == {s.station_id: s.fleet.n_evs for s in cfg.stations}


def test_manifest_hash_ignores_the_output_directory():
    a = RunManifest("baseline", 1, out_dir="a")
    assert a.hash == RunManifest("baseline", 1, out_dir="b").hash
    assert a.hash != RunManifest("baseline", 2, out_dir="a").hash
    with pytest.raises(ValueError):
        RunManifest("baseline", 1, strategy="sometimes")
