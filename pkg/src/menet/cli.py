"""Command-line entry point: ``menet {run,day-ahead,roll,validate,plot-data}``.

Exit codes: 0 success, 2 invalid scenario or arguments, 3 infeasible
problem, 4 internal error.  Failures print one JSON object on stderr (and
into ``error.json`` when an output directory is given).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .day_ahead import DayAheadInfeasible, solve_with_repair
from .intraday import WindowError, execute_day_ahead, roll
from .milp import BACKENDS
from .reports import STRATEGIES, RunManifest, emit_plot_data, run_experiment
from .scenario import ConfigError, ScenarioConfig, load_baseline

logger = logging.getLogger("menet")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4
BASELINE = "baseline"


def _load(path: str) -> ScenarioConfig:
    if path == BASELINE:
        return load_baseline()
    try:
        return ScenarioConfig.load(path)
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e.strerror or e}") from e


def _manifest(args, cfg: ScenarioConfig, strategy: str | None = None) -> RunManifest:
    return RunManifest(
        scenario=args.scenario,
        seed=args.seed,
        dr=not args.no_dr,
        strategy=strategy or getattr(args, "strategy", "both"),
        out_dir=args.out,
        solver=args.solver,
        config_hash=cfg.config_hash(),
    )


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_bytes(text.encode())


def cmd_run(args) -> int:
    cfg = _load(args.scenario)
    report = run_experiment(_manifest(args, cfg), cfg)
    print(report.to_json())
    return EXIT_OK


def cmd_day_ahead(args) -> int:
    cfg = _load(args.scenario)
    m = _manifest(args, cfg, strategy="day-ahead-only")
    out = Path(args.out)
    _write(out, "manifest.json", m.to_json() + "\n")
    plan, log = solve_with_repair(cfg, dr_enabled=not args.no_dr, backend=args.solver)
    _write(out, "day_ahead.csv", plan.to_csv())
    _write(out, "day_ahead_costs.json", plan.cost_json(manifest_hash=m.hash, repair=log.to_dict()) + "\n")
    print(plan.cost_json(manifest_hash=m.hash))
    return EXIT_OK


def cmd_roll(args) -> int:
    cfg = _load(args.scenario)
    m = _manifest(args, cfg, strategy="rolling")
    out = Path(args.out)
    _write(out, "manifest.json", m.to_json() + "\n")
    plan, _ = solve_with_repair(cfg, dr_enabled=not args.no_dr, backend=args.solver)
    if args.verbatim:
        trace = execute_day_ahead(cfg, plan, args.seed)
    else:
        trace = roll(cfg, plan, args.seed, backend=args.solver)
    _write(out, "trace.csv", trace.to_csv())
    ledger = {**json.loads(trace.ledger_json()), "manifest_hash": m.hash}
    _write(out, "ledger.json", json.dumps(ledger, indent=1, sort_keys=True) + "\n")
    print(json.dumps({**trace.summary(), "manifest_hash": m.hash}, indent=1, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args.scenario)
    envs = cfg.envelopes()
    print(json.dumps({
        "status": "ok",
        "name": cfg.name,
        "config_hash": cfg.config_hash(),
        "stations": {e.station_id: len(cfg.sessions[e.station_id]) for e in envs},
    }, indent=1, sort_keys=True))
    return EXIT_OK


def cmd_plot_data(args) -> int:
    cfg = _load(args.scenario)
    report = run_experiment(_manifest(args, cfg), cfg, write=False)
    for p in emit_plot_data(report, args.out):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="menet", description="Two-stage scheduling of a micro-energy network with EV charging stations.")
    ap.add_argument("--version", action="version", version=f"menet {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeat for debug)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=True, out=True):
        p.add_argument("--scenario", default=BASELINE, help="scenario JSON file (default: built-in baseline)")
        if seed:
            p.add_argument("--seed", type=int, default=0, help="realization seed")
        p.add_argument("--no-dr", action="store_true", help="disable demand response")
        if out:
            p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--solver", choices=sorted(BACKENDS), default="highs")

    p = sub.add_parser("run", help="full matrix: scenario 1/2 and strategy 1/2")
    common(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="both")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("day-ahead", help="solve the day-ahead plan only")
    common(p)
    p.set_defaults(func=cmd_day_ahead)

    p = sub.add_parser("roll", help="day-ahead plan followed by the rolling controller")
    common(p)
    p.add_argument("--verbatim", action="store_true", help="execute the day-ahead plan unchanged instead of rolling")
    p.set_defaults(func=cmd_roll)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", default=BASELINE)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot-data", help="write the figure CSVs")
    common(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="both")
    p.set_defaults(func=cmd_plot_data)
    return ap


def _fail(args, code: int, exc: BaseException, **extra) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code, **extra}
    text = json.dumps(err, sort_keys=True)
    print(text, file=sys.stderr)
    out = getattr(args, "out", None)
    if out:
        try:
            _write(Path(out), "error.json", text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        return _fail(args, EXIT_CONFIG, e)
    except DayAheadInfeasible as e:
        return _fail(args, EXIT_INFEASIBLE, e, step=e.step, constraint=e.constraint)
    except WindowError as e:
        return _fail(args, EXIT_INFEASIBLE, e)
    except Exception as e:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        return _fail(args, EXIT_INTERNAL, e)


if __name__ == "__main__":
    sys.exit(main())
