"""Command-line front end.

Subcommands: ``evaluate``, ``optimize``, ``scan-distance``,
``scan-geometry``, ``scan-params``, ``verify-tables`` and ``profile``.
Runs are described by a TOML config (see :mod:`rydpulse.config`); results
are written as JSON with the config hash, tables as CSV.  In 3-atom preset
geometries the apex (the atom with two nearest-neighbour couplings) is atom
2 counting from 1, i.e. index 1 in configs and pair lists.

Exit codes: 0 ok, 1 table verification failed, 2 config error,
3 simulation error, 4 no solution.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .dynamics import SimulationError, trajectory, write_trajectory_csv
from .geometry import GeometryError
from .io import ResumableCSV, ResumeError, atomic_write_json, dumps_json
from .objective import Objective, evaluate
from .optimizer import (CampaignResult, OptimizerError, Problem, default_jobs, run_campaign,
                        select_best, warm_start)
from .pulse import (PulseError, load_pulse, pulse_to_dict, sample_profile, save_pulse,
                    write_profile_csv)
from .scan import (DISTANCE_HEADER, GEOMETRY_HEADER, PARAMS_HEADER, ScanError, distance_scan,
                   geometry_sweep, param_count_sweep)
from .tables import TABLE_IDS, TableError, verify_table
from .targets import TargetError

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_NO_SOLUTION = 4

CONFIG_ERRORS = (ConfigError, PulseError, GeometryError, TargetError, OptimizerError,
                 ScanError, TableError, ResumeError, OSError)


def _load(args) -> RunConfig:
    return load_config(args.config).with_seed(args.seed)


def _emit(data, out) -> None:
    if out is not None:
        atomic_write_json(out, data)
    sys.stdout.write(dumps_json(data))


def _optimizer_config(cfg: RunConfig):
    opt = cfg.optimizer
    # [objective] gamma applies unless [optimizer] sets its own
    if "gamma" not in cfg.raw.get("optimizer", {}):
        opt = opt.replace(gamma=cfg.objective.gamma)
    return opt


def _record_entry(rec):
    if rec is None:
        return None
    return rec.to_dict()


def campaign_document(cfg: RunConfig, problem: Problem, result: CampaignResult) -> dict:
    """JSON body of an optimization run; deterministic for a given config."""
    return {
        "config_hash": cfg.hash,
        "config": cfg.raw,
        "problem": {
            "target": problem.target.name, "ansatz": problem.ansatz.value,
            "k_terms": problem.k_terms, "n_atoms": problem.mat.n_atoms,
        },
        "mode": result.config.mode,
        "n_restarts": len(result.restarts),
        "n_converged": result.n_converged,
        "best": _record_entry(result.best),
        "best_by_duration": _record_entry(result.best_by_duration),
        "best_by_rydberg_time": _record_entry(result.best_by_rydberg_time),
        "best_by_infidelity": _record_entry(result.best_by_infidelity),
        "restarts": [r.to_dict() for r in result.restarts],
    }


# -- subcommands ---------------------------------------------------------------

def cmd_evaluate(args) -> int:
    cfg = _load(args)
    pulse = cfg.pulse_spec()
    target = cfg.target.build()
    mat = cfg.geometry.build()
    rec = evaluate(mat, pulse, Objective(target, cfg.objective.gamma))
    _emit({"config_hash": cfg.hash, "target": target.name, "pulse": pulse_to_dict(pulse),
           "record": rec.to_dict()}, args.out)
    if args.trajectory is not None:
        traj = trajectory(mat, pulse, cfg.objective.gamma, n_samples=args.samples)
        write_trajectory_csv(traj, args.trajectory)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _load(args)
    opt = _optimizer_config(cfg)
    if args.restarts is not None:
        opt = opt.replace(restarts=args.restarts)
    target = cfg.target.build()
    mat = cfg.geometry.build()
    fixed = cfg.pulse.file is not None or cfg.pulse.params is not None
    if fixed:
        # a given pulse is re-optimized in place of a random search
        start = cfg.pulse_spec()
        problem = Problem(mat, target, start.ansatz, start.k_terms)
        rec = warm_start(start, problem, opt)
        result = CampaignResult(opt, [rec], **select_best(opt, [rec]))
    else:
        problem = Problem(mat, target, cfg.pulse.ansatz, cfg.pulse.k)
        progress = None
        if args.verbose:
            def progress(r):
                state = "ok" if r.converged else "--"
                dur = r.record.duration if r.record else float("nan")
                print(f"seed {r.seed} {state} T={dur:.4f}", file=sys.stderr)
        result = run_campaign(opt, problem, jobs=args.jobs, progress=progress)
    doc = campaign_document(cfg, problem, result)
    if args.out is not None:
        atomic_write_json(args.out, doc)
    if args.pulse_out is not None and result.best is not None:
        save_pulse(result.best.pulse, args.pulse_out)
    summary = {"config_hash": cfg.hash, "n_restarts": doc["n_restarts"],
               "n_converged": doc["n_converged"], "best": doc["best"]}
    sys.stdout.write(dumps_json(summary))
    if result.no_solution:
        print("no restart reached the convergence criterion", file=sys.stderr)
        return EXIT_NO_SOLUTION
    return EXIT_OK


def _writer(path, header, cfg: RunConfig, fresh: bool):
    return ResumableCSV(path, header, cfg.hash, resume=not fresh)


def _pair_path(out: Path, pair, n_pairs: int) -> Path:
    if n_pairs == 1:
        return out
    return out.with_name(f"{out.stem}_pair{pair[0]}{pair[1]}{out.suffix}")


def cmd_scan_distance(args) -> int:
    cfg = _load(args)
    arr = cfg.geometry.arrangement()
    if arr is None:
        raise ConfigError("scan-distance needs atom positions (a preset or positions geometry)")
    pulse = cfg.pulse_spec()
    target = cfg.target.build()
    pairs = cfg.scan.pairs
    out = Path(args.out)
    for pair in pairs:
        path = _pair_path(out, pair, len(pairs))
        writer = _writer(path, DISTANCE_HEADER, cfg, args.fresh)
        distance_scan(arr, pulse, target, cfg.objective.gamma, pair, cfg.scan.deltas,
                      perfect_blockade=cfg.geometry.perfect_blockade, writer=writer)
        print(f"pair {pair[0]}-{pair[1]}: {path}")
    return EXIT_OK


def cmd_scan_geometry(args) -> int:
    cfg = _load(args)
    if cfg.geometry.kind != "isosceles":
        raise ConfigError("scan-geometry sweeps an isosceles geometry; set kind = \"isosceles\"")
    opt = _optimizer_config(cfg).replace(restarts=cfg.scan.restarts)
    writer = _writer(args.out, GEOMETRY_HEADER, cfg, args.fresh)
    geometry_sweep(cfg.geometry.v_nn, cfg.scan.v_nnn, cfg.target.build(), cfg.pulse.k, opt,
                   ansatz=cfg.pulse.ansatz, jobs=args.jobs, writer=writer)
    return _report_rows(writer)


def cmd_scan_params(args) -> int:
    cfg = _load(args)
    mode = args.mode or cfg.optimizer.mode
    if mode not in ("time", "rydberg"):
        raise ConfigError("scan-params needs mode \"time\" or \"rydberg\" ([optimizer] or --mode)")
    opt = _optimizer_config(cfg).replace(restarts=cfg.scan.restarts)
    writer = _writer(args.out, PARAMS_HEADER, cfg, args.fresh)
    param_count_sweep(cfg.target.build(), cfg.geometry.build(), mode, cfg.scan.k_list, opt,
                      ansatze=cfg.scan.ansatze, jobs=args.jobs, writer=writer)
    return _report_rows(writer)


def _report_rows(writer: ResumableCSV) -> int:
    rows = writer.rows()
    print(",".join(writer.header))
    for row in rows:
        print(",".join(row))
    if rows and all(r[-1] == "nan" for r in rows):
        return EXIT_NO_SOLUTION
    return EXIT_OK


def cmd_verify_tables(args) -> int:
    ids = args.tables or list(TABLE_IDS)
    report, ok = [], True
    for tid in ids:
        for chk in verify_table(tid):
            d = chk.to_dict()
            report.append(d)
            ok &= chk.passed
            flag = "PASS" if chk.passed else "FAIL"
            print(f"{flag} {d['column']:6s} 1-F={d['infidelity']:.2e} (limit {d['infidelity_limit']:.0e})"
                  f"  T_R={d['rydberg_time']:.4f} (published {d['published_rydberg_time']})")
    if args.out is not None:
        atomic_write_json(args.out, {"tables": ids, "passed": ok, "columns": report})
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_profile(args) -> int:
    pulse = load_pulse(args.pulse)
    write_profile_csv(sample_profile(pulse, args.samples), args.out)
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("config", help="TOML run configuration")
    p.add_argument("--seed", type=int, default=None, help="override [optimizer] seed")
    p.add_argument("--jobs", type=int, default=default_jobs(),
                   help="parallel workers (default: $RYDPULSE_JOBS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rydpulse", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="simulate and score a fixed pulse")
    _add_common(p)
    p.add_argument("--out", help="also write the JSON record here")
    p.add_argument("--trajectory", help="CSV path for dense block populations")
    p.add_argument("--samples", type=int, default=101, help="trajectory samples")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", help="multi-start campaign, or re-optimize a given pulse")
    _add_common(p)
    p.add_argument("--out", help="campaign result JSON")
    p.add_argument("--pulse-out", help="write the best pulse as a parameter file")
    p.add_argument("--restarts", type=int, default=None, help="override [optimizer] restarts")
    p.add_argument("-v", "--verbose", action="store_true", help="report every restart")
    p.set_defaults(func=cmd_optimize)

    for name, func, helptext in (
        ("scan-distance", cmd_scan_distance, "fixed-pulse infidelity versus pair distance"),
        ("scan-geometry", cmd_scan_geometry, "Rydberg-time campaigns over next-nearest couplings"),
        ("scan-params", cmd_scan_params, "campaigns over ansatz size"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        p.add_argument("--out", required=True, help="CSV output (resumable, see manifest)")
        p.add_argument("--fresh", action="store_true", help="discard earlier progress")
        if name == "scan-params":
            p.add_argument("--mode", choices=("time", "rydberg"), default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("verify-tables", help="check the bundled published pulses")
    _add_common(p, config=False)
    p.add_argument("tables", nargs="*", metavar="TABLE", help=f"table ids ({', '.join(TABLE_IDS)}); default all")
    p.add_argument("--out", help="JSON report")
    p.set_defaults(func=cmd_verify_tables)

    p = sub.add_parser("profile", help="sample a pulse's phase profile as CSV")
    _add_common(p, config=False)
    p.add_argument("pulse", help="pulse parameter file")
    p.add_argument("--samples", type=int, default=201)
    p.add_argument("--out", required=True, help="CSV output")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
