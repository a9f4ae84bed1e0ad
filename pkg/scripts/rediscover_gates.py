"""Multi-start time-optimal campaigns for CZ, CCZbar and CZCZCZ.

Prints the shortest converged duration per gate and optionally writes
the full campaign summaries as JSON.
"""

import argparse
import sys
import time
from pathlib import Path

from rydpulse.geometry import InteractionMatrix
from rydpulse.io import atomic_write_json
from rydpulse.optimizer import OptimizerConfig, Problem, default_jobs, run_campaign
from rydpulse.pulse import pulse_to_dict
from rydpulse.targets import builtin

# (target, atoms, frequency terms, restarts)
CAMPAIGNS = {
    "CZ": ("CZ", 2, 1, 200),
    "CCZbar": ("CCZbar", 3, 2, 2000),
    "CZCZCZ": ("CZCZCZ", 3, 3, 2000),
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("gates", nargs="*", default=list(CAMPAIGNS), choices=list(CAMPAIGNS))
    ap.add_argument("--restarts", type=int, help="override the restart count")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=default_jobs())
    ap.add_argument("--out", type=Path)
    args = ap.parse_args(argv)

    summary = {}
    for gate in args.gates:
        name, n_atoms, k, restarts = CAMPAIGNS[gate]
        restarts = args.restarts or restarts
        prob = Problem(InteractionMatrix.perfect(n_atoms), builtin(name), "antisymmetric", k)
        t0 = time.perf_counter()
        res = run_campaign(OptimizerConfig(mode="time", restarts=restarts, seed=args.seed), prob,
                           jobs=args.jobs)
        elapsed = time.perf_counter() - t0
        best = res.best_by_duration
        entry = {"K": k, "restarts": restarts, "converged": res.n_converged, "seconds": elapsed}
        if best is None:
            print(f"{gate}: no converged restart ({elapsed:.0f} s)")
        else:
            entry.update(best.record.to_dict(), seed=best.seed, pulse=pulse_to_dict(best.pulse))
            print(f"{gate}: T = {best.record.duration:.4f}, T_R = {best.record.rydberg_time:.4f}, "
                  f"1-F = {best.record.infidelity:.1e}, seed {best.seed}, "
                  f"{res.n_converged}/{restarts} converged, {elapsed:.0f} s")
        summary[gate] = entry
    if args.out:
        atomic_write_json(args.out, summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
