"""Calibrate a theta'-CCZbar pulse for three atoms on a line.

Two stages, both in rydberg mode (decay active):

1. A multi-start campaign on the line with perfectly blockaded nearest
   neighbours and the outer coupling ``V_nnn``.  Blocks are small there,
   so restarts are cheap.
2. The lowest-infidelity pulse is carried to the finite nearest-neighbour
   coupling ``V_nn`` by warm starts on a geometric ladder.

The result is the bundled pulse used by the robustness acceptance test.
Continuing the symmetric-triangle pulse towards the line instead loses
its solution branch near ``V_nnn = 4``.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from rydpulse.geometry import InteractionMatrix, interactions_from_positions, line
from rydpulse.objective import Objective, evaluate
from rydpulse.optimizer import OptimizerConfig, Problem, default_jobs, run_campaign, warm_start
from rydpulse.pulse import save_pulse
from rydpulse.targets import builtin

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "line_thetaprime_CCZbar.toml"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k-terms", type=int, default=5)
    ap.add_argument("--v-nn", type=float, default=32.0)
    ap.add_argument("--v-nnn", type=float, default=0.5)
    ap.add_argument("--restarts", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ladder-start", type=float, default=256.0)
    ap.add_argument("--ladder-steps", type=int, default=13)
    ap.add_argument("--gamma", type=float, default=1e-4)
    ap.add_argument("--jobs", type=int, default=default_jobs())
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args(argv)

    target = builtin("thetaprime_CCZbar")
    cfg = OptimizerConfig(mode="rydberg", rydberg_gamma=args.gamma, restarts=args.restarts,
                          seed=args.seed)
    mat = InteractionMatrix.from_upper(3, [math.inf, args.v_nnn, math.inf])
    res = run_campaign(cfg, Problem(mat, target, "antisymmetric", args.k_terms), jobs=args.jobs)
    if res.best is None:
        print("no converged restart", file=sys.stderr)
        return 1
    rec = res.best.record
    print(f"campaign: {res.n_converged}/{args.restarts} converged, best seed {res.best.seed}: "
          f"T={rec.duration:.3f} T_R={rec.rydberg_time:.4f} 1-F={rec.infidelity:.3e}", flush=True)

    pulse, free = res.best.pulse, None
    warm = cfg.replace(polish_iters=1000)
    for v in np.geomspace(args.ladder_start, args.v_nn, args.ladder_steps):
        mat = InteractionMatrix.from_upper(3, [v, args.v_nnn, v])
        r = warm_start(pulse, Problem(mat, target, "antisymmetric", args.k_terms), warm,
                       free_values=free)
        rec = r.record
        print(f"V_nn={v:8.3f} converged={r.converged} T={rec.duration:.3f} "
              f"T_R={rec.rydberg_time:.4f} 1-F={rec.infidelity:.3e}", flush=True)
        pulse, free = r.pulse, [rec.free_param_values[k] for k in target.free_params]
    if not r.converged:
        print("final step did not converge; no pulse written", file=sys.stderr)
        return 1
    final = evaluate(interactions_from_positions(line(3, args.v_nn)), pulse,
                     Objective(target, args.gamma))
    print(f"line: T_R={final.rydberg_time:.4f} 1-F={final.infidelity:.3e}")
    save_pulse(pulse, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
