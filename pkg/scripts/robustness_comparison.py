"""Distance-robustness of the symmetric and the line CCZbar pulses.

The symmetric pulse is the bundled triangle pulse re-calibrated to
``V = 32`` by a warm start; the line pulse is read from a pulse file
(see ``calibrate_line_pulse.py``).  Every atom pair is scanned.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from rydpulse.geometry import interactions_from_positions, isosceles
from rydpulse.optimizer import OptimizerConfig, Problem, warm_start
from rydpulse.pulse import load_pulse
from rydpulse.scan import distance_scan
from rydpulse.tables import load_table
from rydpulse.targets import builtin

LINE_PULSE = Path(__file__).resolve().parents[1] / "tests" / "data" / "line_thetaprime_CCZbar.toml"
PAIRS = [(0, 1), (1, 2), (0, 2)]


def symmetric_pulse(v_nn: float):
    col = load_table("II")[3]
    mat = interactions_from_positions(isosceles(v_nn, v_nn))
    r = warm_start(col.pulse, Problem(mat, col.target, "antisymmetric", col.pulse.k_terms),
                   OptimizerConfig(mode="rydberg"))
    return r.pulse


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--line-pulse", type=Path, default=LINE_PULSE)
    ap.add_argument("--v-nn", type=float, default=32.0)
    ap.add_argument("--gamma", type=float, default=1e-4)
    ap.add_argument("--max-delta", type=float, default=0.01)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args(argv)

    deltas = np.linspace(-args.max_delta, args.max_delta, args.points)
    cases = [
        ("symmetric", isosceles(args.v_nn, args.v_nn), symmetric_pulse(args.v_nn),
         builtin("CCZbar")),
        ("line", isosceles(args.v_nn, args.v_nn / 64), load_pulse(args.line_pulse),
         builtin("thetaprime_CCZbar")),
    ]
    print("geometry,pair,delta_d,infidelity")
    for label, arr, pulse, target in cases:
        for pair in PAIRS:
            for d, inf in distance_scan(arr, pulse, target, args.gamma, pair, deltas):
                print(f"{label},{pair[0]}{pair[1]},{d:+.4f},{inf:.6e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
