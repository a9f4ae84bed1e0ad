"""Parameter studies: distance robustness, geometry sweeps, parameter-count sweeps.

Every scan returns its rows as a list and can additionally stream them to
a :class:`~rydpulse.io.ResumableCSV`; points already listed in its manifest
are skipped, which makes interrupted sweeps resumable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DEFAULT_TOL
from .geometry import (AtomArrangement, InteractionMatrix, interactions_from_positions, isosceles,
                       perturb_positions)
from .io import ResumableCSV
from .objective import Objective, evaluate
from .optimizer import CampaignResult, OptimizerConfig, Problem, run_campaign
from .pulse import Ansatz, PulseSpec, n_params
from .targets import TargetGate

DISTANCE_HEADER = ("delta_d", "infidelity")
GEOMETRY_HEADER = ("v_nnn", "best_TR", "best_infid", "theta_prime")
PARAMS_HEADER = ("ansatz", "K", "param_count", "best_T", "best_TR", "best_infid")


class ScanError(ValueError):
    pass


def _rows_with_resume(points, compute, writer: ResumableCSV | None):
    """Evaluate ``compute(point)`` for every point not yet in ``writer``."""
    rows = []
    for key, point in points:
        if writer is not None and writer.done(key):
            continue
        row = compute(point)
        rows.append(row)
        if writer is not None:
            writer.append(key, row)
    return rows


def distance_scan(arrangement: AtomArrangement, pulse: PulseSpec, target: TargetGate,
                  gamma: float, pair, deltas, *, perfect_blockade: bool = False,
                  tol: float = DEFAULT_TOL, writer: ResumableCSV | None = None) -> list[tuple]:
    """Infidelity of a fixed pulse while atom ``pair[1]`` moves along the pair axis.

    ``delta_d`` is the relative change of that pair distance; the other
    distances change consistently with the new position.  Free target
    phases are re-maximized at every point.
    """
    i, j = (int(p) for p in pair)
    n = arrangement.n_atoms
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ScanError(f"invalid atom pair {pair} for {n} atoms")
    objective = Objective(target, gamma)

    def compute(delta):
        arr = arrangement if delta == 0 else perturb_positions(arrangement, i, j, delta)
        mat = interactions_from_positions(arr, perfect_blockade=perfect_blockade)
        return (float(delta), evaluate(mat, pulse, objective, tol=tol).infidelity)

    return _rows_with_resume(((k, float(d)) for k, d in enumerate(deltas)), compute, writer)


def _best_row(result: CampaignResult, pick: str):
    best = getattr(result, pick)
    if best is None:
        return None
    return best.record


@dataclass(frozen=True)
class GeometryPoint:
    v_nnn: float
    result: CampaignResult


def geometry_sweep(v_nn: float, v_nnn_values, target: TargetGate, k_terms: int,
                   config: OptimizerConfig, *, ansatz: Ansatz | str = Ansatz.ANTISYMMETRIC,
                   jobs: int | None = None, writer: ResumableCSV | None = None,
                   results: list | None = None) -> list[tuple]:
    """Rydberg-time-optimal campaign on an isosceles triangle per ``v_nnn``.

    Rows are ``(v_nnn, best T_R, best infidelity, theta')`` for the
    lowest-infidelity restart; a point without a converged restart gives
    NaNs.  Full campaign results are appended to ``results`` if given.
    """
    cfg = config.replace(mode="rydberg")

    def compute(v_nnn):
        mat = interactions_from_positions(isosceles(v_nn, v_nnn))
        res = run_campaign(cfg, Problem(mat, target, ansatz, k_terms), jobs=jobs)
        if results is not None:
            results.append(GeometryPoint(v_nnn, res))
        rec = _best_row(res, "best_by_infidelity")
        if rec is None:
            return (float(v_nnn), math.nan, math.nan, math.nan)
        if "theta_prime" in rec.free_param_values:
            tp = rec.free_param_values["theta_prime"]
        else:
            tp = target.g3[1] if target.g3 else math.nan
        return (float(v_nnn), rec.rydberg_time, rec.infidelity, float(tp))

    return _rows_with_resume(((k, float(v)) for k, v in enumerate(v_nnn_values)), compute, writer)


def param_count_sweep(target: TargetGate, mat: InteractionMatrix, mode: str, k_list,
                      config: OptimizerConfig, *, ansatze=(Ansatz.ANTISYMMETRIC,),
                      jobs: int | None = None, writer: ResumableCSV | None = None,
                      results: list | None = None) -> list[tuple]:
    """One campaign per (ansatz, K).

    ``mode`` is ``"time"`` (best = shortest converged pulse) or
    ``"rydberg"`` (best = lowest infidelity with decay).
    """
    if mode not in ("time", "rydberg"):
        raise ScanError("parameter-count sweeps run in 'time' or 'rydberg' mode")
    cfg = config.replace(mode=mode)
    pick = "best_by_duration" if mode == "time" else "best_by_infidelity"
    points = [((Ansatz(a).value, int(k)), (Ansatz(a), int(k))) for a in ansatze for k in k_list]

    def compute(point):
        ans, k = point
        res = run_campaign(cfg, Problem(mat, target, ans, k), jobs=jobs)
        if results is not None:
            results.append(res)
        rec = _best_row(res, pick)
        vals = (math.nan,) * 3 if rec is None else (rec.duration, rec.rydberg_time, rec.infidelity)
        return (ans.value, k, n_params(ans, k)) + vals

    return _rows_with_resume(points, compute, writer)


def robustness_ratio(rows) -> np.ndarray:
    """Infidelity of every row relative to the ``delta_d = 0`` row."""
    deltas = np.array([r[0] for r in rows])
    inf = np.array([r[1] for r in rows])
    zero = np.flatnonzero(deltas == 0.0)
    if zero.size == 0:
        raise ScanError("scan has no delta_d = 0 reference point")
    return inf / inf[zero[0]]
