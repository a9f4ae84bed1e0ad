"""Seeded multi-start optimization over pulse and free gate parameters.

Each restart draws a starting point from uniform ranges with NumPy's PCG64
generator seeded by ``config.seed + restart_index``.  Three stages follow:

1. Adam ascent on the fidelity, with the duration optimized through
   ``log T``.  After ``handoff_iters`` iterations the restart either hands
   over to stage 2 (``1 - F < handoff_infidelity``) or is abandoned.
2. A polish that converges to machine-level infidelity.  Without decay it
   is a trust-region least-squares solve on the gate residuals of
   :func:`~rydpulse.objective.gate_residuals`; with decay it is BFGS on
   ``1 - F``.  A first pass runs at the cheap search tolerance; restarts
   still above ``polish_gate`` are dropped, the rest get a second pass at
   ``polish_tol``.
3. Time-optimal campaigns only: continuation along the solution set.
   Perfect solutions form a curve in parameter space; it is followed in
   the direction of decreasing duration (projected onto the null space of
   the residual Jacobian, then corrected back with Gauss-Newton steps)
   until the duration is locally minimal.

Campaign modes
--------------
``time``
    Maximize ``F`` without decay and descend in duration.  The best
    restart is the shortest converged pulse.
``rydberg``
    Maximize ``F`` with Rydberg decay ``rydberg_gamma`` active; the best
    restart has the smallest infidelity.
``fidelity``
    Maximize ``F`` at decay rate ``gamma``; best is the smallest infidelity.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from .dynamics import SimulationError
from .geometry import InteractionMatrix
from .objective import EvaluationRecord, Objective, evaluate, gate_residuals, utility_and_gradient
from .pulse import Ansatz, PulseSpec, n_params, pulse_from_dict, pulse_to_dict
from .targets import TargetGate, wrap_phase

SEED_MASK = (1 << 64) - 1
MODES = ("time", "rydberg", "fidelity")


class OptimizerError(ValueError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 200
    max_iters: int = 2000
    step_size: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    decay_every: int = 500
    decay_factor: float = 0.5
    seed: int = 0
    # initialization ranges; the duration range is in units of pi * N
    duration_range: tuple = (1.0, 6.0)
    detuning_range: tuple = (-2.0, 2.0)
    freq_range: tuple = (-2.0, 2.0)
    amp_range: tuple = (-math.pi, math.pi)
    infidelity_threshold: float = 1e-7
    grad_threshold: float = 1e-9
    mode: str = "fidelity"
    gamma: float = 0.0
    rydberg_gamma: float = 1e-4
    # stage control
    handoff_iters: int = 300
    handoff_infidelity: float = 0.1
    adam_target: float = 1e-4
    search_tol: float = 1e-6
    polish_tol: float = 1e-9
    final_tol: float = 1e-11
    polish_iters: int = 100
    polish_gate: float = 1e-4
    descent_step: float = 0.05
    descent_min_step: float = 1e-4
    descent_max_steps: int = 200

    def __post_init__(self):
        if self.restarts < 1:
            raise OptimizerError("restarts must be >= 1")
        if self.step_size <= 0:
            raise OptimizerError("step size must be positive")
        if not 0.0 < self.infidelity_threshold < 1.0:
            raise OptimizerError("infidelity threshold must lie in (0, 1)")
        if self.mode not in MODES:
            raise OptimizerError(f"unknown campaign mode {self.mode!r}; choose from {MODES}")
        if self.max_iters < 0 or self.handoff_iters < 0:
            raise OptimizerError("iteration counts must be non-negative")
        if self.gamma < 0 or self.rydberg_gamma < 0:
            raise OptimizerError("decay rates must be non-negative")
        if not 0 <= self.seed <= SEED_MASK:
            raise OptimizerError("seed must be a 64-bit unsigned integer")
        for name in ("duration_range", "detuning_range", "freq_range", "amp_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise OptimizerError(f"{name} must be an ordered pair")
        if self.duration_range[0] <= 0:
            raise OptimizerError("durations must be positive")

    def replace(self, **kw) -> "OptimizerConfig":
        return dataclasses.replace(self, **kw)

    @property
    def decay_rate(self) -> float:
        """Decay rate active during optimization."""
        if self.mode == "rydberg":
            return self.rydberg_gamma
        return 0.0 if self.mode == "time" else self.gamma

    def objective(self, target: TargetGate) -> Objective:
        return Objective(target, self.decay_rate)


@dataclass(frozen=True)
class Problem:
    """What to optimize: geometry, target, ansatz family and term count."""

    mat: InteractionMatrix
    target: TargetGate
    ansatz: Ansatz
    k_terms: int

    def __post_init__(self):
        object.__setattr__(self, "ansatz", Ansatz(self.ansatz))
        if self.mat.n_atoms != self.target.n_qubits:
            raise OptimizerError("target and geometry disagree on the number of qubits")
        if self.k_terms < 1:
            raise OptimizerError("need K >= 1")

    @property
    def n_pulse_params(self) -> int:
        return n_params(self.ansatz, self.k_terms)


@dataclass
class RestartRecord:
    seed: int
    converged: bool
    record: EvaluationRecord | None
    params: dict
    iterations: int = 0
    error: str | None = None

    @property
    def pulse(self) -> PulseSpec | None:
        return pulse_from_dict(self.params) if self.params else None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "converged": self.converged,
            "iterations": self.iterations,
            "error": self.error,
            "record": self.record.to_dict() if self.record else None,
            "params": self.params,
        }


def initial_point(problem: Problem, config: OptimizerConfig, rng: np.random.Generator) -> np.ndarray:
    """Random start ``[log T, Delta_0, A_1, alpha_1, ..., free...]``; free phases start at 0."""
    N = problem.mat.n_atoms
    lo, hi = config.duration_range
    T = rng.uniform(lo * math.pi * N, hi * math.pi * N)
    x = [math.log(T), rng.uniform(*config.detuning_range)]
    per = 2 if problem.ansatz is Ansatz.ANTISYMMETRIC else 4
    for _ in range(problem.k_terms * per // 2):
        x += [rng.uniform(*config.freq_range), rng.uniform(*config.amp_range)]
    x += [0.0] * problem.target.n_free
    return np.array(x)


def _split(problem: Problem, x: np.ndarray):
    P = problem.n_pulse_params
    vec = np.array(x[:P])
    vec[0] = math.exp(x[0])
    return PulseSpec.from_vector(problem.ansatz, vec), np.array(x[P:])


def _ascent_grad(problem: Problem, objective: Objective, x: np.ndarray, tol: float):
    pulse, free = _split(problem, x)
    u, g, F, _ = utility_and_gradient(problem.mat, pulse, objective, free, tol=tol)
    g = g.copy()
    g[0] *= pulse.duration  # chain rule for log T
    return u, g, F


def _residuals(problem: Problem, x: np.ndarray, tol: float, jacobian=True, full=True):
    pulse, free = _split(problem, x)
    out = gate_residuals(problem.mat, pulse, problem.target, free, tol=tol,
                         jacobian=jacobian, full=full)
    if jacobian:
        out[1][:, 0] *= pulse.duration
    return out


def adam_ascent(problem: Problem, objective: Objective, x0: np.ndarray, config: OptimizerConfig,
                iters: int | None = None):
    """Adam on the utility.  Returns ``(x, fidelity, iterations)``.

    Stops after ``iters`` (default: ``min(max_iters, handoff_iters)``)
    iterations or once ``1 - F < adam_target``.
    """
    if iters is None:
        iters = min(config.max_iters, config.handoff_iters) if config.handoff_iters \
            else config.max_iters
    x = np.array(x0, dtype=float)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    F = float("nan")
    it = 0
    for it in range(1, iters + 1):
        _, g, F = _ascent_grad(problem, objective, x, config.search_tol)
        if 1.0 - F < config.adam_target:
            break
        lr = config.step_size * config.decay_factor ** ((it - 1) // config.decay_every)
        m = config.beta1 * m + (1 - config.beta1) * g
        v = config.beta2 * v + (1 - config.beta2) * g * g
        mhat = m / (1 - config.beta1**it)
        vhat = v / (1 - config.beta2**it)
        x = x + lr * mhat / (np.sqrt(vhat) + config.eps)
    return x, F, it


class _Cached:
    """Memoize residual evaluations so value and Jacobian share one solve."""

    def __init__(self, problem, tol, full=True, fixed_duration=None):
        self.problem, self.tol, self.full, self.fixed = problem, tol, full, fixed_duration
        self.key = None

    def _x(self, z):
        return z if self.fixed is None else np.concatenate([[self.fixed], z])

    def __call__(self, z):
        key = z.tobytes()
        if key != self.key:
            self.key = key
            r, J = _residuals(self.problem, self._x(z), self.tol, True, self.full)
            self.val = (r, J if self.fixed is None else J[:, 1:])
        return self.val


def polish(problem: Problem, objective: Objective, x0: np.ndarray, config: OptimizerConfig,
           tol: float | None = None, max_nfev: int | None = None) -> np.ndarray:
    """Converge tightly: least squares on the gate residuals without decay,
    BFGS on ``1 - F`` with decay."""
    tol = config.polish_tol if tol is None else tol
    max_nfev = config.polish_iters if max_nfev is None else max_nfev
    if objective.gamma > 0:
        def fun(x):
            u, g, _ = _ascent_grad(problem, objective, x, tol)
            return 1.0 - u, -g

        res = minimize(fun, x0, jac=True, method="BFGS",
                       options={"gtol": config.grad_threshold, "maxiter": max_nfev})
        return res.x
    c = _Cached(problem, tol)
    res = least_squares(lambda z: c(z)[0], x0, jac=lambda z: c(z)[1], method="trf",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    return res.x


def _correct(problem: Problem, x: np.ndarray, tol: float, target: float, iters: int = 8):
    """Gauss-Newton (minimum-norm) projection back onto the solution set."""
    for _ in range(iters):
        r, J = _residuals(problem, x, tol, True, full=False)
        if np.linalg.norm(r) < target:
            return x, True
        dx = np.linalg.lstsq(J, -r, rcond=1e-8)[0]
        if np.linalg.norm(dx) > 1.0:
            return x, False
        x = x + dx
    return x, bool(np.linalg.norm(_residuals(problem, x, tol, False, full=False)) < target)


def _correction_target(config: OptimizerConfig) -> float:
    # residual norm well below the one matching the infidelity threshold
    return math.sqrt(config.infidelity_threshold) * 1e-2


def descend_duration(problem: Problem, x: np.ndarray, config: OptimizerConfig):
    """Follow the perfect-gate solution set towards shorter durations.

    Returns ``(x, steps)``; ``x`` is unchanged if it is not on the set.
    """
    tol = config.final_tol
    target = _correction_target(config)
    x, ok = _correct(problem, x, tol, target)
    if not ok:
        return x, 0
    h, steps = config.descent_step, 0
    while steps < config.descent_max_steps and h > config.descent_min_step:
        _, J = _residuals(problem, x, tol, True, full=False)
        _, S, Vt = np.linalg.svd(J)
        rank = int(np.sum(S > 1e-6 * S[0]))
        null = Vt[rank:]
        if null.shape[0] == 0:
            break
        d = -null.T @ null[:, 0]
        norm = np.linalg.norm(d)
        if norm < 1e-6:
            break  # duration is stationary on the solution set
        y, ok = _correct(problem, x + h * d / norm, tol, target)
        if ok and y[0] < x[0]:
            x, h, steps = y, min(2.0 * h, 0.5), steps + 1
        else:
            h /= 2.0
    return x, steps


def _wrap_free(problem: Problem, x: np.ndarray) -> np.ndarray:
    x = np.array(x)
    P = problem.n_pulse_params
    x[P:] = wrap_phase(x[P:])
    return x


def optimize_from(problem: Problem, config: OptimizerConfig, x0: np.ndarray, seed: int,
                  search: bool = True) -> RestartRecord:
    """All stages from the raw starting vector ``x0``.

    ``search=False`` skips the Adam stage (used for warm starts).
    """
    objective = config.objective(problem.target)
    try:
        x, it = np.array(x0, dtype=float), 0
        if not search and objective.gamma == 0:
            # near a solution the minimum-norm Gauss-Newton step stays put,
            # while the trust-region polish drifts along the solution set
            y, ok = _correct(problem, x, config.final_tol, _correction_target(config))
            if ok:
                if config.mode == "time":
                    y, _ = descend_duration(problem, y, config)
                rec = _finish(problem, config, objective, y, seed, it, polished=True)
                if rec.converged:
                    return rec
        if search:
            x, F, it = adam_ascent(problem, objective, x, config)
            if not (math.isfinite(F) and 1.0 - F < config.handoff_infidelity):
                return _finish(problem, config, objective, x, seed, it, polished=False)
        x = polish(problem, objective, x, config, tol=config.search_tol)
        _, _, F = _ascent_grad(problem, objective, x, config.search_tol)
        # decay adds up to gamma * N * T to the infidelity
        gate = config.polish_gate + objective.gamma * problem.mat.n_atoms * math.exp(x[0])
        if not 1.0 - F < gate:
            return _finish(problem, config, objective, x, seed, it, polished=False)
        x = polish(problem, objective, x, config, max_nfev=config.polish_iters // 2)
        if config.mode == "time":
            x, _ = descend_duration(problem, x, config)
        if objective.gamma == 0:
            x = polish(problem, objective, x, config, tol=config.final_tol, max_nfev=20)
        return _finish(problem, config, objective, x, seed, it, polished=True)
    except SimulationError as exc:
        return RestartRecord(seed, False, None, {}, 0, error=str(exc))


def _finish(problem, config, objective, x, seed, it, polished) -> RestartRecord:
    x = _wrap_free(problem, x)
    pulse, free = _split(problem, x)
    rec = evaluate(problem.mat, pulse, objective, free, tol=config.final_tol)
    if objective.gamma > 0:
        clean = evaluate(problem.mat, pulse, Objective(problem.target), free, tol=config.final_tol)
        allowed = max(config.infidelity_threshold, 0.05 * objective.gamma * rec.rydberg_time)
        converged = clean.infidelity < allowed
    else:
        converged = rec.infidelity < config.infidelity_threshold
    return RestartRecord(seed, bool(polished and converged), rec, pulse_to_dict(pulse), it)


def run_restart(config: OptimizerConfig, problem: Problem, seed: int) -> RestartRecord:
    """Deterministic single restart from a seeded random start."""
    rng = np.random.default_rng(seed & SEED_MASK)
    x0 = initial_point(problem, config, rng)
    return optimize_from(problem, config, x0, seed)


def warm_start(pulse: PulseSpec, problem: Problem, config: OptimizerConfig,
               free_values=None) -> RestartRecord:
    """Re-optimize a known pulse (e.g. under a changed geometry).

    The Adam stage is skipped: its first steps move every coordinate by
    about ``step_size`` and would throw a converged point off its basin.
    Without decay a start that a minimum-norm Gauss-Newton correction
    brings onto the solution set is kept there, so re-optimizing a
    converged pulse leaves it (nearly) unchanged.
    """
    if pulse.ansatz is not problem.ansatz or pulse.k_terms != problem.k_terms:
        raise OptimizerError(
            f"pulse has {pulse.n_params} {pulse.ansatz.value} parameters, problem expects "
            f"{problem.n_pulse_params} {problem.ansatz.value}"
        )
    if pulse.duration <= 0:
        raise OptimizerError("warm start needs a positive duration")
    x0 = pulse.to_vector()
    x0[0] = math.log(pulse.duration)
    if free_values is None:
        objective = config.objective(problem.target)
        rec = evaluate(problem.mat, pulse, Objective(problem.target, objective.gamma))
        free_values = [rec.free_param_values[k] for k in problem.target.free_params]
    x0 = np.concatenate([x0, np.atleast_1d(free_values)])
    return optimize_from(problem, config, x0, config.seed, search=False)


@dataclass
class CampaignResult:
    config: OptimizerConfig
    restarts: list
    best_by_duration: RestartRecord | None = None
    best_by_rydberg_time: RestartRecord | None = None
    best_by_infidelity: RestartRecord | None = None
    best: RestartRecord | None = None
    extra: dict = field(default_factory=dict)

    @property
    def no_solution(self) -> bool:
        return self.best is None

    @property
    def n_converged(self) -> int:
        return sum(r.converged for r in self.restarts)


def _argmin(records, key):
    best = None
    for r in records:  # restarts are ordered by seed, ties keep the lowest seed
        if best is None or key(r) < key(best):
            best = r
    return best


def select_best(config: OptimizerConfig, restarts: list) -> dict:
    conv = [r for r in restarts if r.converged and r.record is not None]
    out = {
        "best_by_duration": _argmin(conv, lambda r: r.record.duration),
        "best_by_rydberg_time": _argmin(conv, lambda r: r.record.rydberg_time),
        "best_by_infidelity": _argmin(conv, lambda r: r.record.infidelity),
    }
    out["best"] = out["best_by_duration"] if config.mode == "time" else out["best_by_infidelity"]
    return out


def _restart_job(args):
    config, problem, seed = args
    return run_restart(config, problem, seed)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("RYDPULSE_JOBS", "1")))
    except ValueError:
        return 1


def run_campaign(config: OptimizerConfig, problem: Problem, jobs: int | None = None,
                 progress=None) -> CampaignResult:
    """All restarts, aggregated in restart order regardless of scheduling."""
    jobs = default_jobs() if jobs is None else max(1, jobs)
    seeds = [(config.seed + i) & SEED_MASK for i in range(config.restarts)]
    if jobs == 1:
        restarts = []
        for s in seeds:
            restarts.append(run_restart(config, problem, s))
            if progress:
                progress(restarts[-1])
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            restarts = list(pool.map(_restart_job, [(config, problem, s) for s in seeds]))
    return CampaignResult(config, restarts, **select_best(config, restarts))
