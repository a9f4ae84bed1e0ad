"""Bell-state fidelity, evaluation records and analytic gradients.

The fidelity of a pulse against a diagonal target is

    F = | 2^-N sum_b exp(-i theta_b) c_b |^2,

the overlap of ``U_targ^dagger U(T)`` on ``|+>^N``.  It is exact here because
each block contains a single computational state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import DEFAULT_TOL, SimulationResult, block_states, simulate_pulse
from .geometry import InteractionMatrix
from .pulse import PulseSpec
from .targets import TargetGate, wrap_phase


class Mode(str, enum.Enum):
    MAXIMIZE_FIDELITY = "fidelity"
    MINIMIZE_TIME = "time"


@dataclass(frozen=True)
class Objective:
    """Scalar utility ``F - duration_weight * T`` to be maximized.

    ``duration_weight`` only acts in :attr:`Mode.MINIMIZE_TIME`.
    """

    target: TargetGate
    gamma: float = 0.0
    mode: Mode = Mode.MAXIMIZE_FIDELITY
    duration_weight: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.gamma < 0:
            raise ValueError("decay rate must be non-negative")
        if self.duration_weight < 0:
            raise ValueError("duration penalty must be non-negative")

    @property
    def penalty(self) -> float:
        return self.duration_weight if self.mode is Mode.MINIMIZE_TIME else 0.0


@dataclass(frozen=True)
class EvaluationRecord:
    fidelity: float
    infidelity: float
    rydberg_time: float
    duration: float
    free_param_values: dict = field(default_factory=dict)
    gamma: float = 0.0

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "infidelity": self.infidelity,
            "rydberg_time": self.rydberg_time,
            "duration": self.duration,
            "gamma": self.gamma,
            "free_param_values": dict(self.free_param_values),
        }


def _overlap(amps: np.ndarray, phases: np.ndarray) -> complex:
    return complex(np.mean(np.exp(-1j * phases) * amps))


def fidelity(sim: SimulationResult, target: TargetGate, free_values=None) -> float:
    if sim.diagonal_amplitudes.size != 2**target.n_qubits:
        raise ValueError("simulation and target act on different numbers of qubits")
    return abs(_overlap(sim.diagonal_amplitudes, target.phases(free_values))) ** 2


def _fidelity_and_free_grad(amps, target: TargetGate, free):
    phases = target.phases(free)
    terms = np.exp(-1j * phases) * amps / amps.size
    S = terms.sum()
    dS = (-1j * target.phase_derivatives()) @ terms
    return abs(S) ** 2, 2.0 * np.real(np.conj(S) * dS)


def best_free_values(amps: np.ndarray, target: TargetGate, grid: int = 64) -> np.ndarray:
    """Free phases maximizing the fidelity for fixed diagonal amplitudes."""
    axes = [np.linspace(-np.pi, np.pi, grid, endpoint=False)] * target.n_free
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, target.n_free)
    D = target.phase_derivatives()
    base = np.exp(-1j * target.fixed_phases) * amps / amps.size
    vals = np.abs(np.exp(-1j * mesh @ D) @ base) ** 2
    x0 = mesh[int(np.argmax(vals))]

    def neg(x):
        f, g = _fidelity_and_free_grad(amps, target, x)
        return -f, -g

    res = minimize(neg, x0, jac=True, method="BFGS", options={"gtol": 1e-13})
    return wrap_phase(res.x) if target.n_free > 1 else np.atleast_1d(wrap_phase(res.x))


def evaluate(mat: InteractionMatrix, pulse: PulseSpec, objective: Objective, free_values=None,
             *, tol: float = DEFAULT_TOL) -> EvaluationRecord:
    """Simulate and score a pulse.

    Free target phases are maximized over unless given.  With decay active,
    the Rydberg time is taken from a separate decay-free run.
    """
    sim = simulate_pulse(mat, pulse, objective.gamma, tol=tol)
    target = objective.target
    free = best_free_values(sim.diagonal_amplitudes, target) if free_values is None \
        else np.atleast_1d(np.asarray(free_values, dtype=float))
    F = fidelity(sim, target, free)
    t_r = sim.rydberg_time
    if objective.gamma > 0:
        t_r = simulate_pulse(mat, pulse, 0.0, tol=tol).rydberg_time
    return EvaluationRecord(
        fidelity=F, infidelity=1.0 - F, rydberg_time=t_r, duration=pulse.duration,
        free_param_values={k: float(v) for k, v in zip(target.free_params, free)},
        gamma=objective.gamma,
    )


def utility_and_gradient(mat: InteractionMatrix, pulse: PulseSpec, objective: Objective,
                         free_values, *, tol: float = DEFAULT_TOL):
    """``(utility, gradient, fidelity, simulation)``.

    The gradient runs over the pulse vector followed by the free target
    phases; pulse derivatives come from forward sensitivities.
    """
    sim = simulate_pulse(mat, pulse, objective.gamma, tol=tol, gradients=True)
    target = objective.target
    free = np.atleast_1d(np.asarray(free_values, dtype=float))
    amps = sim.diagonal_amplitudes
    weights = np.exp(-1j * target.phases(free)) / amps.size
    S = np.sum(weights * amps)
    F = abs(S) ** 2
    d_pulse = 2.0 * np.real(np.conj(S) * (sim.amplitude_gradients @ weights))
    _, d_free = _fidelity_and_free_grad(amps, target, free)
    d_pulse[0] -= objective.penalty
    grad = np.concatenate([d_pulse, d_free])
    return F - objective.penalty * pulse.duration, grad, F, sim


def _residual_rows(layout, target: TargetGate):
    """Basis states giving independent phase conditions and the non-root
    block components that must vanish for a perfect gate."""
    D = target.phase_derivatives()
    reps, seen, rest = [], set(), []
    for k, blk in enumerate(layout.blocks):
        for b in blk.members:
            sig = (k, round(float(target.fixed_phases[b]), 12), tuple(D[:, b]))
            if b != 0 and sig not in seen:
                seen.add(sig)
                reps.append(b)
        rest.extend(range(layout.offsets[k] + 1, layout.offsets[k] + blk.dim))
    reps = np.array(reps, dtype=np.int64)
    return reps, layout.roots[layout.block_of[reps]], np.array(rest, dtype=np.int64)


def gate_residuals(mat: InteractionMatrix, pulse: PulseSpec, target: TargetGate, free_values,
                   *, tol: float = DEFAULT_TOL, jacobian: bool = False, full: bool = True):
    """Decay-free residual vector that vanishes exactly when ``F = 1``.

    Components: ``Im z_b`` (and ``Re z_b`` when ``full``) with
    ``z_b = exp(-i theta_b) c_b - 1`` for every independent basis state,
    followed by the real and imaginary parts of all block amplitudes
    outside the computational states.  Unlike ``1 - F`` the phase and
    leakage parts have a non-degenerate Jacobian at a solution; the
    ``Re z_b`` rows are quadratic there and are dropped (``full=False``)
    when the Jacobian rank matters.

    With ``jacobian`` returns ``(r, J)``, ``J`` over (pulse params, free params).
    """
    layout, psi, dpsi = block_states(mat, pulse, 0.0, tol=tol, gradients=jacobian)
    reps, roots, rest = _residual_rows(layout, target)
    w = np.exp(-1j * target.phases(free_values)[reps])
    z = w * psi[roots]
    parts = [z.imag] + ([z.real - 1.0] if full else []) + [psi[rest].real, psi[rest].imag]
    r = np.concatenate(parts)
    if not jacobian:
        return r
    D = target.phase_derivatives()
    Gz = np.concatenate([dpsi[:, roots] * w, (-1j * D[:, reps]) * z]).T
    Gr = np.concatenate([dpsi[:, rest], np.zeros((D.shape[0], rest.size))]).T
    J = np.concatenate([Gz.imag] + ([Gz.real] if full else []) + [Gr.real, Gr.imag])
    return r, J


def gradient(mat: InteractionMatrix, pulse: PulseSpec, objective: Objective, free_values=None,
             *, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Gradient of the utility over ``(pulse params, free params)``."""
    if free_values is None:
        free_values = np.zeros(objective.target.n_free)
    return utility_and_gradient(mat, pulse, objective, free_values, tol=tol)[1]


def utility(mat: InteractionMatrix, pulse: PulseSpec, objective: Objective, free_values,
            *, tol: float = DEFAULT_TOL) -> float:
    sim = simulate_pulse(mat, pulse, objective.gamma, tol=tol)
    return fidelity(sim, objective.target, free_values) - objective.penalty * pulse.duration
