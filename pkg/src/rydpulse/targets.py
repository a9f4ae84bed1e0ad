"""Diagonal target gates as phase functionals over computational basis states.

A target fixes ``theta_b`` for every basis state ``b`` up to a free
single-qubit phase ``phi`` (contributing ``phi * weight(b)``) and, for the
reset-tolerant gates, a free phase ``theta_prime`` on the outer pair of a
three-atom isosceles triangle.

Three-atom convention: atom index 1 (the second atom) is the apex, coupled
to both others by the nearest-neighbour interaction; atoms 0 and 2 form the
unequal pair carrying ``theta_prime``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import bits_of, hamming_weights
from .geometry import InteractionMatrix


class TargetError(ValueError):
    pass


def wrap_phase(x):
    """Map phases onto ``(-pi, pi]``."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    y = np.where(y <= -np.pi, y + 2 * np.pi, y)
    return y if y.ndim else float(y)


@dataclass(frozen=True)
class TargetGate:
    """Target phases ``fixed_phases[b] + phi * w(b) [+ theta_prime * outer(b)]``.

    ``g3`` records ``(theta, theta_prime, lambda)`` for gates from the
    three-atom family; ``theta_prime`` is ``None`` there when it is free.
    """

    name: str
    n_qubits: int
    fixed_phases: np.ndarray
    theta_prime_free: bool = False
    g3: tuple | None = None

    def __post_init__(self):
        ph = np.asarray(self.fixed_phases, dtype=float)
        if ph.shape != (2**self.n_qubits,):
            raise TargetError("need one phase per basis state")
        if self.theta_prime_free and self.n_qubits != 3:
            raise TargetError("a free theta_prime requires three qubits")
        ph.setflags(write=False)
        object.__setattr__(self, "fixed_phases", ph)

    @property
    def free_params(self) -> tuple[str, ...]:
        return ("phi", "theta_prime") if self.theta_prime_free else ("phi",)

    @property
    def n_free(self) -> int:
        return len(self.free_params)

    def weights(self) -> np.ndarray:
        return hamming_weights(self.n_qubits)

    def outer_pair_mask(self) -> np.ndarray:
        if self.n_qubits != 3:
            return np.zeros(2**self.n_qubits)
        return np.array([float(bits_of(b, 3)[0] and bits_of(b, 3)[2]) for b in range(8)])

    def phases(self, free_values=None) -> np.ndarray:
        """Target phase of every basis state for the given free parameters."""
        free = _free_tuple(self, free_values)
        out = self.fixed_phases + free[0] * self.weights()
        if self.theta_prime_free:
            out = out + free[1] * self.outer_pair_mask()
        return out

    def fixed_phase(self, b: int, free_values=None) -> float:
        return float(self.phases(free_values)[b])

    def phase_derivatives(self) -> np.ndarray:
        """``d theta_b / d free``, shape ``(n_free, 2**N)``."""
        rows = [self.weights().astype(float)]
        if self.theta_prime_free:
            rows.append(self.outer_pair_mask())
        return np.array(rows)


def _free_tuple(target: TargetGate, free_values) -> tuple:
    if free_values is None:
        return (0.0,) * target.n_free
    vals = tuple(float(v) for v in np.atleast_1d(free_values))
    if len(vals) != target.n_free:
        raise TargetError(f"{target.name} expects free parameters {target.free_params}")
    return vals


def g3_phases(theta: float, theta_prime: float, lam: float, phi: float = 0.0) -> np.ndarray:
    """Phases of ``Z(phi)^3 CZ(theta)_12 CZ(theta)_23 CZ(theta')_13 CCZ(lambda)``
    on ``|b1 b2 b3>`` (atoms numbered from 1, atom 2 is the apex)."""
    out = np.zeros(8)
    for b in range(8):
        b1, b2, b3 = bits_of(b, 3)
        out[b] = (phi * (b1 + b2 + b3) + theta * (b1 * b2 + b2 * b3)
                  + theta_prime * b1 * b3 + lam * b1 * b2 * b3)
    return out


def from_g3(theta: float, theta_prime, lam: float, name: str | None = None) -> TargetGate:
    """Three-atom target ``G_3(theta, theta', lambda)``; pass ``"free"`` for theta'."""
    free = isinstance(theta_prime, str)
    if free and theta_prime != "free":
        raise TargetError("theta_prime must be a number or 'free'")
    tp = 0.0 if free else float(theta_prime)
    label = name or f"G3({theta:g},{theta_prime},{lam:g})"
    return TargetGate(label, 3, g3_phases(theta, tp, lam), free,
                      (float(theta), None if free else tp, float(lam)))


def subset_phases(n_qubits: int, orders, angle: float = math.pi) -> np.ndarray:
    """Product of ``C_{k-1}Z(angle)`` over every qubit subset whose size is in ``orders``."""
    out = np.zeros(2**n_qubits)
    for b in range(2**n_qubits):
        w = sum(bits_of(b, n_qubits))
        out[b] = angle * sum(math.comb(w, k) for k in orders)
    return out


def from_phase_table(n_qubits: int, phases, name: str = "custom") -> TargetGate:
    ph = np.asarray(phases, dtype=float)
    if ph.shape != (2**n_qubits,):
        raise TargetError(f"need {2**n_qubits} phases")
    if ph[0] != 0.0:
        raise TargetError("the all-zeros state must carry phase 0")
    return TargetGate(name, n_qubits, ph)


def identity(n_qubits: int) -> TargetGate:
    return TargetGate(f"identity{n_qubits}", n_qubits, np.zeros(2**n_qubits))


BUILTIN_NAMES = (
    "CZ", "CCZ", "CCZbar", "thetaprime_CCZ", "thetaprime_CCZbar", "CZCZCZ",
    "CZCZCZ_thetaprime", "CCCZ", "CCCZbar",
)


def builtin(name: str) -> TargetGate:
    """Named targets.

    ``CCZbar``/``CCCZbar`` apply a controlled-Z(pi) on every subset of two or
    more qubits.  ``identity<N>`` gives the trivial gate on N qubits.
    """
    pi = math.pi
    if name == "CZ":
        return TargetGate("CZ", 2, subset_phases(2, [2]))
    if name == "CCZ":
        return from_g3(0.0, 0.0, pi, "CCZ")
    if name == "CCZbar":
        return from_g3(pi, pi, pi, "CCZbar")
    if name == "thetaprime_CCZ":
        return from_g3(0.0, "free", pi, "thetaprime_CCZ")
    if name == "thetaprime_CCZbar":
        return from_g3(pi, "free", pi, "thetaprime_CCZbar")
    if name == "CZCZCZ":
        return from_g3(pi, pi, 0.0, "CZCZCZ")
    if name == "CZCZCZ_thetaprime":
        return from_g3(pi, "free", 0.0, "CZCZCZ_thetaprime")
    if name == "CCCZ":
        return TargetGate("CCCZ", 4, subset_phases(4, [4]))
    if name == "CCCZbar":
        return TargetGate("CCCZbar", 4, subset_phases(4, [2, 3, 4]))
    if name.startswith("identity") and name[8:].isdigit():
        return identity(int(name[8:]))
    raise TargetError(f"unknown target {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


def is_feasible(target: TargetGate, mat: InteractionMatrix, atol: float = 1e-9) -> bool:
    """False when a fixed ``theta' != theta`` is requested on a fully
    symmetric geometry, where the pair phases cannot differ."""
    if target.g3 is None or target.theta_prime_free or mat.n_atoms != 3:
        return True
    theta, theta_prime, _ = target.g3
    if not mat.is_fully_symmetric():
        return True
    return abs(wrap_phase(theta - theta_prime)) <= atol


def _symmetric_equal(a: float, b: float) -> bool:
    return a == b or (math.isinf(a) and math.isinf(b))


def unequal_pair_consistent(mat: InteractionMatrix) -> bool:
    """True if atom index 1 is a valid apex (``V_01 == V_12``)."""
    if mat.n_atoms != 3 or mat.perfect_blockade:
        return True
    return _symmetric_equal(float(mat.v[0, 1]), float(mat.v[1, 2])) or bool(
        np.isclose(mat.v[0, 1], mat.v[1, 2], rtol=1e-9)
    )

