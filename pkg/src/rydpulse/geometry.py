"""Atom arrangements and van der Waals interaction matrices.

All lengths are in units of the nearest-neighbour spacing and all energies in
units of the Rabi frequency amplitude, so an interaction entry is
``V_ij / (hbar * Omega_0)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Raised for invalid arrangements or interaction matrices."""


@dataclass(frozen=True)
class AtomArrangement:
    """Planar atom positions with a van der Waals scale.

    Attributes
    ----------
    positions : ndarray, shape (N, 2)
        Atom coordinates in units of the nearest-neighbour spacing.
    c6_over_hbar_omega0 : float
        Dimensionless C6 such that ``V_ij = c6 / |x_i - x_j|**6``.
    """

    positions: np.ndarray
    c6_over_hbar_omega0: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise GeometryError("positions must have shape (N, 2)")
        if pos.shape[0] < 2:
            raise GeometryError("need at least two atoms")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "c6_over_hbar_omega0", float(self.c6_over_hbar_omega0))

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))


@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetric pairwise couplings ``V_ij / (hbar Omega_0)``.

    ``np.inf`` entries mark individually blockaded pairs.  Setting
    ``perfect_blockade`` treats every pair as blockaded and the finite values
    are then ignored by the dynamics.
    """

    v: np.ndarray
    perfect_blockade: bool = False
    signed: bool = field(default=False, compare=False)

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise GeometryError("interaction matrix must be square")
        if v.shape[0] < 2:
            raise GeometryError("need at least two atoms")
        if np.any(np.isnan(v)):
            raise GeometryError("interaction matrix contains NaN")
        if not np.array_equal(v, v.T):
            raise GeometryError("interaction matrix must be symmetric")
        if np.any(np.diag(v) != 0.0):
            raise GeometryError("interaction matrix must have zero diagonal")
        if not self.signed and np.any(v < 0):
            raise GeometryError("negative interaction; use signed=True to allow")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def n_atoms(self) -> int:
        return self.v.shape[0]

    def blockaded(self, i: int, j: int) -> bool:
        return self.perfect_blockade or bool(np.isinf(self.v[i, j]))

    def is_fully_symmetric(self, rtol: float = 1e-12) -> bool:
        """True if every pair has the same coupling (or all are blockaded)."""
        if self.perfect_blockade:
            return True
        iu = np.triu_indices(self.n_atoms, 1)
        vals = self.v[iu]
        if np.all(np.isinf(vals)):
            return True
        if np.any(np.isinf(vals)):
            return False
        return bool(np.allclose(vals, vals[0], rtol=rtol, atol=0.0))

    @classmethod
    def from_upper(cls, n_atoms: int, upper, perfect_blockade: bool = False,
                   signed: bool = False) -> "InteractionMatrix":
        """Build from the row-major upper triangle ``V_12, V_13, ..., V_{N-1,N}``."""
        upper = [float(x) for x in upper]
        if len(upper) != n_atoms * (n_atoms - 1) // 2:
            raise GeometryError(
                f"expected {n_atoms * (n_atoms - 1) // 2} upper-triangle entries, got {len(upper)}"
            )
        v = np.zeros((n_atoms, n_atoms))
        v[np.triu_indices(n_atoms, 1)] = upper
        v = v + v.T
        return cls(v, perfect_blockade=perfect_blockade, signed=signed)

    @classmethod
    def perfect(cls, n_atoms: int) -> "InteractionMatrix":
        return cls(np.zeros((n_atoms, n_atoms)), perfect_blockade=True)


def interactions_from_positions(arr: AtomArrangement, signed: bool = False,
                                perfect_blockade: bool = False) -> InteractionMatrix:
    """Pairwise ``c6 / d**6`` couplings.

    The magnitude of C6 is used unless ``signed`` is set, since all blockade
    strengths of interest are quoted as positive numbers.
    """
    d = arr.distances()
    off = ~np.eye(arr.n_atoms, dtype=bool)
    if np.any(d[off] <= 0.0):
        raise GeometryError("degenerate geometry: coincident atoms")
    c6 = arr.c6_over_hbar_omega0 if signed else abs(arr.c6_over_hbar_omega0)
    v = np.zeros_like(d)
    v[off] = c6 / d[off] ** 6
    return InteractionMatrix(v, perfect_blockade=perfect_blockade, signed=signed)


def perturb_pair(mat: InteractionMatrix, i: int, j: int, delta_d: float) -> InteractionMatrix:
    """Scale the single entry ``V_ij`` as if that pair's distance changed by ``delta_d``.

    Other entries are left untouched; see :func:`perturb_positions` for the
    physically consistent version.
    """
    if i == j:
        raise GeometryError("perturb_pair needs two distinct atoms")
    if 1.0 + delta_d <= 0.0:
        raise GeometryError("relative distance change must exceed -1")
    v = np.array(mat.v)
    v[i, j] = v[j, i] = v[i, j] * (1.0 + delta_d) ** -6
    return InteractionMatrix(v, perfect_blockade=mat.perfect_blockade, signed=mat.signed)


def perturb_positions(arr: AtomArrangement, i: int, j: int, delta_d: float) -> AtomArrangement:
    """Move atom ``j`` along the line from atom ``i`` so that ``|x_i - x_j|``
    grows by the factor ``1 + delta_d``.  All other atoms stay put."""
    if i == j:
        raise GeometryError("perturb_positions needs two distinct atoms")
    if 1.0 + delta_d <= 0.0:
        raise GeometryError("relative distance change must exceed -1")
    pos = np.array(arr.positions)
    pos[j] = pos[i] + (1.0 + delta_d) * (pos[j] - pos[i])
    return AtomArrangement(pos, arr.c6_over_hbar_omega0)


# -- common arrangements -------------------------------------------------------

def isosceles(v_nn: float, v_nnn: float) -> AtomArrangement:
    """Three atoms with the apex (atom index 1) at unit distance from both others.

    The outer pair (indices 0 and 2) sits at distance ``(v_nn / v_nnn)**(1/6)``,
    which must not exceed 2 (straight line).
    """
    if v_nn <= 0 or v_nnn <= 0:
        raise GeometryError("isosceles geometry needs positive couplings")
    d13 = (v_nn / v_nnn) ** (1.0 / 6.0)
    if d13 > 2.0 + 1e-12:
        raise GeometryError("v_nnn too small: outer atoms would be further apart than a line")
    d13 = min(d13, 2.0)
    height = np.sqrt(max(0.0, 1.0 - d13**2 / 4.0))
    pos = np.array([[-d13 / 2.0, 0.0], [0.0, height], [d13 / 2.0, 0.0]])
    return AtomArrangement(pos, v_nn)


def line(n_atoms: int, v_nn: float) -> AtomArrangement:
    pos = np.column_stack([np.arange(n_atoms, dtype=float), np.zeros(n_atoms)])
    return AtomArrangement(pos, v_nn)


def right_triangle(v_nn: float) -> AtomArrangement:
    # apex at the right angle
    return AtomArrangement(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), v_nn)


def equilateral(v_nn: float) -> AtomArrangement:
    return AtomArrangement(np.array([[0.0, 0.0], [0.5, np.sqrt(3) / 2], [1.0, 0.0]]), v_nn)
