"""Block-diagonal propagation of globally driven Rydberg atoms.

Atoms in ``|0>`` are untouched by the laser, so every computational basis
state ``|b>`` spans its own invariant block: the atoms with ``b_i = 1`` may be
in ``|1>`` or ``|r>``, except that blockaded pairs are never doubly excited.
The gate only needs the diagonal amplitudes ``c_b = <b|U(T)|b>`` and the
time-integrated Rydberg population.

Basis states are indexed by integers whose most significant bit is atom 0,
so index 6 of a three-atom register is ``|110>``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernel
from .geometry import InteractionMatrix
from .io import atomic_write_text
from .pulse import PulseSpec, phase_at

MAX_ATOMS = 6
DEFAULT_TOL = 1e-12


class SimulationError(RuntimeError):
    pass


def bits_of(index: int, n_atoms: int) -> tuple[int, ...]:
    return tuple((index >> (n_atoms - 1 - i)) & 1 for i in range(n_atoms))


def index_of(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def hamming_weights(n_atoms: int) -> np.ndarray:
    return np.array([sum(bits_of(b, n_atoms)) for b in range(2**n_atoms)])


@dataclass(frozen=True)
class Block:
    """Invariant subspace generated from one computational basis state.

    ``states`` lists configurations as strings over ``{0, 1, r}``; the first
    entry is always the basis state itself.  ``edges`` holds ``(lo, hi)``
    pairs of state indices connected by a single ``1 -> r`` excitation.
    ``members`` are all basis indices sharing this block's dynamics.
    """

    basis_state: tuple
    states: tuple
    interaction_diagonal: np.ndarray
    rydberg_count_diagonal: np.ndarray
    edges: tuple
    key: tuple
    members: tuple = ()

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def multiplicity(self) -> int:
        return len(self.members)


def _pair_value(mat: InteractionMatrix, i: int, j: int) -> float:
    return np.inf if mat.blockaded(i, j) else float(mat.v[i, j])


def _block_key(mat: InteractionMatrix, excited: tuple) -> tuple:
    """Canonical interaction signature of the excited atoms.

    Minimising over relabelings makes equal keys equivalent to isomorphic
    weighted interaction graphs, hence identical block dynamics.
    """
    w = len(excited)
    if w < 2:
        return (w,)
    best = None
    for perm in itertools.permutations(excited):
        sig = tuple(_pair_value(mat, perm[a], perm[b]) for a in range(w) for b in range(a + 1, w))
        if best is None or sig < best:
            best = sig
    return (w,) + best


def _build_block(mat: InteractionMatrix, index: int) -> Block:
    n = mat.n_atoms
    bits = bits_of(index, n)
    excited = tuple(i for i in range(n) if bits[i])
    configs = []
    for size in range(len(excited) + 1):
        for ryd in itertools.combinations(excited, size):
            if any(mat.blockaded(i, j) for i, j in itertools.combinations(ryd, 2)):
                continue
            configs.append(frozenset(ryd))
    pos = {c: k for k, c in enumerate(configs)}
    inter = np.array([
        sum(float(mat.v[i, j]) for i, j in itertools.combinations(sorted(c), 2)) for c in configs
    ])
    count = np.array([float(len(c)) for c in configs])
    edges = []
    for c in configs:
        for i in excited:
            if i in c:
                continue
            up = c | {i}
            if up in pos:
                edges.append((pos[c], pos[up]))
    labels = tuple(
        "".join("r" if i in c else str(bits[i]) for i in range(n)) for c in configs
    )
    return Block(bits, labels, inter, count, tuple(edges), _block_key(mat, excited), (index,))


def _check_size(mat: InteractionMatrix, max_atoms: int):
    if mat.n_atoms > max_atoms:
        raise SimulationError(
            f"{mat.n_atoms} atoms exceed the cap of {max_atoms} (2^N blocks grow exponentially)"
        )


def enumerate_blocks(mat: InteractionMatrix, dedup: bool = True,
                     max_atoms: int = MAX_ATOMS) -> list[Block]:
    """All blocks of the register, optionally merged by interaction signature."""
    _check_size(mat, max_atoms)
    blocks = [_build_block(mat, b) for b in range(2**mat.n_atoms)]
    if not dedup:
        return blocks
    merged: dict = {}
    for blk in blocks:
        if blk.key in merged:
            rep = merged[blk.key]
            merged[blk.key] = Block(rep.basis_state, rep.states, rep.interaction_diagonal,
                                    rep.rydberg_count_diagonal, rep.edges, rep.key,
                                    rep.members + blk.members)
        else:
            merged[blk.key] = blk
    return list(merged.values())


def block_generator(block: Block, phase: float, detuning0: float, gamma: float = 0.0) -> np.ndarray:
    """Dense ``H / (hbar Omega_0)`` on the block for a fixed laser phase."""
    d = block.dim
    H = np.diag(detuning0 * block.rydberg_count_diagonal + block.interaction_diagonal
                - 0.5j * gamma * block.rydberg_count_diagonal).astype(complex)
    e = np.exp(1j * phase)
    for lo, hi in block.edges:
        H[hi, lo] += 0.5 * e
        H[lo, hi] += 0.5 * np.conj(e)
    assert H.shape == (d, d)
    return H


@dataclass(frozen=True)
class _Layout:
    """Blocks packed into flat arrays for the compiled kernel."""

    n_atoms: int
    nr: np.ndarray
    vdiag: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    accw: np.ndarray
    roots: np.ndarray        # state index of each block's basis state
    block_of: np.ndarray     # basis index -> block number
    offsets: np.ndarray      # first state index of each block
    blocks: tuple


def _layout_from_blocks(n_atoms: int, blocks: list[Block], weights) -> _Layout:
    nr, vd, lo, hi, accw, roots, offsets = [], [], [], [], [], [], []
    block_of = np.zeros(2**n_atoms, dtype=np.int64)
    start = 0
    for k, (blk, wgt) in enumerate(zip(blocks, weights)):
        offsets.append(start)
        roots.append(start)
        nr.extend(blk.rydberg_count_diagonal)
        vd.extend(blk.interaction_diagonal)
        accw.extend([wgt] * blk.dim)
        for a, b in blk.edges:
            lo.append(start + a)
            hi.append(start + b)
        for m in blk.members:
            block_of[m] = k
        start += blk.dim
    return _Layout(
        n_atoms, np.array(nr, float), np.array(vd, float), np.array(lo, np.int64),
        np.array(hi, np.int64), np.array(accw, float), np.array(roots, np.int64),
        block_of, np.array(offsets, np.int64), tuple(blocks),
    )


@functools.lru_cache(maxsize=64)
def _cached_layout(vbytes: bytes, n: int, perfect: bool, signed: bool, dedup: bool) -> _Layout:
    v = np.frombuffer(vbytes, dtype=float).reshape(n, n)
    mat = InteractionMatrix(v.copy(), perfect_blockade=perfect, signed=signed)
    blocks = enumerate_blocks(mat, dedup=dedup)
    weights = [blk.multiplicity / 2**n for blk in blocks]
    return _layout_from_blocks(n, blocks, weights)


def layout_for(mat: InteractionMatrix, dedup: bool = True) -> _Layout:
    _check_size(mat, MAX_ATOMS)
    return _cached_layout(np.ascontiguousarray(mat.v).tobytes(), mat.n_atoms,
                          mat.perfect_blockade, mat.signed, dedup)


@dataclass(frozen=True)
class SimulationResult:
    """Observables of one pulse.

    ``diagonal_amplitudes[b]`` is ``<b|U(T)|b>`` and ``per_block_norm[b]`` the
    final squared norm of the block started in ``|b>``, both indexed by basis
    integer.  ``rydberg_time`` is the Rydberg time averaged over ``|+>^N``.
    """

    diagonal_amplitudes: np.ndarray
    rydberg_time: float
    per_block_norm: np.ndarray
    duration: float
    amplitude_gradients: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_atoms(self) -> int:
        return int(np.log2(self.diagonal_amplitudes.size))


def _run_kernel(layout: _Layout, pulse: PulseSpec, gamma: float, n_sens: int,
                tol: float, s_out: np.ndarray, max_steps: int = 2_000_000):
    if not (1e-14 <= tol <= 1e-6):
        raise SimulationError("tolerance must lie in [1e-14, 1e-6]")
    if gamma < 0:
        raise SimulationError("decay rate must be non-negative")
    n = layout.nr.size
    y0 = np.zeros(n, dtype=np.complex128)
    y0[layout.roots] = 1.0
    s_out = np.asarray(s_out, dtype=float)
    if pulse.duration == 0.0:
        # empty pulse: identity, and the frequency scale 2 pi / T is undefined
        Y = np.zeros((s_out.size, n * (1 + n_sens) + 1), dtype=np.complex128)
        Y[:, :n] = y0
        return Y
    status, Y, _ = _kernel.propagate_all(
        pulse.to_vector(), pulse.is_general, pulse.k_terms, pulse.phase_slope,
        pulse.phase_offset, float(gamma), layout.nr, layout.vdiag, layout.lo, layout.hi,
        layout.accw, y0, n_sens, tol, tol, s_out, max_steps,
    )
    if status == _kernel.STATUS_STEP_UNDERFLOW:
        raise SimulationError(f"integrator step size underflow (T={pulse.duration:g})")
    if status == _kernel.STATUS_TOO_MANY_STEPS:
        raise SimulationError(f"integrator exceeded {max_steps} steps (T={pulse.duration:g})")
    return Y


def _block_norms(layout: _Layout, psi: np.ndarray) -> np.ndarray:
    pops = np.abs(psi) ** 2
    ends = np.append(layout.offsets[1:], psi.size)
    return np.array([pops[a:b].sum() for a, b in zip(layout.offsets, ends)])


def simulate_pulse(mat: InteractionMatrix, pulse: PulseSpec, gamma: float = 0.0, *,
                   tol: float = DEFAULT_TOL, dedup: bool = True,
                   gradients: bool = False) -> SimulationResult:
    """Propagate every block and collect ``c_b``, Rydberg time and norms.

    With ``gradients`` the result also carries ``d c_b / d theta`` for the
    pulse parameter vector, shape ``(n_params, 2**N)``.
    """
    layout = layout_for(mat, dedup)
    n = layout.nr.size
    n_sens = pulse.n_params if gradients else 0
    Y = _run_kernel(layout, pulse, gamma, n_sens, tol, np.array([1.0]))[-1]
    psi = Y[:n]
    c_blocks = psi[layout.roots]
    amps = c_blocks[layout.block_of]
    norms = _block_norms(layout, psi)[layout.block_of]
    grads = None
    if gradients:
        sens = Y[n:n * (1 + n_sens)].reshape(n_sens, n)
        grads = sens[:, layout.roots][:, layout.block_of]
    return SimulationResult(amps, float(Y[-1].real), norms, pulse.duration, grads)


def block_states(mat: InteractionMatrix, pulse: PulseSpec, gamma: float = 0.0, *,
                 tol: float = DEFAULT_TOL, gradients: bool = False):
    """Raw final block states ``(layout, psi, dpsi)``.

    ``psi`` concatenates every block's state vector as ordered by the
    layout; ``dpsi`` has shape ``(n_params, psi.size)`` when requested.
    """
    layout = layout_for(mat)
    n = layout.nr.size
    n_sens = pulse.n_params if gradients else 0
    Y = _run_kernel(layout, pulse, gamma, n_sens, tol, np.array([1.0]))[-1]
    sens = Y[n:n * (1 + n_sens)].reshape(n_sens, n) if gradients else None
    return layout, Y[:n].copy(), sens


def propagate(block: Block, pulse: PulseSpec, gamma: float = 0.0,
              tol: float = DEFAULT_TOL) -> tuple[complex, float, float]:
    """Single-block propagation: ``(c_b, Rydberg-time contribution, final norm)``.

    The Rydberg-time contribution is ``int_0^T <psi|N_r|psi> dt`` for this
    block alone, without the ``2**-N`` average.
    """
    n_atoms = len(block.basis_state)
    layout = _layout_from_blocks(n_atoms, [block], [1.0])
    Y = _run_kernel(layout, pulse, gamma, 0, tol, np.array([1.0]))[-1]
    psi = Y[: block.dim]
    return complex(psi[0]), float(Y[-1].real), float(np.sum(np.abs(psi) ** 2))


@dataclass(frozen=True)
class Trajectory:
    """Dense samples: ``rydberg_population[i, k]`` and ``norm[i, k]`` for time
    ``t[i]`` and block ``k``; ``rydberg_time[i]`` is the running average."""

    t: np.ndarray
    rydberg_population: np.ndarray
    norm: np.ndarray
    rydberg_time: np.ndarray
    blocks: tuple


def trajectory(mat: InteractionMatrix, pulse: PulseSpec, gamma: float = 0.0,
               n_samples: int = 101, *, tol: float = DEFAULT_TOL,
               dedup: bool = True) -> Trajectory:
    layout = layout_for(mat, dedup)
    n = layout.nr.size
    s = np.linspace(0.0, 1.0, n_samples)
    Y = _run_kernel(layout, pulse, gamma, 0, tol, s)
    pops = np.abs(Y[:, :n]) ** 2
    ends = np.append(layout.offsets[1:], n)
    ryd = np.stack([(pops[:, a:b] * layout.nr[a:b]).sum(axis=1)
                    for a, b in zip(layout.offsets, ends)], axis=1)
    nrm = np.stack([pops[:, a:b].sum(axis=1) for a, b in zip(layout.offsets, ends)], axis=1)
    return Trajectory(s * pulse.duration, ryd, nrm, Y[:, -1].real.copy(), layout.blocks)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    lines = ["omega0_t,block,rydberg_population,norm"]
    for i, t in enumerate(traj.t):
        for k, blk in enumerate(traj.blocks):
            label = "".join(map(str, blk.basis_state))
            lines.append(f"{t!r},{label},{traj.rydberg_population[i, k]!r},{traj.norm[i, k]!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# -- full Hilbert space reference -----------------------------------------------

BRUTE_FORCE_MAX_ATOMS = 4


def _full_operators(mat: InteractionMatrix, blockade_value: float):
    n = mat.n_atoms
    dim = 3**n
    # level index per atom: 0 -> |0>, 1 -> |1>, 2 -> |r>
    levels = np.array(list(itertools.product(range(3), repeat=n)))
    ryd = (levels == 2)
    n_r = ryd.sum(axis=1).astype(float)
    inter = np.zeros(dim)
    for i, j in itertools.combinations(range(n), 2):
        vij = blockade_value if mat.blockaded(i, j) else float(mat.v[i, j])
        inter += vij * (ryd[:, i] & ryd[:, j])
    raise_op = np.zeros((dim, dim))
    index = {tuple(l): k for k, l in enumerate(levels)}
    for k, l in enumerate(levels):
        for i in range(n):
            if l[i] == 1:
                up = list(l)
                up[i] = 2
                raise_op[index[tuple(up)], k] += 1.0
    comp = [index[tuple(b)] for b in itertools.product(range(2), repeat=n)]
    return n_r, inter, raise_op, np.array(comp)


def brute_force_simulate(mat: InteractionMatrix, pulse: PulseSpec, gamma: float = 0.0, *,
                         blockade_value: float = 1e6, tol: float = 1e-11) -> SimulationResult:
    """Reference propagation in the full ``3**N`` space without block structure.

    Blockaded pairs receive the finite coupling ``blockade_value``; a stiff
    solver is used when that value is large.  Intended for testing only.
    """
    n = mat.n_atoms
    if n > BRUTE_FORCE_MAX_ATOMS:
        raise SimulationError(f"brute force supports at most {BRUTE_FORCE_MAX_ATOMS} atoms")
    n_r, inter, raise_op, comp = _full_operators(mat, blockade_value)
    dim = n_r.size
    ncomp = comp.size
    diag = pulse.detuning0 * n_r + inter - 0.5j * gamma * n_r
    lower_op = raise_op.T

    def hamiltonian(t):
        e = np.exp(1j * phase_at(pulse, min(max(t, 0.0), pulse.duration)))
        return 0.5 * e * raise_op + 0.5 * np.conj(e) * lower_op + np.diag(diag)

    plus = np.zeros(dim, dtype=complex)
    plus[comp] = 2 ** (-n / 2)

    def rhs(t, y):
        U = y[:-1].reshape(dim, ncomp)
        H = hamiltonian(t)
        dU = -1j * (H @ U)
        psi = U.sum(axis=1) * 2 ** (-n / 2)
        return np.append(dU.ravel(), np.sum(n_r * np.abs(psi) ** 2))

    U0 = np.zeros((dim, ncomp), dtype=complex)
    U0[comp, np.arange(ncomp)] = 1.0
    y0 = np.append(U0.ravel(), 0.0 + 0.0j)
    if pulse.duration == 0.0:
        yT = y0
    elif np.max(np.abs(inter)) <= 1e3:
        sol = solve_ivp(rhs, (0.0, pulse.duration), y0, method="DOP853", rtol=tol, atol=tol)
        if not sol.success:
            raise SimulationError(f"brute-force integration failed: {sol.message}")
        yT = sol.y[:, -1]
    else:
        # large blockade couplings: implicit solver on the real/imaginary split
        m = y0.size

        def rhs_real(t, x):
            d = rhs(t, x[:m] + 1j * x[m:])
            return np.concatenate([d.real, d.imag])

        eye = np.eye(ncomp)

        def jac_real(t, x):
            M = np.zeros((m, m), dtype=complex)
            M[:-1, :-1] = -1j * np.kron(hamiltonian(t), eye)
            return np.block([[M.real, -M.imag], [M.imag, M.real]])

        sol = solve_ivp(rhs_real, (0.0, pulse.duration), np.concatenate([y0.real, y0.imag]),
                        method="Radau", jac=jac_real, rtol=max(tol, 1e-10), atol=max(tol, 1e-10))
        if not sol.success:
            raise SimulationError(f"brute-force integration failed: {sol.message}")
        yT = sol.y[:m, -1] + 1j * sol.y[m:, -1]
    U = yT[:-1].reshape(dim, ncomp)
    amps = np.array([U[comp[b], b] for b in range(ncomp)])
    norms = np.sum(np.abs(U) ** 2, axis=0)
    return SimulationResult(amps, float(yT[-1].real), norms, pulse.duration)
