"""Trigonometric laser-phase pulses with tunable frequencies.

Time is measured in units of ``1/Omega_0``.  A pulse has constant Rabi
amplitude ``Omega_0`` on ``[0, T]`` and a phase

    xi(t) = sum_n alpha_n sin(w_n (t - T/2)) + beta_n cos(v_n (t - T/2))

with ``w_n = (2 pi / T) n (1 + tanh(A_n) / 2)`` (``v_n`` likewise with
``B_n``).  The antisymmetric family keeps only the sine terms.  A constant
detuning ``Delta_0`` is carried separately.

Sign convention: the drive couples ``|1> -> |r>`` with matrix element
``exp(+i xi) / 2`` and the detuning enters as ``+Delta |r><r|``.  Under this
convention a constant detuning is equivalent to the extra phase
``+Delta_0 * t`` (see :func:`to_detuning_form`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .io import atomic_write_text


class PulseError(ValueError):
    pass


class Ansatz(str, enum.Enum):
    GENERAL = "general"
    ANTISYMMETRIC = "antisymmetric"


def n_params(ansatz: Ansatz | str, k_terms: int) -> int:
    ansatz = Ansatz(ansatz)
    return 2 + (4 if ansatz is Ansatz.GENERAL else 2) * k_terms


def k_from_n_params(ansatz: Ansatz | str, count: int) -> int:
    per = 4 if Ansatz(ansatz) is Ansatz.GENERAL else 2
    if count < 2 + per or (count - 2) % per:
        raise PulseError(f"{count} parameters do not fit the {Ansatz(ansatz).value} ansatz")
    return (count - 2) // per


def _tuple(x) -> tuple:
    return tuple(float(v) for v in x)


@dataclass(frozen=True)
class PulseSpec:
    """A pulse from one of the two ansatz families.

    ``phase_slope`` and ``phase_offset`` are zero for ordinary pulses; they
    are only set by :func:`to_detuning_form` and are not optimization
    parameters.  A duration of zero denotes the empty pulse.
    """

    ansatz: Ansatz
    duration: float
    detuning0: float
    sine_freqs: tuple
    sine_amps: tuple
    cosine_freqs: tuple = ()
    cosine_amps: tuple = ()
    phase_slope: float = 0.0
    phase_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ansatz", Ansatz(self.ansatz))
        for name in ("sine_freqs", "sine_amps", "cosine_freqs", "cosine_amps"):
            object.__setattr__(self, name, _tuple(getattr(self, name)))
        for name in ("duration", "detuning0", "phase_slope", "phase_offset"):
            object.__setattr__(self, name, float(getattr(self, name)))
        K = len(self.sine_freqs)
        if K < 1:
            raise PulseError("need at least one term (K >= 1)")
        if len(self.sine_amps) != K:
            raise PulseError("sine_freqs and sine_amps differ in length")
        if self.ansatz is Ansatz.GENERAL:
            if len(self.cosine_freqs) != K or len(self.cosine_amps) != K:
                raise PulseError("general ansatz needs K cosine frequencies and amplitudes")
        elif self.cosine_freqs or self.cosine_amps:
            raise PulseError("antisymmetric ansatz has no cosine terms")
        if not (self.duration >= 0.0):
            raise PulseError("duration must be non-negative")
        if not np.all(np.isfinite(self.to_vector())) or not (
            math.isfinite(self.phase_slope) and math.isfinite(self.phase_offset)
        ):
            raise PulseError("pulse parameters must be finite")

    @property
    def k_terms(self) -> int:
        return len(self.sine_freqs)

    @property
    def n_params(self) -> int:
        return n_params(self.ansatz, self.k_terms)

    @property
    def is_general(self) -> bool:
        return self.ansatz is Ansatz.GENERAL

    def to_vector(self) -> np.ndarray:
        """Canonical ordering ``(T, Delta_0, A_1, alpha_1, [B_1, beta_1,] ...)``."""
        out = [self.duration, self.detuning0]
        for k in range(self.k_terms):
            out += [self.sine_freqs[k], self.sine_amps[k]]
            if self.is_general:
                out += [self.cosine_freqs[k], self.cosine_amps[k]]
        return np.array(out, dtype=float)

    @classmethod
    def from_vector(cls, ansatz: Ansatz | str, vec) -> "PulseSpec":
        ansatz = Ansatz(ansatz)
        vec = np.asarray(vec, dtype=float)
        K = k_from_n_params(ansatz, vec.size)
        per = 4 if ansatz is Ansatz.GENERAL else 2
        body = vec[2:].reshape(K, per)
        kw = {}
        if ansatz is Ansatz.GENERAL:
            kw = dict(cosine_freqs=body[:, 2], cosine_amps=body[:, 3])
        return cls(ansatz, vec[0], vec[1], body[:, 0], body[:, 1], **kw)

    def with_duration(self, duration: float) -> "PulseSpec":
        vec = self.to_vector()
        vec[0] = duration
        return PulseSpec.from_vector(self.ansatz, vec)


def zero_pulse(ansatz: Ansatz | str = Ansatz.ANTISYMMETRIC, k_terms: int = 1,
               duration: float = 0.0) -> PulseSpec:
    vec = np.zeros(n_params(ansatz, k_terms))
    vec[0] = duration
    return PulseSpec.from_vector(ansatz, vec)


def _check_time(p: PulseSpec, t):
    t = np.asarray(t, dtype=float)
    tol = 1e-12 * max(1.0, p.duration)
    if np.any(t < -tol) or np.any(t > p.duration + tol):
        raise PulseError(f"time outside [0, {p.duration}]")
    return t


def _terms(p: PulseSpec, t):
    u = t - p.duration / 2.0
    scale = 2.0 * np.pi / p.duration if p.duration > 0 else 0.0
    for k in range(p.k_terms):
        n = k + 1
        w = scale * n * (1.0 + 0.5 * np.tanh(p.sine_freqs[k]))
        yield w, p.sine_amps[k], u, "sin"
        if p.is_general:
            v = scale * n * (1.0 + 0.5 * np.tanh(p.cosine_freqs[k]))
            yield v, p.cosine_amps[k], u, "cos"


def phase_at(p: PulseSpec, t):
    """Laser phase ``xi(t)`` in radians (without the constant detuning)."""
    t = _check_time(p, t)
    out = np.zeros_like(t) + p.phase_offset + p.phase_slope * t
    for w, amp, u, kind in _terms(p, t):
        out = out + amp * (np.sin(w * u) if kind == "sin" else np.cos(w * u))
    return out if out.ndim else float(out)


def phase_rate_at(p: PulseSpec, t):
    """Analytic ``d xi / dt`` in units of ``Omega_0``."""
    t = _check_time(p, t)
    out = np.zeros_like(t) + p.phase_slope
    for w, amp, u, kind in _terms(p, t):
        out = out + (amp * w * np.cos(w * u) if kind == "sin" else -amp * w * np.sin(w * u))
    return out if out.ndim else float(out)


def to_detuning_form(p: PulseSpec) -> PulseSpec:
    """Absorb the constant detuning into the phase.

    Returns a pulse with ``Delta_0 = 0`` whose phase is
    ``xi(t) + Delta_0 t - xi(0)``.  Both forms are related by the frame
    change ``exp(-i Delta_0 t |r><r|)`` which leaves every computational-basis
    amplitude unchanged.
    """
    xi0 = phase_at(p, 0.0)
    return PulseSpec(
        p.ansatz, p.duration, 0.0, p.sine_freqs, p.sine_amps, p.cosine_freqs,
        p.cosine_amps, phase_slope=p.phase_slope + p.detuning0,
        phase_offset=p.phase_offset - xi0,
    )


@dataclass(frozen=True)
class PulseProfileSample:
    t: float
    phase: float
    phase_rate: float


def sample_profile(p: PulseSpec, n_samples: int) -> list[PulseProfileSample]:
    """Uniform samples of the detuning-absorbed profile with ``xi(0) = 0``."""
    if n_samples < 2:
        raise PulseError("need at least two samples")
    q = to_detuning_form(p)
    t = np.linspace(0.0, p.duration, n_samples)
    xi = np.atleast_1d(phase_at(q, t))
    rate = np.atleast_1d(phase_rate_at(q, t))
    return [PulseProfileSample(float(a), float(b), float(c)) for a, b, c in zip(t, xi, rate)]


def write_profile_csv(samples: list[PulseProfileSample], path) -> None:
    lines = ["omega0_t,xi,dxi_dt"]
    lines += [f"{s.t!r},{s.phase!r},{s.phase_rate!r}" for s in samples]
    atomic_write_text(path, "\n".join(lines) + "\n")


# -- parameter files ------------------------------------------------------------

def pulse_to_dict(p: PulseSpec) -> dict:
    """Flat key/value layout mirroring the published parameter tables."""
    d = {
        "ansatz": p.ansatz.value,
        "omega0_T": p.duration,
        "delta0_over_omega0": p.detuning0,
    }
    for k in range(p.k_terms):
        d[f"A{k + 1}"] = p.sine_freqs[k]
        d[f"alpha{k + 1}"] = p.sine_amps[k]
        if p.is_general:
            d[f"B{k + 1}"] = p.cosine_freqs[k]
            d[f"beta{k + 1}"] = p.cosine_amps[k]
    return d


def pulse_from_dict(d: dict) -> PulseSpec:
    try:
        ansatz = Ansatz(str(d["ansatz"]).lower())
        T = float(d["omega0_T"])
        d0 = float(d.get("delta0_over_omega0", 0.0))
    except KeyError as exc:
        raise PulseError(f"pulse parameters missing key {exc}") from None
    except ValueError as exc:
        raise PulseError(str(exc)) from None
    K = 0
    while f"A{K + 1}" in d:
        K += 1
    if K == 0:
        raise PulseError("pulse parameters need at least A1/alpha1")
    known = {"ansatz", "omega0_T", "delta0_over_omega0"}
    sf, sa, cf, ca = [], [], [], []
    for k in range(1, K + 1):
        try:
            sf.append(float(d[f"A{k}"]))
            sa.append(float(d[f"alpha{k}"]))
            known |= {f"A{k}", f"alpha{k}"}
            if ansatz is Ansatz.GENERAL:
                cf.append(float(d[f"B{k}"]))
                ca.append(float(d[f"beta{k}"]))
                known |= {f"B{k}", f"beta{k}"}
        except KeyError as exc:
            raise PulseError(f"pulse parameters missing key {exc}") from None
    extra = set(d) - known
    if extra:
        raise PulseError(f"unexpected pulse keys: {sorted(extra)}")
    return PulseSpec(ansatz, T, d0, sf, sa, cf, ca)


def dumps_pulse(p: PulseSpec) -> str:
    lines = []
    for key, val in pulse_to_dict(p).items():
        lines.append(f'{key} = "{val}"' if isinstance(val, str) else f"{key} = {val!r}")
    return "\n".join(lines) + "\n"


def load_pulse(path) -> PulseSpec:
    """Read a pulse parameter file (TOML key/value or JSON)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        import json

        data = json.loads(text)
    else:
        from .config import toml_loads

        data = toml_loads(text)
    if "pulse" in data and isinstance(data["pulse"], dict):
        data = data["pulse"]
    return pulse_from_dict(data)


def save_pulse(p: PulseSpec, path) -> None:
    atomic_write_text(path, dumps_pulse(p))
