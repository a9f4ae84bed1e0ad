"""TOML run configuration.

A configuration document has the sections ``[geometry]``, ``[pulse]`` (or
``[ansatz]``), ``[target]``, ``[objective]``, ``[optimizer]`` and ``[scan]``;
every section is optional and falls back to defaults.  Example::

    [geometry]
    kind = "isosceles"      # perfect | isosceles | line | right_triangle
    v_nn = 32.0             #   | equilateral | positions | matrix
    v_nnn = 32.0            # apex is index 1; v_nnn couples indices 0 and 2

    [pulse]
    file = "pulse.toml"     # or ansatz = "antisymmetric", k = 2 to optimize

    [target]
    name = "CCZbar"

    [objective]
    gamma = 1e-4
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from . import geometry as geo
from .optimizer import OptimizerConfig
from .pulse import Ansatz, PulseSpec, load_pulse, pulse_from_dict
from .targets import TargetGate, builtin, from_g3, from_phase_table


class ConfigError(ValueError):
    pass


def toml_loads(text: str) -> dict:
    try:
        return _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def config_hash(data) -> str:
    """Short SHA-256 digest of the canonical JSON form of ``data``."""
    blob = json.dumps(_jsonable(data), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _take(section: dict, name: str, allowed: set) -> dict:
    extra = set(section) - allowed
    if extra:
        raise ConfigError(f"[{name}] has unknown keys: {sorted(extra)}")
    return section


@dataclass(frozen=True)
class GeometryConfig:
    """Atom geometry.

    ``kind = "matrix"`` takes ``v_matrix``, the row-major upper triangle of
    ``V_ij / (hbar Omega_0)``; ``kind = "positions"`` takes ``positions`` and
    ``c6_over_hbar_omega0``.  Either kind is inferred when its keys are
    present.  In 3-atom presets the apex (the atom with two nearest-neighbour
    couplings) is atom 2 when counting from 1, i.e. index 1 here.
    """

    kind: str = "perfect"
    n_atoms: int = 2
    v_nn: float = math.inf
    v_nnn: float | None = None
    perfect_blockade: bool = False
    signed: bool = False
    positions: tuple = ()
    c6_over_hbar_omega0: float | None = None
    v_matrix: tuple = ()

    KINDS = ("perfect", "isosceles", "line", "right_triangle", "equilateral", "positions", "matrix")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown geometry kind {self.kind!r}; choose from {self.KINDS}")

    def arrangement(self) -> geo.AtomArrangement | None:
        """Atom positions, or ``None`` when the geometry is given by couplings only."""
        if self.kind == "isosceles":
            return geo.isosceles(self.v_nn, self.v_nn if self.v_nnn is None else self.v_nnn)
        if self.kind == "line":
            return geo.line(self.n_atoms, self.v_nn)
        if self.kind == "right_triangle":
            return geo.right_triangle(self.v_nn)
        if self.kind == "equilateral":
            return geo.equilateral(self.v_nn)
        if self.kind == "positions":
            if self.c6_over_hbar_omega0 is None:
                raise ConfigError("positions geometry needs c6_over_hbar_omega0")
            return geo.AtomArrangement(np.array(self.positions, dtype=float),
                                       float(self.c6_over_hbar_omega0))
        return None

    def build(self) -> geo.InteractionMatrix:
        try:
            if self.kind == "perfect":
                return geo.InteractionMatrix.perfect(self.n_atoms)
            if self.kind == "matrix":
                return geo.InteractionMatrix.from_upper(self.n_atoms, self.v_matrix,
                                                        perfect_blockade=self.perfect_blockade,
                                                        signed=self.signed)
            return geo.interactions_from_positions(self.arrangement(), signed=self.signed,
                                                   perfect_blockade=self.perfect_blockade)
        except (geo.GeometryError, ValueError) as exc:
            raise ConfigError(f"[geometry] {exc}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "GeometryConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        _take(d, "geometry", names)
        kw = dict(d)
        if "positions" in kw:
            kw["positions"] = tuple(tuple(float(x) for x in row) for row in kw["positions"])
            kw.setdefault("kind", "positions")
        if "v_matrix" in kw:
            kw["v_matrix"] = tuple(float(x) for x in kw["v_matrix"])
            kw.setdefault("kind", "matrix")
        for key in ("v_nn", "v_nnn", "c6_over_hbar_omega0"):
            if kw.get(key) is not None:
                kw[key] = float(kw[key])
        kind = kw.get("kind")
        if kind == "matrix" and "n_atoms" not in kw:
            m = len(kw.get("v_matrix", ()))
            n = int(round((1 + math.sqrt(1 + 8 * m)) / 2))
            if n * (n - 1) // 2 != m or m == 0:
                raise ConfigError("[geometry] v_matrix length is not a triangular number")
            kw["n_atoms"] = n
        if kind in ("isosceles", "right_triangle", "equilateral"):
            kw.setdefault("n_atoms", 3)
        if kind == "positions" and "positions" in kw:
            kw["n_atoms"] = len(kw["positions"])
        return cls(**kw)


@dataclass(frozen=True)
class PulseConfig:
    """Either a fixed pulse (file or inline parameters) or an ansatz to optimize."""

    file: str | None = None
    params: dict | None = None
    ansatz: str = "antisymmetric"
    k: int = 1

    def __post_init__(self):
        try:
            Ansatz(self.ansatz)
        except ValueError:
            raise ConfigError(f"unknown ansatz {self.ansatz!r}") from None
        if self.k < 1:
            raise ConfigError("[pulse] k must be >= 1")

    def load(self, base: Path | None = None) -> PulseSpec:
        if self.params is not None:
            return pulse_from_dict(self.params)
        if self.file is None:
            raise ConfigError("[pulse] needs a file or inline parameters")
        path = Path(self.file)
        if base is not None and not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"pulse file not found: {path}")
        return load_pulse(path)

    @classmethod
    def from_dict(cls, d: dict) -> "PulseConfig":
        known = {"file", "ansatz", "k"}
        if "omega0_T" in d:
            return cls(params=dict(d), ansatz=str(d.get("ansatz", "antisymmetric")))
        _take(d, "pulse", known)
        return cls(**d)


@dataclass(frozen=True)
class TargetConfig:
    name: str | None = "CZ"
    theta: float | None = None
    theta_prime: float | str | None = None
    lam: float | None = None
    n_qubits: int | None = None
    phases: tuple = ()

    def build(self) -> TargetGate:
        if self.phases:
            if self.n_qubits is None:
                raise ConfigError("[target] phase table needs n_qubits")
            return from_phase_table(self.n_qubits, self.phases, self.name or "custom")
        if self.theta is not None or self.lam is not None:
            if self.theta is None or self.lam is None or self.theta_prime is None:
                raise ConfigError("[target] G3 family needs theta, theta_prime and lam")
            return from_g3(self.theta, self.theta_prime, self.lam, self.name)
        try:
            return builtin(self.name or "")
        except ValueError as exc:
            raise ConfigError(f"[target] {exc}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "TargetConfig":
        _take(d, "target", {f.name for f in dataclasses.fields(cls)})
        kw = dict(d)
        if "phases" in kw:
            kw["phases"] = tuple(float(x) for x in kw["phases"])
        return cls(**kw)


@dataclass(frozen=True)
class ObjectiveConfig:
    gamma: float = 0.0

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ConfigError("[objective] gamma must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectiveConfig":
        _take(d, "objective", {"gamma"})
        return cls(float(d.get("gamma", 0.0)))


@dataclass(frozen=True)
class ScanConfig:
    deltas: tuple = (-0.01, -0.005, 0.0, 0.005, 0.01)
    pairs: tuple = ((0, 1),)
    v_nnn: tuple = ()
    k_list: tuple = (1,)
    ansatze: tuple = ("antisymmetric",)
    restarts: int = 500

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigError("[scan] restarts must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ScanConfig":
        _take(d, "scan", {f.name for f in dataclasses.fields(cls)})
        kw = {}
        if "deltas" in d:
            kw["deltas"] = tuple(float(x) for x in d["deltas"])
        if "pairs" in d:
            kw["pairs"] = tuple((int(a), int(b)) for a, b in d["pairs"])
        if "v_nnn" in d:
            kw["v_nnn"] = tuple(float(x) for x in d["v_nnn"])
        if "k_list" in d:
            kw["k_list"] = tuple(int(x) for x in d["k_list"])
        if "ansatze" in d:
            kw["ansatze"] = tuple(str(x) for x in d["ansatze"])
        if "restarts" in d:
            kw["restarts"] = int(d["restarts"])
        return cls(**kw)


def optimizer_from_dict(d: dict) -> OptimizerConfig:
    names = {f.name for f in dataclasses.fields(OptimizerConfig)}
    _take(d, "optimizer", names)
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    try:
        return OptimizerConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[optimizer] {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    pulse: PulseConfig = field(default_factory=PulseConfig)
    target: TargetConfig = field(default_factory=TargetConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    base_dir: str | None = None
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def pulse_spec(self) -> PulseSpec:
        return self.pulse.load(Path(self.base_dir) if self.base_dir else None)

    def with_seed(self, seed: int | None) -> "RunConfig":
        if seed is None:
            return self
        raw = dict(self.raw)
        raw["optimizer"] = dict(raw.get("optimizer", {}), seed=int(seed))
        return dataclasses.replace(self, optimizer=self.optimizer.replace(seed=int(seed)), raw=raw)


SECTIONS = ("geometry", "pulse", "ansatz", "target", "objective", "optimizer", "scan")


def parse_config(data: dict, base_dir=None) -> RunConfig:
    extra = set(data) - set(SECTIONS)
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    if "pulse" in data and "ansatz" in data:
        raise ConfigError("give either [pulse] or [ansatz], not both")
    for key, val in data.items():
        if not isinstance(val, dict):
            raise ConfigError(f"[{key}] must be a table")
    try:
        cfg = RunConfig(
            geometry=GeometryConfig.from_dict(data.get("geometry", {})),
            pulse=PulseConfig.from_dict(data.get("pulse", data.get("ansatz", {}))),
            target=TargetConfig.from_dict(data.get("target", {})),
            objective=ObjectiveConfig.from_dict(data.get("objective", {})),
            optimizer=optimizer_from_dict(data.get("optimizer", {})),
            scan=ScanConfig.from_dict(data.get("scan", {})),
            base_dir=None if base_dir is None else str(base_dir),
            raw=data,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    n_geo = cfg.geometry.build().n_atoms
    n_tgt = cfg.target.build().n_qubits
    if n_geo != n_tgt:
        raise ConfigError(f"geometry has {n_geo} atoms but target acts on {n_tgt} qubits")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(toml_loads(path.read_text()), base_dir=path.parent)
