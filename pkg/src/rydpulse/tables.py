"""Published reference pulses bundled with the package.

Each table file lists columns of pulse parameters together with the
reported Rydberg time and decay-free infidelity.  The files are
transcribed verbatim; :data:`CHECKSUMS` pins their content.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources

from .config import toml_loads
from .dynamics import DEFAULT_TOL
from .geometry import InteractionMatrix
from .objective import EvaluationRecord, Objective, evaluate
from .pulse import PulseSpec, pulse_from_dict
from .targets import TargetGate, builtin

TABLE_IDS = ("I", "II", "III", "IV")

CHECKSUMS = {
    "I": "8cf7f7846dc2df4c17d44960397670cfb97cbac9b1b4562fa4811099ec16be12",
    "II": "e35dcb6224f20aff626a16204f51de892166271e2403944e204e50a7a5698bfe",
    "III": "e9df0fd05b17d6c1d2c1ca76e61b821461991078517f4eb3cb7bb375401dc3bc",
    "IV": "8fc1eb867c4344326e271e1e7ca11868f26952b6188ce71c26431283c38487ac",
}

RYDBERG_TIME_TOL = 0.01
INFIDELITY_FLOOR = 1e-8

_META_KEYS = ("label", "omega0_T_R", "infidelity")


class TableError(ValueError):
    pass


@dataclass(frozen=True)
class TableColumn:
    table: str
    column: int          # 1-based, as printed
    label: str
    target_name: str
    n_atoms: int
    pulse: PulseSpec
    published_rydberg_time: float
    published_infidelity: float

    @property
    def target(self) -> TargetGate:
        return builtin(self.target_name)

    @property
    def interactions(self) -> InteractionMatrix:
        return InteractionMatrix.perfect(self.n_atoms)

    @property
    def name(self) -> str:
        return f"{self.table}.{self.column}"


def _check_id(table_id: str) -> str:
    tid = str(table_id).upper()
    if tid not in TABLE_IDS:
        raise TableError(f"unknown table {table_id!r}; choose from {', '.join(TABLE_IDS)}")
    return tid


def table_text(table_id: str) -> str:
    tid = _check_id(table_id)
    return resources.files("rydpulse.data").joinpath(f"table_{tid}.toml").read_text()


def table_checksum(table_id: str) -> str:
    return hashlib.sha256(table_text(table_id).encode()).hexdigest()


def load_table(table_id: str) -> list[TableColumn]:
    tid = _check_id(table_id)
    data = toml_loads(table_text(tid))
    cols = []
    for i, col in enumerate(data["column"], start=1):
        params = {k: v for k, v in col.items() if k not in _META_KEYS}
        cols.append(TableColumn(
            table=tid, column=i, label=col["label"], target_name=data["target"],
            n_atoms=int(data["n_atoms"]), pulse=pulse_from_dict(params),
            published_rydberg_time=float(col["omega0_T_R"]),
            published_infidelity=float(col["infidelity"]),
        ))
    return cols


def all_columns() -> list[TableColumn]:
    return [c for tid in TABLE_IDS for c in load_table(tid)]


@dataclass(frozen=True)
class ColumnCheck:
    column: TableColumn
    record: EvaluationRecord
    infidelity_limit: float

    @property
    def rydberg_time_error(self) -> float:
        return abs(self.record.rydberg_time - self.column.published_rydberg_time)

    @property
    def infidelity_ok(self) -> bool:
        return self.record.infidelity <= self.infidelity_limit

    @property
    def rydberg_time_ok(self) -> bool:
        return self.rydberg_time_error <= RYDBERG_TIME_TOL

    @property
    def passed(self) -> bool:
        return self.infidelity_ok and self.rydberg_time_ok

    def to_dict(self) -> dict:
        c = self.column
        return {
            "column": c.name, "label": c.label, "target": c.target_name,
            "infidelity": self.record.infidelity, "infidelity_limit": self.infidelity_limit,
            "rydberg_time": self.record.rydberg_time,
            "published_rydberg_time": c.published_rydberg_time, "passed": self.passed,
        }


def infidelity_limit(published: float) -> float:
    return max(10.0 * published, INFIDELITY_FLOOR)


def check_column(col: TableColumn, *, tol: float = DEFAULT_TOL) -> ColumnCheck:
    """Simulate a published pulse without decay and compare with the table."""
    rec = evaluate(col.interactions, col.pulse, Objective(col.target), tol=tol)
    return ColumnCheck(col, rec, infidelity_limit(col.published_infidelity))


def verify_table(table_id: str, *, tol: float = DEFAULT_TOL) -> list[ColumnCheck]:
    return [check_column(c, tol=tol) for c in load_table(table_id)]
