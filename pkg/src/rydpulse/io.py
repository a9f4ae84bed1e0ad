"""Atomic file output and resumable CSV tables."""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    # JSON has no inf/nan; map them to strings so files stay standard
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps_json(data) -> str:
    return json.dumps(_clean(data), indent=2, sort_keys=True, default=_json_default) + "\n"


def atomic_write_json(path, data) -> None:
    atomic_write_text(path, dumps_json(data))


def format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(header, rows) -> str:
    lines = [",".join(header)] + [",".join(format_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


class ResumeError(RuntimeError):
    pass


class ResumableCSV:
    """Append-only CSV with a manifest of completed point keys.

    The manifest ``<path>.manifest.json`` stores the config hash, header and
    completed keys in write order.  On reopening, rows beyond the manifest
    (a crash between the row append and the manifest update) are dropped, so
    re-running a point is idempotent.
    """

    def __init__(self, path, header, config_hash: str, resume: bool = True):
        self.path = Path(path)
        self.header = list(header)
        self.config_hash = config_hash
        self.manifest_path = self.path.with_name(self.path.name + ".manifest.json")
        self.completed: list = []
        if resume and self.manifest_path.exists():
            self._load()
        else:
            atomic_write_text(self.path, ",".join(self.header) + "\n")
            self._save()

    def _load(self):
        man = json.loads(self.manifest_path.read_text())
        if man.get("config_hash") != self.config_hash:
            raise ResumeError(
                f"{self.path} was written with config {man.get('config_hash')}, "
                f"current config is {self.config_hash}; choose another output or start fresh"
            )
        if man.get("header") != self.header:
            raise ResumeError(f"{self.path} has a different column layout")
        self.completed = [tuple(k) if isinstance(k, list) else k for k in man["completed"]]
        lines = self.path.read_text().splitlines() if self.path.exists() else []
        keep = lines[: 1 + len(self.completed)]
        if len(keep) != 1 + len(self.completed):
            raise ResumeError(f"{self.path} is shorter than its manifest")
        atomic_write_text(self.path, "\n".join(keep) + "\n")

    def _save(self):
        atomic_write_json(self.manifest_path, {
            "config_hash": self.config_hash,
            "header": self.header,
            "completed": [list(k) if isinstance(k, tuple) else k for k in self.completed],
        })

    def done(self, key) -> bool:
        return key in self.completed

    def append(self, key, row) -> None:
        if len(row) != len(self.header):
            raise ValueError("row length does not match the header")
        with open(self.path, "a") as fh:
            fh.write(",".join(format_cell(v) for v in row) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.completed.append(key)
        self._save()

    def rows(self) -> list[list[str]]:
        return [line.split(",") for line in self.path.read_text().splitlines()[1:]]
