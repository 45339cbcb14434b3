"""File formats: input series, per-scale tables and run manifests.

Tables are comma-separated with a single header line. The run manifest is
embedded as a leading comment line ``# manifest: {json}`` so every table is
self-describing; readers skip ``#`` lines.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .errors import DataError

MANIFEST_PREFIX = "# manifest: "
THEORY_COLUMNS = ("tau", "f_tau", "S", "sigma2_x", "sigma2_e")
STUDY_COLUMNS = ("tau", "f_tau", "theory", "median", "p10", "p90", "missing_fraction")


@dataclass
class RunManifest:
    command: str
    params: dict = field(default_factory=dict)
    version: str = __version__
    timestamp: str | None = None

    @classmethod
    def create(cls, command: str, params: Mapping) -> "RunManifest":
        return cls(command, dict(params), __version__, _timestamp())

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params,
                "version": self.version, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunManifest":
        try:
            return cls(data["command"], dict(data["params"]), data.get("version", ""),
                       data.get("timestamp"))
        except (KeyError, TypeError) as exc:
            raise DataError(f"malformed manifest: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _timestamp() -> str | None:
    # wall-clock time would make reruns differ byte for byte; honour the
    # reproducible-builds convention instead
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(int(epoch)))


def format_float(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def json_safe(obj):
    """Replace non-finite floats by ``None`` and numpy scalars/arrays by Python types."""
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_safe(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_table(columns: Mapping[str, Sequence], manifest: RunManifest | None = None) -> str:
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    lengths = {c.size for c in cols}
    if len(lengths) > 1:
        raise ValueError("table columns differ in length")
    lines = []
    if manifest is not None:
        lines.append(MANIFEST_PREFIX + manifest.dumps())
    lines.append(",".join(names))
    for row in zip(*cols):
        cells = [str(int(v)) if n == "tau" else format_float(v) for n, v in zip(names, row)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_table(path, columns: Mapping[str, Sequence], manifest: RunManifest | None = None) -> None:
    atomic_write(path, format_table(columns, manifest))


def parse_table(text: str) -> tuple[RunManifest | None, dict[str, np.ndarray]]:
    manifest = None
    header = None
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith(MANIFEST_PREFIX):
            manifest = RunManifest.from_dict(json.loads(line[len(MANIFEST_PREFIX):]))
            continue
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split(",")
        if header is None:
            header = [c.strip() for c in cells]
            continue
        if len(cells) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(cells)}")
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric field") from None
    if header is None:
        raise DataError("table has no header")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    cols = {name: data[:, i] for i, name in enumerate(header)}
    if "tau" in cols:
        cols["tau"] = cols["tau"].astype(int)
    return manifest, cols


def read_table(path) -> tuple[RunManifest | None, dict[str, np.ndarray]]:
    return parse_table(Path(path).read_text(encoding="utf-8"))


def parse_series(text: str) -> np.ndarray:
    """One finite number per line; ``#`` comments and one leading header allowed."""
    values = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            v = float(line)
        except ValueError:
            if not values and not seen_header:
                seen_header = True
                continue
            raise DataError(f"line {lineno}: not a number: {line[:40]!r}") from None
        if not math.isfinite(v):
            raise DataError(f"line {lineno}: non-finite value {line!r}")
        values.append(v)
    return np.array(values, dtype=float)


def read_series(path) -> np.ndarray:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    return parse_series(text)


def format_series(x, manifest: RunManifest | None = None) -> str:
    lines = [MANIFEST_PREFIX + manifest.dumps()] if manifest is not None else []
    lines.extend(format_float(v) for v in np.asarray(x, dtype=float))
    return "\n".join(lines) + "\n"


def read_manifest(path) -> RunManifest:
    """Manifest embedded in any file written by the CLI."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = json.loads(text)
        return RunManifest.from_dict(data.get("manifest", data))
    for line in text.splitlines():
        if line.startswith(MANIFEST_PREFIX):
            return RunManifest.from_dict(json.loads(line[len(MANIFEST_PREFIX):]))
    raise DataError(f"{path}: no manifest found")
