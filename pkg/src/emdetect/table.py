"""Column-oriented result table shared by every scan and by the CLI.

CSV layout: ``#``-prefixed ``key=value`` metadata lines, one header row,
then data rows with floats written to 17 significant digits. JSON layout:
a single object ``{"meta": {...}, "columns": {...}}``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def format_complex(value: complex) -> str:
    """Render ``value`` in the ``a+bi`` literal grammar accepted by the CLI."""
    z = complex(value)
    if z.imag == 0.0:
        return format_float(z.real)
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{format_float(z.real)}{sign}{format_float(abs(z.imag))}i"


def format_value(value: Any) -> str:
    """Text form of a metadata value or table cell."""
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return format_complex(value)
    if isinstance(value, (tuple, list)):
        return ":".join(format_value(v) for v in value)
    return str(value)


def _json_value(value: Any) -> Any:
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (complex, np.complexfloating)):
        return format_complex(value)
    if isinstance(value, (tuple, list)):
        return format_value(value)
    return str(value)


@dataclass
class ScanTable:
    """Ordered named columns of equal length plus a metadata block."""

    columns: dict[str, np.ndarray]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cols = {name: np.asarray(values) for name, values in self.columns.items()}
        lengths = {len(v) for v in cols.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths: {sorted(lengths)}")
        self.columns = cols

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, value in self.meta.items():
            buf.write(f"# {key}={format_value(value)}\n")
        buf.write(",".join(self.names) + "\n")
        cols = [self.columns[n] for n in self.names]
        for row in zip(*cols):
            buf.write(",".join(format_value(v) for v in row) + "\n")
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "meta": {k: _json_value(v) for k, v in self.meta.items()},
            "columns": {n: [_json_value(v) for v in c] for n, c in self.columns.items()},
        }
        return json.dumps(payload, indent=2) + "\n"

    def write(self, path: str | Path, fmt: str = "csv") -> Path:
        if fmt not in ("csv", "json"):
            raise ValueError(f"unknown format {fmt!r}")
        path = Path(path)
        text = self.to_csv() if fmt == "csv" else self.to_json()
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        path.write_text(text, encoding="utf-8")
        return path
