"""Table emission: long-format CSV or column-array JSON, floats written round-trip exact."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Tuple, Union

import numpy as np

from spinlab.errors import DomainError, OutputError

FLOAT_FORMAT = "%.17g"


@dataclass
class Table:
    columns: Tuple[str, ...]
    rows: List[Tuple[Any, ...]] = field(default_factory=list)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.rows = [tuple(r) for r in self.rows]
        for r in self.rows:
            if len(r) != len(self.columns):
                raise DomainError(f"row of width {len(r)} in a table with {len(self.columns)} columns")

    @classmethod
    def of(cls, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> "Table":
        return cls(tuple(columns), [tuple(r) for r in rows])

    def column(self, name: str) -> List[Any]:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]


def _plain(v: Any) -> Any:
    """numpy scalars and Fractions to builtins; Fractions keep their exact text."""
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (complex, np.complexfloating)):
        raise DomainError("complex values are not emitted; take abs or real first")
    return v


def format_cell(v: Any) -> str:
    v = _plain(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return FLOAT_FORMAT % v
    if v is None:
        return ""
    return str(v)


def render_csv(table: Table) -> str:
    buff = io.StringIO()
    w = csv.writer(buff, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_cell(v) for v in row])
    return buff.getvalue()


def render_json(table: Table) -> str:
    data = {name: [_plain(r[k]) for r in table.rows] for k, name in enumerate(table.columns)}
    return json.dumps({"columns": list(table.columns), "data": data}, indent=1) + "\n"


def write_text(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write ({exc.strerror})", path=str(path)) from exc
    return path


def emit(table: Table, fmt: str, path: Union[str, Path]) -> Path:
    if fmt == "csv":
        return write_text(path, render_csv(table))
    if fmt == "json":
        return write_text(path, render_json(table))
    raise DomainError(f"unknown format {fmt!r}")
