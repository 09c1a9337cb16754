"""Column-labelled result tables and their CSV/JSON serialisation."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

from .errors import DomainError, ReportIOError

FORMATS = ("csv", "json")


@dataclass
class SweepReport:
    """Rows of cells under ``columns``; ``None`` marks an absent value.

    NaN and infinite cells are rejected: failures belong in a status column.
    """

    columns: list[str]
    rows: list[list[Any]]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(set(self.columns)) != len(self.columns):
            raise DomainError("duplicate column names")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise DomainError(f"row {i} has {len(row)} cells, expected {len(self.columns)}")
            for c, v in zip(self.columns, row):
                if isinstance(v, float) and not math.isfinite(v):
                    raise DomainError(f"row {i}, column '{c}': non-finite value {v!r}")

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[Any]:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def records(self) -> list[dict[str, Any]]:
        return [dict(zip(self.columns, r)) for r in self.rows]


def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_json(report: SweepReport) -> str:
    return json.dumps({"meta": report.meta, "rows": report.records()}, indent=2, allow_nan=False) + "\n"


def render(report: SweepReport, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(report)
    if fmt == "json":
        return to_json(report)
    raise DomainError(f"format must be one of {FORMATS}, got {fmt!r}")


def emit_report(report: SweepReport, path: Union[str, Path], fmt: str = "csv") -> Path:
    """Write ``report`` to ``path``; identical reports give identical bytes."""
    text = render(report, fmt)
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return path


def parse_csv_cell(text: str) -> Any:
    """Inverse of the CSV cell encoding for numeric and empty cells."""
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(path: Union[str, Path]) -> tuple[list[str], list[list[Any]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        return [], []
    return rows[0], [[parse_csv_cell(c) for c in r] for r in rows[1:]]
