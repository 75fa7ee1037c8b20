"""Per-iteration diagnostics and their CSV form.

The CSV has the fixed header ``k,F,residual,lyapunov,step_norm_sq,staleness``.
Floats are written with :func:`repr` (shortest round-trippable decimal),
missing values as empty fields; quoting follows the :mod:`csv` defaults,
which are RFC 4180 compliant.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ContractError

__all__ = ["TRACE_HEADER", "TraceRecord", "Trace", "write_trace_csv", "read_trace_csv"]

TRACE_HEADER = ("k", "F", "residual", "lyapunov", "step_norm_sq", "staleness")


@dataclass
class TraceRecord:
    k: int
    F: float
    residual: Optional[float] = None
    lyapunov: Optional[float] = None
    step_norm_sq: Optional[float] = None
    staleness: Optional[int] = None


@dataclass
class Trace:
    records: List[TraceRecord] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, record: TraceRecord):
        if self.records and record.k <= self.records[-1].k:
            raise ContractError(
                f"trace iterations must increase: {record.k} after {self.records[-1].k}")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name: str) -> np.ndarray:
        """One column as a float array; missing values become ``nan``."""
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    @property
    def k(self) -> np.ndarray:
        return np.array([r.k for r in self.records], dtype=np.int64)

    @property
    def F(self) -> np.ndarray:
        return self.column("F")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def _parse_float(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def _parse_int(text: str) -> Optional[int]:
    return None if text == "" else int(text)


def write_trace_csv(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(trace_to_csv(trace))


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(TRACE_HEADER)
    for r in trace.records:
        writer.writerow([_fmt(getattr(r, name)) for name in TRACE_HEADER])
    return buf.getvalue()


def read_trace_csv(path) -> Trace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != TRACE_HEADER:
            raise ContractError(f"{path}: unexpected trace header {header!r}")
        trace = Trace(meta={"source": str(path)})
        for row in reader:
            if not row:
                continue
            k, F, res, lyap, step, stale = row
            trace.append(TraceRecord(
                k=int(k), F=float(F), residual=_parse_float(res), lyapunov=_parse_float(lyap),
                step_norm_sq=_parse_float(step), staleness=_parse_int(stale)))
    return trace
