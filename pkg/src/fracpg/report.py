"""Convergence-report rows, pairwise rate computation, and CSV/Markdown output.

A report is a flat, ordered list of rows, one per study cell.  The CSV
serialization is the machine contract (full-precision, round-trips exactly);
the Markdown rendering mirrors the benchmark grids, one table per problem,
with three-significant-digit cells and the observed mean rate next to the
expected one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "CSV_HEADER",
    "VALID_MODES",
    "ReportRow",
    "ConvergenceReport",
    "pairwise_rates",
    "emit_report",
    "parse_report",
]

CSV_HEADER = ("mode", "case", "alpha", "K", "h", "err_l2", "err_aux", "rate")
VALID_MODES = ("ode", "pde1d", "pde2d", "infsup")


@dataclass(frozen=True)
class ReportRow:
    """One study cell: the two error numbers for one (problem, alpha, K)."""

    mode: str
    case: str
    alpha: float
    n_steps: int
    spacing: Optional[float]
    err_l2: float
    err_aux: float
    rate: Optional[float]

    def __post_init__(self) -> None:
        if self.mode not in VALID_MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {VALID_MODES}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"fractional order must lie strictly in (0, 1), got {self.alpha}")
        if self.n_steps < 1:
            raise ValueError(f"step count must be positive, got {self.n_steps}")
        if self.spacing is not None and not self.spacing > 0.0:
            raise ValueError(f"mesh spacing must be positive, got {self.spacing}")
        for label, value in (("err_l2", self.err_l2), ("err_aux", self.err_aux)):
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"{label} must be finite and nonnegative, got {value}")
        if self.rate is not None and not math.isfinite(self.rate):
            raise ValueError(f"rate must be finite when present, got {self.rate}")

    def group_key(self) -> Tuple[str, str, float]:
        return (self.mode, self.case, self.alpha)


@dataclass(frozen=True)
class ConvergenceReport:
    """Ordered collection of study rows with per-group rate summaries."""

    rows: Tuple[ReportRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))

    def groups(self) -> List[Tuple[Tuple[str, str, float], List[ReportRow]]]:
        """Rows bucketed by (mode, case, alpha), preserving first-seen order."""
        buckets: Dict[Tuple[str, str, float], List[ReportRow]] = {}
        for row in self.rows:
            buckets.setdefault(row.group_key(), []).append(row)
        return list(buckets.items())

    def mean_rate(self, mode: str, case: str, alpha: float, value: str = "l2") -> float:
        """Mean pairwise halving rate of one error column within one group."""
        errors = [
            getattr(row, "err_l2" if value == "l2" else "err_aux")
            for row in self.rows
            if row.group_key() == (mode, case, alpha)
        ]
        return pairwise_rates(errors)[1]


def pairwise_rates(errors: Sequence[float]) -> Tuple[np.ndarray, float]:
    """Per-pair halving rates log2(e_i / e_{i+1}) and their mean.

    Every error must be strictly positive and there must be at least two of
    them for a rate to exist.
    """
    values = np.asarray(errors, dtype=float)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("need at least two errors to compute rates")
    if not np.all(values > 0.0):
        raise ValueError("errors must be strictly positive to compute rates")
    rates = np.log2(values[:-1] / values[1:])
    return rates, float(np.mean(rates))


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest form that parses back to the same float
    return str(value)


def emit_report(
    report: ConvergenceReport, format: str = "csv", path: Optional[str] = None
) -> str:
    """Serialize a report; optionally write it to ``path``.

    ``csv`` keeps full precision and round-trips through
    :func:`parse_report`; ``markdown`` renders benchmark-style tables with
    three significant digits.
    """
    if format == "csv":
        text = _emit_csv(report)
    elif format == "markdown":
        text = emit_markdown(report)
    else:
        raise ValueError(f"unknown report format {format!r}; expected csv or markdown")
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc}") from exc
    return text


def _emit_csv(report: ConvergenceReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in report.rows:
        writer.writerow(
            [
                row.mode,
                row.case,
                _format_cell(row.alpha),
                row.n_steps,
                _format_cell(row.spacing),
                _format_cell(row.err_l2),
                _format_cell(row.err_aux),
                _format_cell(row.rate),
            ]
        )
    return buffer.getvalue()


def parse_report(text: str) -> ConvergenceReport:
    """Inverse of CSV :func:`emit_report`."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise ValueError("empty report text") from None
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header!r}; expected {CSV_HEADER!r}")
    rows = []
    for record in reader:
        if not record:
            continue
        if len(record) != len(CSV_HEADER):
            raise ValueError(f"row has {len(record)} fields, expected {len(CSV_HEADER)}")
        rows.append(
            ReportRow(
                mode=record[0],
                case=record[1],
                alpha=float(record[2]),
                n_steps=int(record[3]),
                spacing=float(record[4]) if record[4] else None,
                err_l2=float(record[5]),
                err_aux=float(record[6]),
                rate=float(record[7]) if record[7] else None,
            )
        )
    return ConvergenceReport(tuple(rows))


_VALUE_FIELDS = {"l2": "err_l2", "aux": "err_aux"}

_VALUE_TITLES = {
    "ode": {"l2": "relative L2(0,T) error", "aux": "relative fractional-energy error"},
    "pde1d": {"l2": "relative L2 error over the cylinder", "aux": "relative final-time error"},
    "pde2d": {"l2": "relative L2 error over the cylinder", "aux": "relative final-time error"},
    "infsup": {"l2": "stability constant", "aux": ""},
}


def emit_markdown(
    report: ConvergenceReport,
    value: str = "l2",
    theory: Optional[Dict[Tuple[str, str, float], Optional[float]]] = None,
) -> str:
    """Benchmark-style Markdown: one table per problem, one row per alpha.

    ``value`` selects which error column fills the grid; ``theory`` maps
    (mode, case, alpha) to the expected rate shown in parentheses (a dash
    when absent).
    """
    if value not in _VALUE_FIELDS:
        raise ValueError(f"unknown value column {value!r}; expected l2 or aux")
    field = _VALUE_FIELDS[value]
    theory = theory or {}

    sections: Dict[Tuple[str, str], Dict[float, List[ReportRow]]] = {}
    for row in report.rows:
        sections.setdefault((row.mode, row.case), {}).setdefault(row.alpha, []).append(row)

    blocks = []
    for (mode, case), by_alpha in sections.items():
        step_lists = [tuple(r.n_steps for r in rows) for rows in by_alpha.values()]
        steps = max(step_lists, key=len)
        title = f"## {mode}" + (f" case {case}" if case else "")
        subtitle = _VALUE_TITLES.get(mode, {}).get(value, "")
        if subtitle:
            title += f" — {subtitle}"
        header = "| alpha | " + " | ".join(f"K={k}" for k in steps)
        divider = "|---" * (len(steps) + 1) + "|"
        show_rate = mode != "infsup"
        if show_rate:
            header += " | rate |"
            divider += "---|"
        else:
            header += " |"
        lines = [title, "", header, divider]
        for alpha, rows in by_alpha.items():
            cells = [f"| {alpha:g} "]
            errors = []
            for step in steps:
                match = [r for r in rows if r.n_steps == step]
                if match:
                    err = getattr(match[0], field)
                    errors.append(err)
                    cells.append(f"| {err:.2e} ")
                else:
                    cells.append("| — ")
            if show_rate:
                try:
                    mean = pairwise_rates(errors)[1]
                    rate_text = f"{mean:.2f}"
                except ValueError:
                    rate_text = "—"
                expected = theory.get((mode, case, alpha))
                rate_text += f" ({expected:.2f})" if expected is not None else " (—)"
                cells.append(f"| {rate_text} |")
            else:
                cells.append("|")
            lines.append("".join(cells))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
