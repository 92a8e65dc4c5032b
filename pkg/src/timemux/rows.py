"""Plot-ready sweep rows and their canonical CSV form.

CSV is canonical so that reading and re-writing a file is byte-identical:
fixed header, LF line endings, floats in scientific notation with nine
significant digits, empty cells for missing values.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

from .analytic import ModelPrediction
from .montecarlo import SimResult

COLUMNS = ("n", "method", "p_herald", "herald_rate_hz", "p_single", "single_rate_hz",
           "enhancement", "ci_low", "ci_high")
METHODS = ("analytic", "mc")


@dataclass(frozen=True)
class SweepRow:
    n: int
    method: str
    p_herald: float
    herald_rate_hz: float
    p_single: float
    single_rate_hz: float
    enhancement: float | None
    ci_low: float | None = None
    ci_high: float | None = None

    def sort_key(self):
        return (self.n, METHODS.index(self.method))

    def as_dict(self) -> dict:
        return asdict(self)


def row_from_prediction(pred: ModelPrediction) -> SweepRow:
    return SweepRow(pred.n_sources, "analytic", pred.p_herald, pred.herald_rate,
                    pred.p_single, pred.single_rate, pred.enhancement)


def row_from_sim(sim: SimResult, rate_hz: float, enhancement: float | None = None) -> SweepRow:
    """MC row; the CI columns hold the Wilson interval of ``p_single``."""
    lo, hi = sim.p_single_ci
    return SweepRow(sim.n_bins, "mc", sim.p_herald_hat, sim.p_herald_hat * rate_hz,
                    sim.p_single_hat, sim.p_single_hat * rate_hz, enhancement, lo, hi)


def sort_rows(rows) -> list[SweepRow]:
    return sorted(rows, key=SweepRow.sort_key)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return f"{value:.8e}"


def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in sort_rows(rows):
        writer.writerow([_fmt(getattr(row, c)) for c in COLUMNS])
    return buf.getvalue()


def parse_csv(text: str) -> list[SweepRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != COLUMNS:
        raise ValueError(f"unexpected CSV header: {header}")
    rows = []
    for record in reader:
        values = dict(zip(COLUMNS, record))
        kwargs = {}
        for f in fields(SweepRow):
            cell = values[f.name]
            if f.name == "n":
                kwargs[f.name] = int(cell)
            elif f.name == "method":
                kwargs[f.name] = cell
            else:
                kwargs[f.name] = float(cell) if cell else None
        rows.append(SweepRow(**kwargs))
    return rows
