"""CSV ingestion and writing, and simulated-vs-reference comparison."""
from __future__ import annotations

import csv
import datetime as _dt
import io
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calibrate import QuarterlySeries, quarter_index
from .series import TimeSeries


class CsvError(ValueError):
    pass


QUARTER_LABEL = re.compile(r"^\d{4}\s*-?\s*Q\d$", re.IGNORECASE)

SCHEMAS = {
    "daily-price": ("date", "price"),
    "quarterly-sdp": ("quarter", "demand", "supply", "price"),
}


@dataclass(frozen=True)
class CsvTable:
    """Rectangular CSV contents. Columns are float arrays, or str tuples for dates."""

    header: tuple[str, ...]
    columns: dict

    @property
    def rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def numeric(self, name: str) -> np.ndarray:
        col = self.columns[name]
        if not isinstance(col, np.ndarray):
            raise CsvError(f"column '{name}' is not numeric")
        return col


def _parse_date(text: str, row: int) -> _dt.date:
    try:
        return _dt.date.fromisoformat(text.strip())
    except ValueError:
        raise CsvError(f"row {row}: bad ISO-8601 date {text!r}") from None


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CsvError(f"row {row}: column '{col}' value {text!r} is not a number") from None
    if not math.isfinite(value):
        raise CsvError(f"row {row}: column '{col}' value {text!r} is not finite")
    return value


def _read_rows(path, default_header=None) -> tuple[list[str], list[list[str]], int]:
    """Header, body rows and the file row number of the first body row.

    With ``default_header``, a file whose first row is already data (its
    first cell is not one of the header names) is read without a header.
    """
    text = Path(path).read_text(encoding="utf-8")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise CsvError(f"{path}: empty input")
    first = rows[0][0].strip().lower()
    if default_header is not None and first not in {h.lower() for h in default_header}:
        header, body, start = list(default_header), rows, 1
    else:
        header, body, start = [h.strip() for h in rows[0]], rows[1:], 2
    if not body:
        raise CsvError(f"{path}: no data rows")
    for i, r in enumerate(body, start=start):
        if len(r) != len(header):
            raise CsvError(f"row {i}: expected {len(header)} fields, got {len(r)}")
        if any(not c.strip() for c in r):
            raise CsvError(f"row {i}: missing value")
    return header, body, start


def read_table(path) -> CsvTable:
    """Read a CSV whose first column may hold ISO dates or quarter labels; other columns must be numeric."""
    header, body, start = _read_rows(path)
    columns: dict = {}
    for j, name in enumerate(header):
        cells = [r[j].strip() for r in body]
        if j == 0 and not _looks_numeric(cells[0]) and not QUARTER_LABEL.match(cells[0]):
            dates = [_parse_date(c, i) for i, c in enumerate(cells, start=start)]
            for i in range(1, len(dates)):
                if dates[i] <= dates[i - 1]:
                    raise CsvError(f"row {i + start}: date {dates[i]} is not after {dates[i - 1]}")
            columns[name] = tuple(d.isoformat() for d in dates)
        elif j == 0 and not _looks_numeric(cells[0]):
            columns[name] = tuple(cells)
        else:
            columns[name] = np.array([_parse_float(c, i, name) for i, c in enumerate(cells, start=start)])
    return CsvTable(tuple(header), columns)


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def ingest_csv(path, schema: str):
    """Load ``daily-price`` (``date,price``) or ``quarterly-sdp``
    (``quarter,demand,supply,price``) data. The header row is optional.

    Daily prices come back as a TimeSeries indexed by row with the ISO dates
    in ``labels``; quarterly data as a QuarterlySeries. Dates must increase
    strictly, quarters must be consecutive and no value may be missing.
    """
    if schema not in SCHEMAS:
        raise ValueError(f"unknown schema {schema!r}")
    header, body, start = _read_rows(path, SCHEMAS[schema])
    lower = [h.lower() for h in header]
    if schema == "daily-price":
        if lower[:2] != ["date", "price"]:
            raise CsvError(f"{path}: expected header 'date,price', got {','.join(header)}")
        dates = []
        for i, r in enumerate(body, start=start):
            d = _parse_date(r[0], i)
            if dates and d <= dates[-1]:
                raise CsvError(f"row {i}: date {d} is not after {dates[-1]}")
            dates.append(d)
        prices = [_parse_float(r[1], i, "price") for i, r in enumerate(body, start=start)]
        return TimeSeries("price", prices, 0.0, 1.0, "USD/bbl", "trading day", tuple(d.isoformat() for d in dates))
    if schema == "quarterly-sdp":
        if lower[:4] != ["quarter", "demand", "supply", "price"]:
            raise CsvError(f"{path}: expected header 'quarter,demand,supply,price', got {','.join(header)}")
        labels = []
        prev = None
        for i, r in enumerate(body, start=start):
            try:
                q = quarter_index(r[0])
            except ValueError as exc:
                raise CsvError(f"row {i}: {exc}") from None
            if prev is not None and q <= prev:
                raise CsvError(f"row {i}: quarter {r[0].strip()} is not after the previous one")
            if prev is not None and q != prev + 1:
                raise CsvError(f"row {i}: gap before quarter {r[0].strip()}")
            prev = q
            labels.append(r[0].strip())
        cols = [[_parse_float(r[j], i, header[j]) for i, r in enumerate(body, start=start)] for j in (1, 2, 3)]
        return QuarterlySeries(tuple(labels), *cols)


def day_offsets(series: TimeSeries) -> np.ndarray:
    """Days since the first label for a date-labelled series."""
    dates = [_dt.date.fromisoformat(d) for d in series.labels]
    return np.array([(d - dates[0]).days for d in dates], dtype=np.float64)


def write_rows(rows, path=None) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def write_daily_csv(series: TimeSeries, path) -> None:
    write_rows([["date", "price"], *([d, repr(float(v))] for d, v in zip(series.labels, series.values))], path)


def write_quarterly_csv(data: QuarterlySeries, path) -> None:
    rows = [["quarter", "demand", "supply", "price"]]
    for q, d, s, p in zip(data.labels, data.demand, data.supply, data.price):
        rows.append([q, repr(float(d)), repr(float(s)), repr(float(p))])
    write_rows(rows, path)


def write_trajectory(traj, names, path=None) -> str:
    rows = [["t", *names]]
    cols = [traj[n] for n in names]
    for k, t in enumerate(traj.times):
        rows.append([repr(float(t)), *(repr(float(c[k])) for c in cols)])
    return write_rows(rows, path)


# ---------------------------------------------------------------------------
# Comparison


@dataclass(frozen=True)
class ComparisonReport:
    rmse: float
    max_abs_error: float
    trend_sign_agreement: float
    samples: int
    intervals: int

    def rows(self):
        return [["metric", "value"], ["rmse", repr(self.rmse)], ["max_abs_error", repr(self.max_abs_error)],
                ["trend_sign_agreement", repr(self.trend_sign_agreement)], ["samples", str(self.samples)],
                ["intervals", str(self.intervals)]]

    def summary(self) -> str:
        return (f"{self.samples} samples: RMSE {self.rmse:.6g}, max |error| {self.max_abs_error:.6g}, "
                f"trend agreement {self.trend_sign_agreement:.1%} over {self.intervals} intervals")


def _preceding(times, values, at):
    idx = np.searchsorted(times, at, side="right") - 1
    return values[idx]


def compare_series(sim_t, sim_v, ref_t, ref_v) -> ComparisonReport:
    """Compare a simulated path against reference samples.

    The reference is held at its most recent sample (step interpolation) on
    the simulation grid, over the overlapping time range, for the error
    metrics. Trend agreement is the fraction of consecutive reference
    intervals over which both series change with the same sign.
    """
    sim_t, sim_v = np.asarray(sim_t, float), np.asarray(sim_v, float)
    ref_t, ref_v = np.asarray(ref_t, float), np.asarray(ref_v, float)
    if not len(sim_t) or not len(ref_t):
        raise CsvError("both series must be non-empty")
    mask = (sim_t >= ref_t[0]) & (sim_t <= ref_t[-1])
    if not mask.any():
        raise CsvError(f"time ranges do not overlap: simulation [{sim_t[0]:g}, {sim_t[-1]:g}], "
                       f"reference [{ref_t[0]:g}, {ref_t[-1]:g}]")
    ref_on_grid = _preceding(ref_t, ref_v, sim_t[mask])
    err = sim_v[mask] - ref_on_grid
    inside = (ref_t >= sim_t[0]) & (ref_t <= sim_t[-1])
    rt, rv = ref_t[inside], ref_v[inside]
    if len(rt) >= 2:
        sim_at = _preceding(sim_t, sim_v, rt)
        agree = np.sign(np.diff(sim_at)) == np.sign(np.diff(rv))
        agreement = float(np.mean(agree))
    else:
        agreement = float("nan")
    return ComparisonReport(
        rmse=float(np.sqrt(np.mean(err * err))),
        max_abs_error=float(np.max(np.abs(err))),
        trend_sign_agreement=agreement,
        samples=int(mask.sum()),
        intervals=max(0, len(rt) - 1),
    )
