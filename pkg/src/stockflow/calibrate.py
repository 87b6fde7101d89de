"""Price-change-rate series, least-squares price law fit and descriptive statistics.

The price law is fitted in Euler (forward difference) form: the change
rate between consecutive samples is regressed on the supply/demand ratio at
the earlier sample.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import central_moments
from .series import TimeSeries

DAYS_PER_QUARTER = 365.25 / 4


class CalibrationError(ValueError):
    pass


class StatsError(ValueError):
    pass


_QUARTER = re.compile(r"^(\d{4})\s*-?\s*Q([1-4])$", re.IGNORECASE)


def quarter_index(label: str) -> int:
    """``"2010Q1"`` -> 2010*4 + 0; raises CalibrationError on bad labels."""
    m = _QUARTER.match(label.strip())
    if not m:
        raise CalibrationError(f"bad quarter label {label!r} (expected e.g. 2010Q1)")
    return int(m.group(1)) * 4 + int(m.group(2)) - 1


@dataclass(frozen=True, eq=False)
class QuarterlySeries:
    """Aligned quarterly demand, supply and price.

    Units are carried as reported; demand and supply must share one.
    """

    labels: tuple[str, ...]
    demand: np.ndarray
    supply: np.ndarray
    price: np.ndarray
    volume_units: str = "Mb/quarter (as reported)"
    price_units: str = "USD/bbl"

    def __post_init__(self):
        arrays = [np.array(a, dtype=np.float64) for a in (self.demand, self.supply, self.price)]
        n = len(self.labels)
        if any(a.shape != (n,) for a in arrays):
            raise CalibrationError("quarter labels, demand, supply and price must have equal lengths")
        for name, a in zip(("demand", "supply", "price"), arrays):
            if not np.all(np.isfinite(a)):
                raise CalibrationError(f"{name} contains non-finite values")
        if np.any(arrays[0] <= 0) or np.any(arrays[1] <= 0):
            raise CalibrationError("demand and supply must be positive")
        idx = [quarter_index(q) for q in self.labels]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise CalibrationError("quarter labels must be strictly increasing")
        for name, a in zip(("demand", "supply", "price"), arrays):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return len(self.labels)

    def series(self, name: str) -> TimeSeries:
        units = self.price_units if name == "price" else self.volume_units
        return TimeSeries(name, getattr(self, name), 0.0, 1.0, units, "quarter", self.labels)

    @property
    def ratio(self) -> np.ndarray:
        return self.supply / self.demand


@dataclass(frozen=True)
class RegressionFit:
    """Polynomial least-squares fit; ``coefficients[j]`` multiplies x**j."""

    coefficients: tuple[float, ...]
    residual_std: float
    r_squared: float
    n: int

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def alpha(self) -> float:
        """Slope of a degree-1 fit."""
        return self.coefficients[1]

    @property
    def beta(self) -> float:
        """Intercept."""
        return self.coefficients[0]

    def predict(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=np.float64), self.coefficients)

    def per_day(self, days_per_step: float = DAYS_PER_QUARTER) -> "RegressionFit":
        """Rescale a fit of change-per-step to change-per-day."""
        return RegressionFit(tuple(c / days_per_step for c in self.coefficients),
                             self.residual_std / days_per_step, self.r_squared, self.n)


def _values(x) -> np.ndarray:
    if isinstance(x, TimeSeries):
        return x.values
    return np.asarray(x, dtype=np.float64)


def pcr_series(price: TimeSeries, dt_data: float | None = None) -> TimeSeries:
    """Forward-difference change rate (P[k+1] - P[k]) / dt, one sample shorter."""
    dt = price.dt if dt_data is None else float(dt_data)
    if dt_data is not None and not math.isclose(dt, price.dt, rel_tol=1e-12):
        raise CalibrationError(f"price is sampled every {price.dt:g} {price.time_unit}, not {dt:g}")
    if len(price) < 2:
        raise CalibrationError("need at least 2 price samples for a change rate")
    p = price.values
    units = f"{price.units}/{price.time_unit}" if price.units else ""
    labels = price.labels[:-1] if price.labels else ()
    return TimeSeries("PCR", (p[1:] - p[:-1]) / dt, price.t0, price.dt, units, price.time_unit, labels)


def integrate_pcr(p0: float, pcr: TimeSeries) -> np.ndarray:
    """Inverse of :func:`pcr_series`: Euler cumulation from ``p0``."""
    out = np.empty(len(pcr) + 1)
    out[0] = p0
    for k, rate in enumerate(pcr.values):
        out[k + 1] = out[k] + pcr.dt * rate
    return out


def ols_fit(x, y, degree: int = 1) -> RegressionFit:
    """Least-squares polynomial of ``degree`` through (x, y).

    Normal equations are solved in the standardized variable
    u = (x - mean) / std and mapped back to powers of x.
    """
    xv, yv = _values(x), _values(y)
    n = xv.shape[0]
    if degree < 0:
        raise CalibrationError("degree must be >= 0")
    if yv.shape != (n,):
        raise CalibrationError(f"x and y lengths differ ({n} vs {yv.shape[0]})")
    if n < degree + 2:
        raise CalibrationError(f"need at least {degree + 2} points for a degree-{degree} fit, got {n}")
    if not (np.all(np.isfinite(xv)) and np.all(np.isfinite(yv))):
        raise CalibrationError("x and y must be finite")
    center = xv.mean()
    scale = xv.std()
    if degree > 0 and (scale == 0.0 or np.all(xv == xv[0])):
        raise CalibrationError("regressor has zero variance")
    if degree > 0 and len(np.unique(xv)) <= degree:
        raise CalibrationError(f"rank deficient: {len(np.unique(xv))} distinct x values for degree {degree}")
    u = (xv - center) / scale if degree > 0 else np.zeros(n)
    basis = np.vander(u, degree + 1, increasing=True)
    gram = basis.T @ basis
    if np.linalg.cond(gram) > 1e12:
        raise CalibrationError("rank deficient normal equations")
    cu = np.linalg.solve(gram, basis.T @ yv)
    if degree > 0:
        poly = np.polynomial.Polynomial(cu)(np.polynomial.Polynomial([-center / scale, 1.0 / scale]))
        coef = np.zeros(degree + 1)
        coef[: len(poly.coef)] = poly.coef
    else:
        coef = cu
    resid = yv - basis @ cu
    ss_res = float(resid @ resid)
    dev = yv - yv.mean()
    ss_tot = float(dev @ dev)
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-24 * max(1.0, float(yv @ yv)) else float("nan")
    return RegressionFit(tuple(float(c) for c in coef), math.sqrt(ss_res / (n - degree - 1)), r2, n)


# ---------------------------------------------------------------------------
# Descriptive statistics

STAT_ROWS = ("Min", "Max", "Mean", "Median", "STD", "Kurtosis", "Skewness")


@dataclass(frozen=True)
class StatsRow:
    """Summary of one column.

    ``std`` uses the n-1 divisor; ``skewness`` is the adjusted
    Fisher-Pearson G1 and ``kurtosis`` the sample-corrected excess kurtosis
    G2. Fields that cannot be computed are None and explained in
    ``undefined``.
    """

    n: int
    min: float | None
    max: float | None
    mean: float | None
    median: float | None
    std: float | None
    kurtosis: float | None
    skewness: float | None
    undefined: dict = field(default_factory=dict, compare=False)

    def get(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise StatsError(f"{name} undefined: {self.undefined[name]}")
        return value

    def as_table_column(self) -> list[float | None]:
        return [self.min, self.max, self.mean, self.median, self.std, self.kurtosis, self.skewness]


def descriptive_stats(series) -> StatsRow:
    x = _values(series)
    n = x.shape[0]
    undefined = {}
    if n == 0:
        reason = "empty series"
        return StatsRow(0, None, None, None, None, None, None, None,
                        {k: reason for k in ("min", "max", "mean", "median", "std", "kurtosis", "skewness")})
    if not np.all(np.isfinite(x)):
        raise StatsError("series contains non-finite values")
    mean, s2, s3, s4 = central_moments(np.ascontiguousarray(x))
    std = skew = kurt = None
    if n >= 2:
        std = math.sqrt(s2 / (n - 1))
    else:
        undefined["std"] = "needs at least 2 values"
    zero_var = s2 == 0.0
    if n < 3:
        undefined["skewness"] = "needs at least 3 values"
    elif zero_var:
        undefined["skewness"] = "zero variance"
    else:
        m2, m3 = s2 / n, s3 / n
        skew = math.sqrt(n * (n - 1)) / (n - 2) * (m3 / m2 ** 1.5)
    if n < 4:
        undefined["kurtosis"] = "needs at least 4 values"
    elif zero_var:
        undefined["kurtosis"] = "zero variance"
    else:
        m2, m4 = s2 / n, s4 / n
        g2 = m4 / (m2 * m2) - 3.0
        kurt = (n - 1) / ((n - 2) * (n - 3)) * ((n + 1) * g2 + 6.0)
    return StatsRow(n, float(x.min()), float(x.max()), float(mean), float(np.median(x)), std, kurt, skew, undefined)


# ---------------------------------------------------------------------------
# Price law


def calibrate_price_law(data: QuarterlySeries) -> RegressionFit:
    """Fit PCR = alpha * supply/demand + beta on quarterly data.

    PCR is in price units per quarter; see :meth:`RegressionFit.per_day`.
    """
    if len(data) < 3:
        raise CalibrationError(f"need >= 3 quarters, got {len(data)}")
    pcr = pcr_series(data.series("price"))
    return ols_fit(data.ratio[:-1], pcr, 1)


def table_one(data: QuarterlySeries) -> dict[str, StatsRow]:
    """Statistics for demand, supply, ratio, price and PCR columns."""
    return {
        "Total Demand": descriptive_stats(data.demand),
        "Total Supply": descriptive_stats(data.supply),
        "Supply to Demand Ratio": descriptive_stats(data.ratio),
        "Price": descriptive_stats(data.price),
        "Price Change Rate": descriptive_stats(pcr_series(data.series("price"))),
    }


def stats_table_rows(columns: dict[str, StatsRow]) -> list[list[str]]:
    """Rows for a CSV laid out like a statistics table: one row per statistic."""
    rows = [["statistic", *columns]]
    values = {name: row.as_table_column() for name, row in columns.items()}
    for i, label in enumerate(STAT_ROWS):
        rows.append([label, *("" if values[c][i] is None else repr(values[c][i]) for c in columns)])
    return rows


def fit_rows(fit: RegressionFit, labels: Sequence[str] = ("beta1", "alpha1")) -> list[list[str]]:
    rows = [["parameter", "value"]]
    for j, c in enumerate(fit.coefficients):
        rows.append([labels[j] if j < len(labels) else f"c{j}", repr(c)])
    rows += [["r_squared", repr(fit.r_squared)], ["residual_std", repr(fit.residual_std)], ["samples", str(fit.n)]]
    return rows
