from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled named sequence: sample k is at ``t0 + k * dt``."""

    name: str
    values: np.ndarray
    t0: float = 0.0
    dt: float = 1.0
    units: str = ""
    time_unit: str = "day"
    labels: tuple = field(default=(), repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError(f"series '{self.name}' must be one-dimensional")
        if not self.dt > 0:
            raise ValueError(f"series '{self.name}' needs a positive spacing, got {self.dt}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.name == other.name
            and self.t0 == other.t0
            and self.dt == other.dt
            and self.units == other.units
            and self.time_unit == other.time_unit
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    def with_values(self, values, name: str | None = None, units: str | None = None) -> "TimeSeries":
        return TimeSeries(name or self.name, values, self.t0, self.dt,
                          self.units if units is None else units, self.time_unit, self.labels)
