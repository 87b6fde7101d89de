"""Oil price main loop with expectation multipliers, plus the two scenarios.

The price is a single stock driven by a linear law in the effective
supply/demand ratio::

    dOilPrice/dt = alpha1 * Ratio + beta1
    Ratio        = (ExS / ExD) * (TOS / TOD)

ExS and ExD scale expected supply and demand. They are exogenous paths
(lookup tables over time) times a level, with ExS additionally discounted
after a supply shock while speculation builds up.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .calibrate import DAYS_PER_QUARTER
from .integrate import IntegratorKind, Trajectory, simulate
from .modelfmt import Action, ScenarioDoc, ScenarioEvent, format_number, parse_model
from .scenario import apply_scenario
from .sdcore import Model, TimeGrid

# Coefficients of the bundled synthetic calibration dataset, per quarter.
FIXTURE_ALPHA_PER_QUARTER = -50.0
FIXTURE_BETA_PER_QUARTER = 51.45

# Supply growth that takes Scenario A from $100 to $99.16 in 43 days with the
# default parameters; reproduced by tune_supply_growth().
SCENARIO_A_SUPPLY_GROWTH = 0.00020515934161353898
SCENARIO_A_TARGET = 99.16
SCENARIO_A_HORIZON = 43.0
SCENARIO_B_HORIZON = 120.0


def data_path(name: str) -> Path:
    """Path of a bundled fixture file."""
    return Path(str(resources.files("stockflow") / "data" / name))


class MarketError(ValueError):
    pass


@dataclass(frozen=True)
class OilMarketParams:
    """Parameters of the oil price model. Times are in days.

    ``alpha1``/``beta1`` are per day. ``ExS_path``/``ExD_path`` are
    ((t, multiplier), ...) tables, held constant outside their range.
    ``upset_magnitude`` is the fraction of ``base_TOS`` lost in an upset.
    """

    alpha1: float = FIXTURE_ALPHA_PER_QUARTER / DAYS_PER_QUARTER
    beta1: float = FIXTURE_BETA_PER_QUARTER / DAYS_PER_QUARTER
    initial_price: float = 100.0
    base_TOD: float = 90.0
    base_TOS: float = 95.4
    supply_growth: float = 0.0
    ExS_level: float = 1.0
    ExD_level: float = 1.0
    ExS_path: tuple = ((0.0, 1.0),)
    ExD_path: tuple = ((0.0, 1.0),)
    upset_time: float = 20.0
    upset_magnitude: float = 0.1
    speculation_depth: float = 0.03
    speculation_ramp: float = 5.0
    meeting_delay: float = 10.0
    spare_lag: float = 15.0
    spare_duration: float = 90.0

    def __post_init__(self):
        if not (self.base_TOD > 0 and self.base_TOS > 0):
            raise MarketError("base_TOD and base_TOS must be positive")
        if not (self.ExS_level > 0 and self.ExD_level > 0):
            raise MarketError("expectation multipliers must be positive")
        for name in ("ExS_path", "ExD_path"):
            pts = getattr(self, name)
            if not pts or any(m <= 0 for _, m in pts):
                raise MarketError(f"{name} must be a non-empty table of positive multipliers")
        if self.spare_duration < 0 or self.spare_lag < 0 or self.meeting_delay < 0:
            raise MarketError("spare_duration, spare_lag and meeting_delay must be >= 0")
        if not 0 <= self.speculation_depth < 1:
            raise MarketError("speculation_depth must be in [0, 1)")
        if self.speculation_ramp <= 0:
            raise MarketError("speculation_ramp must be > 0")


def effective_ratio(TOS: float, TOD: float, ExS: float, ExD: float) -> float:
    """Expected supply over expected demand, (ExS * TOS) / (ExD * TOD).

    Evaluated as (ExS / ExD) * (TOS / TOD), the same arithmetic the model
    uses, so a common factor on both multipliers cancels exactly when they
    are equal.
    """
    if not TOD * ExD > 0:
        raise MarketError(f"expected demand must be positive, got TOD={TOD!r}, ExD={ExD!r}")
    return ExS / ExD * (TOS / TOD)


def _table(points) -> str:
    return "[" + ", ".join(f"({format_number(x)}, {format_number(y)})" for x, y in points) + "]"


def oil_model_text(p: OilMarketParams = OilMarketParams()) -> str:
    f = format_number
    return f"""\
# Oil price main loop. Times in days, prices in USD/bbl.
const alpha1 = {f(p.alpha1)}            # USD/day per unit of ratio
const beta1 = {f(p.beta1)}              # USD/day
const initial_price = {f(p.initial_price)}
const base_TOS = {f(p.base_TOS)}
const base_TOD = {f(p.base_TOD)}
const supply_growth = {f(p.supply_growth)}     # fraction of base_TOS per day
const start_time = 0
const ExS_level = {f(p.ExS_level)}
const ExD_level = {f(p.ExD_level)}
const supply_shock = 0          # change in supply; an upset steps it down
const demand_shift = 0
const spec_depth = {f(p.speculation_depth)}     # discount on expected supply once speculation has built up
const spec_ramp = {f(p.speculation_ramp)}       # days for speculation to build up
const OPECDecision = 0          # 1: release spare capacity
const spare_order = 0           # spare supply ordered at the meeting

lookup ExS_path = {_table(p.ExS_path)}
lookup ExD_path = {_table(p.ExD_path)}

stock OilPrice = initial_price {{ in: dPrice }}
stock ShockAge = 0 {{ in: shock_clock }}    # days since supply fell below plan

flow dPrice = alpha1 * Ratio + beta1
flow shock_clock = select(supply_shock < 0, 1, 0)

aux TOS = base_TOS * (1 + supply_growth * (t - start_time)) + supply_shock + SpareSupply
aux TOD = base_TOD + demand_shift
aux ExS = ExS_level * ExS_path(t) * (1 - spec_depth * clamp(ShockAge / spec_ramp, 0, 1))
aux ExD = ExD_level * ExD_path(t)
aux Ratio = ExS / ExD * (TOS / TOD)

delay SpareSupply = OPECDecision * spare_order by {f(p.spare_lag)}
"""


def build_oil_model(p: OilMarketParams = OilMarketParams()) -> Model:
    return parse_model(oil_model_text(p), "<oilmarket>")


def scenario_a(p: OilMarketParams = OilMarketParams(), supply_growth: float | None = None):
    """Neutral month: no events, slowly growing supply, flat demand.

    Returns (ScenarioDoc, TimeGrid). ``supply_growth`` defaults to the
    tuned value for the default parameters.
    """
    g = SCENARIO_A_SUPPLY_GROWTH if supply_growth is None else supply_growth
    grid = TimeGrid(SCENARIO_A_HORIZON)
    doc = ScenarioDoc(
        model_ref="oilmarket.sfm",
        grid=(("horizon", grid.horizon),),
        params=(("supply_growth", g),),
    )
    return doc, grid


def scenario_b(p: OilMarketParams = OilMarketParams(), decision: int = 1):
    """Supply upset, delayed producer meeting, and the meeting's decision.

    At ``upset_time`` supply drops by ``upset_magnitude * base_TOS`` and
    speculation starts discounting expected supply. At the meeting the
    decision switch is set; with ``decision=1`` the lost volume is ordered
    from spare capacity for ``spare_duration`` days and arrives after the
    model's ``spare_lag`` delay.
    """
    if decision not in (0, 1):
        raise MarketError("decision must be 0 or 1")
    grid = TimeGrid(SCENARIO_B_HORIZON)
    meeting = p.upset_time + p.meeting_delay
    if not grid.t0 <= p.upset_time <= grid.t0 + grid.horizon:
        raise MarketError("upset_time must lie within the horizon")
    grid.step_of(p.upset_time)
    grid.step_of(meeting)
    lost = float(f"{p.upset_magnitude * p.base_TOS:.12g}")  # drop float noise, e.g. 9.540000000000001
    events = (
        ScenarioEvent(p.upset_time, Action.STEP_INPUT, "supply_shock", -lost),
        ScenarioEvent(meeting, Action.SWITCH_DECISION, "OPECDecision", float(decision)),
        ScenarioEvent(meeting, Action.PULSE_INPUT, "spare_order", lost, p.spare_duration),
    )
    doc = ScenarioDoc(model_ref="oilmarket.sfm", grid=(("horizon", grid.horizon),), events=events)
    return doc, grid


def check_price(traj: Trajectory, name: str = "OilPrice") -> None:
    """Warn if the simulated price went negative (no floor is imposed)."""
    if name in traj.series and np.min(traj[name]) < 0:
        warnings.warn(f"{name} fell below zero (min {np.min(traj[name]):.4g})", RuntimeWarning, stacklevel=2)


def run(p: OilMarketParams, doc: ScenarioDoc, kind=IntegratorKind.RK4, dt: float | None = None,
        record="all") -> Trajectory:
    """Build the model for ``p``, apply ``doc`` and simulate."""
    model, grid, events = apply_scenario(build_oil_model(p), doc, dt_internal=dt)
    traj = simulate(model, grid, kind, record, events)
    check_price(traj)
    return traj


def tune_supply_growth(p: OilMarketParams = OilMarketParams(), target: float = SCENARIO_A_TARGET,
                       horizon: float = SCENARIO_A_HORIZON, kind=IntegratorKind.RK4) -> float:
    """Supply growth rate that makes the price reach ``target`` at ``horizon``.

    The final price is affine in the growth rate (the ratio is linear in
    it and the price law is linear in the ratio) for both integrators, so
    two runs determine it.
    """
    doc = ScenarioDoc(grid=(("horizon", horizon),))

    def final(g):
        return run(replace(p, supply_growth=g), doc, kind, record=()).final("OilPrice")

    p0, p1 = final(0.0), final(1e-3)
    return (target - p0) / ((p1 - p0) / 1e-3)
