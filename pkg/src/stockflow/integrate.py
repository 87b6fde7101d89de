"""Fixed-step Euler and classical fourth-order Runge-Kutta integration.

``euler_step`` and ``rk4_step`` operate on :class:`~stockflow.sdcore.SimState`
through the tree-walking evaluator and serve as the reference path.
``simulate`` runs whole trajectories through the compiled kernels.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels as K
from .compiled import compile_model
from .errors import EvaluationError
from .sdcore import (
    Model,
    SimState,
    TimeGrid,
    eval_expr,
    eval_rhs,
    evaluate,
    initial_state,
    net_rates,
)
from .series import TimeSeries


class IntegratorKind(enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


@dataclass(frozen=True)
class ScheduledEvent:
    """Change to a constant applied before the evaluation at grid index ``step``.

    ``mode`` is ``"set"`` (assign ``value``) or ``"add"`` (increment by it).
    """

    step: int
    target: str
    mode: str
    value: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: TimeGrid
    series: Mapping[str, TimeSeries]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    def __getitem__(self, name: str) -> np.ndarray:
        return self.series[name].values

    def final(self, name: str) -> float:
        return float(self.series[name].values[-1])

    def columns(self) -> list[str]:
        return list(self.series)


def _advance_buffers(model: Model, state: SimState, env) -> dict:
    buffers = {}
    for name, buf in state.buffers.items():
        block = model.delay_map[name]
        value = eval_expr(block.input, env, state.t, model, name)
        if not np.isfinite(value):
            raise EvaluationError(name, "non-finite value")
        buffers[name] = buf[1:] + (value,)
    return buffers


def _checked_stocks(stocks: dict, state: SimState) -> dict:
    for name, value in stocks.items():
        if not np.isfinite(value):
            raise EvaluationError(name, "non-finite value", state.step + 1, state.t)
    return stocks


def euler_step(model: Model, state: SimState, dt: float) -> SimState:
    """One explicit Euler step: y + dt * f(t, y)."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    try:
        env = evaluate(model, state)
        rates = net_rates(model, env)
        buffers = _advance_buffers(model, state, env)
    except EvaluationError as exc:
        raise exc.at_step(state.step, state.t) from None
    stocks = {n: y + dt * rates[n] for n, y in state.stocks.items()}
    return SimState(state.t + dt, _checked_stocks(stocks, state), buffers, state.step + 1)


def rk4_step(model: Model, state: SimState, dt: float) -> SimState:
    """One classical Runge-Kutta step with weights 1, 2, 2, 1 over 6.

    Delay outputs are held at their step-start values for all four stages.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    t = state.t
    y = dict(state.stocks)
    try:
        env = evaluate(model, state)
        buffers = _advance_buffers(model, state, env)
        r1 = {n: dt * f for n, f in net_rates(model, env).items()}
        r2 = {n: dt * f for n, f in eval_rhs(model, state, {"t": t + 0.5 * dt,
                                                            **{m: y[m] + 0.5 * r1[m] for m in y}}).items()}
        r3 = {n: dt * f for n, f in eval_rhs(model, state, {"t": t + 0.5 * dt,
                                                            **{m: y[m] + 0.5 * r2[m] for m in y}}).items()}
        r4 = {n: dt * f for n, f in eval_rhs(model, state, {"t": t + dt,
                                                            **{m: y[m] + r3[m] for m in y}}).items()}
    except EvaluationError as exc:
        raise exc.at_step(state.step, t) from None
    stocks = {n: y[n] + (r1[n] + 2.0 * r2[n] + 2.0 * r3[n] + r4[n]) / 6.0 for n in y}
    return SimState(t + dt, _checked_stocks(stocks, state), buffers, state.step + 1)


STEPPERS = {IntegratorKind.EULER: euler_step, IntegratorKind.RK4: rk4_step}


def simulate_reference(model: Model, grid: TimeGrid, kind: IntegratorKind = IntegratorKind.RK4) -> dict:
    """Stock trajectories by repeated ``euler_step``/``rk4_step`` (slow, no events)."""
    step = STEPPERS[IntegratorKind(kind)]
    state = initial_state(model, grid)
    out = {n: [v] for n, v in state.stocks.items()}
    for k in range(grid.n_steps):
        state = step(model, state, grid.dt_internal)
        state = SimState(grid.time(k + 1), state.stocks, state.buffers, state.step)
        for n, v in state.stocks.items():
            out[n].append(v)
    return {n: np.array(v) for n, v in out.items()}


def simulate(
    model: Model,
    grid: TimeGrid,
    kind: IntegratorKind | str = IntegratorKind.RK4,
    record: Sequence[str] | str | None = None,
    events: Iterable[ScheduledEvent] = (),
) -> Trajectory:
    """Integrate ``model`` over ``grid``.

    Stocks are always recorded; ``record`` names extra variables, or
    ``"all"`` for every stock, constant, auxiliary, flow and delay. Events
    modify constants at grid-aligned steps; those at step 0 are applied
    before initial values are computed.
    """
    kind = IntegratorKind(kind)
    events = sorted(events, key=lambda e: e.step)
    consts = dict(model.constant_values)
    for e in events:
        if e.target not in consts:
            raise KeyError(f"event target '{e.target}' is not a constant of the model")
        if not 0 <= e.step <= grid.n_steps:
            raise ValueError(f"event step {e.step} outside the grid")
    start_events = [e for e in events if e.step == 0]
    if start_events:
        for e in start_events:
            consts[e.target] = e.value if e.mode == "set" else consts[e.target] + e.value
        model = model.with_constants(consts)
    later = [e for e in events if e.step > 0]

    if record == "all":
        names = list(model.variable_names)
    else:
        names = list(model.stock_names) + [n for n in (record or ()) if n not in model.stock_map]
    unknown = [n for n in names if n not in model.variable_names]
    if unknown:
        raise KeyError(f"cannot record unknown variable(s): {', '.join(unknown)}")

    cm = compile_model(model, grid.dt_internal)
    state = initial_state(model, grid)
    y = np.array([state.stocks[n] for n in model.stock_names], dtype=np.float64)
    vals = np.zeros(len(cm.names))
    for name, value in model.constant_values.items():
        vals[cm.const_slots[name]] = value
    ring = np.empty(cm.ring_size)
    offsets, lengths, slots = cm.delays
    for off, n, slot in zip(offsets, lengths, slots):
        ring[off:off + n] = state.buffers[cm.names[slot]][0]
    traj = np.empty((grid.n_steps + 1, len(cm.names)))
    status = np.zeros(3, dtype=np.int64)
    stack = cm.new_stack()
    method = K.EULER if kind is IntegratorKind.EULER else K.RK4

    bounds = sorted({e.step for e in later} | {grid.n_steps})
    k0 = 0
    for k1 in bounds:
        K.integrate(k0, k1, grid.t0, grid.dt_internal, method, y, vals, ring, cm.bytecode, cm.lookups,
                    cm.programs, cm.delay_programs, cm.delays, cm.stock_slots, cm.flows, stack, traj, status)
        if status[0] != K.OK:
            _raise_status(status, cm.names, grid)
        for e in later:
            if e.step == k1:
                slot = cm.const_slots[e.target]
                vals[slot] = e.value if e.mode == "set" else vals[slot] + e.value
        k0 = k1
    if any(e.step == grid.n_steps for e in later):
        K.integrate(k0, k0, grid.t0, grid.dt_internal, method, y, vals, ring, cm.bytecode, cm.lookups,
                    cm.programs, cm.delay_programs, cm.delays, cm.stock_slots, cm.flows, stack, traj, status)
        if status[0] != K.OK:
            _raise_status(status, cm.names, grid)

    series = {
        n: TimeSeries(n, traj[:, cm.slot_of[n]].copy(), grid.t0, grid.dt_internal) for n in names
    }
    return Trajectory(grid, series)


def _raise_status(status, names, grid):
    code, slot, step = (int(v) for v in status)
    reason = "division by zero" if code == K.DIV_ZERO else "non-finite value"
    raise EvaluationError(names[slot], reason, step, grid.time(step))


def estimate_lipschitz(model: Model, state: SimState, stock: str, span: float, samples: int = 21) -> float:
    """Largest |f(y') - f(y)| / |y' - y| over a uniform grid of y' in [y - span, y + span].

    Only ``stock`` is perturbed. The result is a numerical lower bound on
    the local Lipschitz constant of that stock's rate.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    if not span > 0:
        raise ValueError("span must be > 0")
    y = state.stocks[stock]
    f0 = eval_rhs(model, state)[stock]
    best = 0.0
    for y2 in np.linspace(y - span, y + span, samples):
        if y2 == y:
            continue
        f2 = eval_rhs(model, state, {stock: float(y2)})[stock]
        best = max(best, abs(f2 - f0) / abs(y2 - y))
    return best
