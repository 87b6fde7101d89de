"""Apply scenario overlays to models and run them."""
from __future__ import annotations

import dataclasses
from pathlib import Path

from .errors import Diagnostic, GridError, ModelError
from .integrate import IntegratorKind, ScheduledEvent, Trajectory, simulate
from .modelfmt import Action, ScenarioDoc, parse_model, parse_scenario
from .sdcore import Model, TimeGrid, steps_in


def resolve_grid(doc: ScenarioDoc, base: TimeGrid | None = None, **overrides) -> TimeGrid:
    """Grid from ``base`` (or defaults), then the scenario's settings, then ``overrides``."""
    fields = dataclasses.asdict(base) if base is not None else {}
    fields.update(doc.grid_overrides)
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if "horizon" not in fields:
        raise GridError("no horizon given: set 'grid horizon = ...' in the scenario or pass one")
    return TimeGrid(**fields)


def schedule(model: Model, doc: ScenarioDoc, grid: TimeGrid) -> list[ScheduledEvent]:
    """Translate scenario events into constant changes at grid indices.

    Unknown targets are collected into a ModelError; off-grid event times
    raise GridError. Pulse ends past the horizon are dropped.
    """
    consts = model.constant_values
    diags = [Diagnostic(f"scenario target '{e.target}' is not a constant of the model", e.span, e.target)
             for e in doc.events if e.target not in consts]
    if diags:
        raise ModelError(diags)
    out = []
    for e in doc.events:
        k = grid.step_of(e.at)
        if not 0 <= k <= grid.n_steps:
            raise GridError(f"event at t={e.at:g} is outside the simulated horizon")
        if e.action in (Action.SET_CONSTANT, Action.SWITCH_DECISION):
            out.append(ScheduledEvent(k, e.target, "set", e.value))
        else:
            out.append(ScheduledEvent(k, e.target, "add", e.value))
            if e.action is Action.PULSE_INPUT:
                end = k + steps_in(e.duration, grid.dt_internal, "pulse duration")
                if end <= grid.n_steps:
                    out.append(ScheduledEvent(end, e.target, "add", -e.value))
    return out


def apply_scenario(model: Model, doc: ScenarioDoc, grid: TimeGrid | None = None, **grid_overrides):
    """Return (model with params applied, grid, scheduled events)."""
    if doc.params:
        model = model.with_constants(doc.param_values)
    grid = resolve_grid(doc, grid, **grid_overrides)
    return model, grid, schedule(model, doc, grid)


def run_scenario(model: Model, doc: ScenarioDoc, kind=IntegratorKind.RK4, record="all",
                 grid: TimeGrid | None = None, **grid_overrides) -> Trajectory:
    model, grid, events = apply_scenario(model, doc, grid, **grid_overrides)
    return simulate(model, grid, kind, record, events)


def load_model(path) -> Model:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), str(path))


def load_scenario(path):
    """Parse a scenario file and the model it references.

    Returns (model, doc); the model path is relative to the scenario file.
    Raises ModelError if the scenario names no model.
    """
    path = Path(path)
    doc = parse_scenario(path.read_text(encoding="utf-8"), str(path))
    if doc.model_ref is None:
        raise ModelError([Diagnostic(f"scenario {path} does not name a model")])
    return load_model(path.parent / doc.model_ref), doc
