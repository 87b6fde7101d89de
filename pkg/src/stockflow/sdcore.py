"""Stock-and-flow model representation and the reference expression evaluator.

A :class:`Model` is an immutable graph of stocks, flows, auxiliaries,
constants, lookup tables and pipeline delays. ``build_model`` is the only way
to obtain one; it either returns a fully validated model or raises
:class:`~stockflow.errors.ModelError` with every problem found.

The tree-walking evaluator in this module defines the semantics. The compiled
kernels in :mod:`stockflow.kernels` reproduce it operation for operation.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping, Union

from .errors import Diagnostic, EvaluationError, GridError, ModelError, SourceSpan

TIME_NAME = "t"
BUILTINS = {"min": 2, "max": 2, "clamp": 3, "select": 3}
COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")
ARITHMETIC = ("+", "-", "*", "/")


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    """Builtin (min, max, clamp, select) or lookup-table application."""

    func: str
    args: tuple
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


Expr = Union[Num, Var, Time, BinOp, Neg, Call]


def walk(expr: Expr):
    """Yield every node of an expression tree, parents first."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, BinOp):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, Call):
            stack.extend(reversed(node.args))


def references(expr: Expr) -> set[str]:
    return {n.name for n in walk(expr) if isinstance(n, Var)}


# ---------------------------------------------------------------------------
# Element definitions


@dataclass(frozen=True)
class StockDef:
    name: str
    initial: Expr
    inflows: tuple[str, ...] = ()
    outflows: tuple[str, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FlowDef:
    name: str
    expr: Expr
    units: str = field(default="", compare=False)
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class AuxDef:
    name: str
    expr: Expr
    units: str = field(default="", compare=False)
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ConstDef:
    name: str
    value: float
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class LookupDef:
    """Piecewise-linear table, clamped to the end values outside its range."""

    name: str
    points: tuple[tuple[float, float], ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    def __call__(self, x: float) -> float:
        return interpolate(self.points, x)


@dataclass(frozen=True)
class DelayBlock:
    """Pure transport delay: output(t) = input(max(t0, t - lag))."""

    name: str
    input: Expr
    lag: float
    span: SourceSpan | None = field(default=None, compare=False, repr=False)


Definition = Union[StockDef, FlowDef, AuxDef, ConstDef, LookupDef, DelayBlock]


def interpolate(points, x: float) -> float:
    x0, y0 = points[0]
    if x <= x0:
        return float(y0)
    for x1, y1 in points[1:]:
        if x == x1:
            return float(y1)
        if x < x1:
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        x0, y0 = x1, y1
    return float(y0)


# ---------------------------------------------------------------------------
# Model


def _by_name(items):
    return MappingProxyType({d.name: d for d in items})


@dataclass(frozen=True)
class Model:
    """Validated, immutable stock/flow graph.

    Element tuples are sorted by name. ``order`` lists the auxiliaries, flows
    and zero-lag delays in evaluation order; ``init_order`` additionally
    includes lagged delays, treated as pass-through at the start time.
    """

    stocks: tuple[StockDef, ...] = ()
    flows: tuple[FlowDef, ...] = ()
    auxes: tuple[AuxDef, ...] = ()
    constants: tuple[ConstDef, ...] = ()
    lookups: tuple[LookupDef, ...] = ()
    delays: tuple[DelayBlock, ...] = ()
    order: tuple[str, ...] = field(default=(), compare=False, repr=False)
    init_order: tuple[str, ...] = field(default=(), compare=False, repr=False)

    @cached_property
    def stock_map(self) -> Mapping[str, StockDef]:
        return _by_name(self.stocks)

    @cached_property
    def flow_map(self) -> Mapping[str, FlowDef]:
        return _by_name(self.flows)

    @cached_property
    def aux_map(self) -> Mapping[str, AuxDef]:
        return _by_name(self.auxes)

    @cached_property
    def lookup_map(self) -> Mapping[str, LookupDef]:
        return _by_name(self.lookups)

    @cached_property
    def delay_map(self) -> Mapping[str, DelayBlock]:
        return _by_name(self.delays)

    @cached_property
    def constant_values(self) -> Mapping[str, float]:
        return MappingProxyType({c.name: c.value for c in self.constants})

    @property
    def stock_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.stocks)

    @property
    def variable_names(self) -> tuple[str, ...]:
        """Every name that can be recorded in a trajectory."""
        return tuple(
            d.name for group in (self.stocks, self.flows, self.auxes, self.delays, self.constants) for d in group
        )

    def definitions(self) -> list[Definition]:
        return [*self.constants, *self.lookups, *self.stocks, *self.flows, *self.auxes, *self.delays]

    def expr_of(self, name: str) -> Expr:
        if name in self.aux_map:
            return self.aux_map[name].expr
        if name in self.flow_map:
            return self.flow_map[name].expr
        return self.delay_map[name].input

    def with_constants(self, values: Mapping[str, float]) -> "Model":
        """Copy of the model with some constant values replaced."""
        unknown = sorted(set(values) - set(self.constant_values))
        if unknown:
            raise ModelError([Diagnostic(f"unknown constant '{n}'", element=n) for n in unknown])
        consts = tuple(
            ConstDef(c.name, float(values[c.name]), c.span) if c.name in values else c for c in self.constants
        )
        return build_model([*self.definitions()[len(self.constants):], *consts])


def _validate_expr(expr, owner, span, kinds, diags, allowed=None):
    for node in walk(expr):
        if isinstance(node, Var):
            kind = kinds.get(node.name)
            where = node.span or span
            if kind is None:
                diags.append(Diagnostic(f"unresolved reference {node.name} in '{owner}'", where, owner))
            elif kind == "lookup":
                diags.append(Diagnostic(f"lookup table '{node.name}' used as a value in '{owner}'", where, owner))
            elif allowed is not None and kind not in allowed:
                diags.append(
                    Diagnostic(f"initial value of '{owner}' may only reference constants, not {kind} '{node.name}'",
                               where, owner)
                )
        elif isinstance(node, Call):
            where = node.span or span
            if node.func in BUILTINS:
                if len(node.args) != BUILTINS[node.func]:
                    diags.append(
                        Diagnostic(f"{node.func}() takes {BUILTINS[node.func]} arguments, got {len(node.args)}",
                                   where, owner)
                    )
            elif kinds.get(node.func) == "lookup":
                if len(node.args) != 1:
                    diags.append(Diagnostic(f"lookup '{node.func}' takes 1 argument", where, owner))
            else:
                diags.append(Diagnostic(f"unknown function or lookup {node.func} in '{owner}'", where, owner))
        elif isinstance(node, BinOp) and node.op not in ARITHMETIC + COMPARISONS:
            diags.append(Diagnostic(f"unknown operator {node.op!r}", span, owner))


def _toposort(nodes: dict[str, set[str]]):
    """Kahn's algorithm with name-ordered tie breaking.

    Returns (order, cyclic_components)."""
    indeg = {n: 0 for n in nodes}
    users: dict[str, list[str]] = {n: [] for n in nodes}
    for n, deps in nodes.items():
        for d in deps:
            if d in nodes:
                indeg[n] += 1
                users[d].append(n)
    ready = [n for n, k in indeg.items() if k == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for u in users[n]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, u)
    left = {n for n in nodes if n not in set(order)}
    return order, _cycles({n: nodes[n] & left for n in left})


def _cycles(graph: dict[str, set[str]]) -> list[list[str]]:
    # Tarjan; only components that actually form a cycle are returned.
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    out = []

    def visit(v):
        index[v] = low[v] = len(index)
        stack.append(v)
        on_stack.add(v)
        for w in sorted(graph[v]):
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            if len(comp) > 1 or v in graph[v]:
                out.append(sorted(comp))

    for v in sorted(graph):
        if v not in index:
            visit(v)
    return out


def build_model(defs: Iterable[Definition]) -> Model:
    """Validate element definitions and assemble a :class:`Model`.

    Raises :class:`ModelError` listing every problem: duplicate or reserved
    names, unresolved references, bad stock flow lists, malformed lookups,
    negative lags and algebraic cycles.
    """
    defs = list(defs)
    diags: list[Diagnostic] = []
    kinds: dict[str, str] = {}
    groups: dict[type, list] = {t: [] for t in (StockDef, FlowDef, AuxDef, ConstDef, LookupDef, DelayBlock)}
    kind_names = {StockDef: "stock", FlowDef: "flow", AuxDef: "aux", ConstDef: "constant",
                  LookupDef: "lookup", DelayBlock: "delay"}

    for d in defs:
        if type(d) not in groups:
            diags.append(Diagnostic(f"not a model element: {d!r}"))
            continue
        if d.name == TIME_NAME:
            diags.append(Diagnostic(f"'{TIME_NAME}' is reserved for simulation time", d.span, d.name))
            continue
        if d.name in kinds:
            diags.append(Diagnostic(f"duplicate name '{d.name}'", d.span, d.name))
            continue
        kinds[d.name] = kind_names[type(d)]
        groups[type(d)].append(d)

    for c in groups[ConstDef]:
        if not math.isfinite(c.value):
            diags.append(Diagnostic(f"constant '{c.name}' is not finite", c.span, c.name))
    for lk in groups[LookupDef]:
        xs = [p[0] for p in lk.points]
        if not lk.points:
            diags.append(Diagnostic(f"lookup '{lk.name}' has no points", lk.span, lk.name))
        elif not all(math.isfinite(v) for p in lk.points for v in p):
            diags.append(Diagnostic(f"lookup '{lk.name}' has non-finite points", lk.span, lk.name))
        elif any(b <= a for a, b in zip(xs, xs[1:])):
            diags.append(Diagnostic(f"lookup '{lk.name}' x values must be strictly increasing", lk.span, lk.name))
    for s in groups[StockDef]:
        _validate_expr(s.initial, s.name, s.span, kinds, diags, allowed={"constant"})
        for f in (*s.inflows, *s.outflows):
            if kinds.get(f) != "flow":
                what = "unresolved reference" if f not in kinds else f"{kinds[f]} is not a flow:"
                diags.append(Diagnostic(f"{what} {f} in stock '{s.name}'", s.span, s.name))
    for d in (*groups[FlowDef], *groups[AuxDef]):
        _validate_expr(d.expr, d.name, d.span, kinds, diags)
    for d in groups[DelayBlock]:
        _validate_expr(d.input, d.name, d.span, kinds, diags)
        if not (math.isfinite(d.lag) and d.lag >= 0):
            diags.append(Diagnostic(f"delay '{d.name}' lag must be a finite number >= 0", d.span, d.name))

    if diags:
        raise ModelError(diags)

    exprs = {d.name: d.expr for d in (*groups[FlowDef], *groups[AuxDef])}
    lagged = {d.name: d.input for d in groups[DelayBlock] if d.lag > 0}
    instant = {d.name: d.input for d in groups[DelayBlock] if d.lag == 0}
    spans = {d.name: d.span for d in defs if hasattr(d, "name")}

    step_graph = {n: references(e) for n, e in {**exprs, **instant}.items()}
    order, cycles = _toposort(step_graph)
    for comp in cycles:
        diags.append(Diagnostic("algebraic cycle among " + ", ".join(comp)
                                + " (cycles must pass through a stock or a lagged delay)",
                                spans.get(comp[0]), comp[0]))
    init_graph = {n: references(e) for n, e in {**exprs, **instant, **lagged}.items()}
    init_order, init_cycles = _toposort(init_graph)
    if not cycles:
        for comp in init_cycles:
            diags.append(Diagnostic("cannot initialise delays: values at the start time depend on each other among "
                                    + ", ".join(comp), spans.get(comp[0]), comp[0]))
    if diags:
        raise ModelError(diags)

    def sort(items):
        return tuple(sorted(items, key=lambda d: d.name))

    stocks = tuple(
        StockDef(s.name, s.initial, tuple(sorted(s.inflows)), tuple(sorted(s.outflows)), s.span)
        for s in sort(groups[StockDef])
    )
    return Model(
        stocks=stocks,
        flows=sort(groups[FlowDef]),
        auxes=sort(groups[AuxDef]),
        constants=tuple(ConstDef(c.name, float(c.value), c.span) for c in sort(groups[ConstDef])),
        lookups=tuple(LookupDef(lk.name, tuple((float(x), float(y)) for x, y in lk.points), lk.span)
                      for lk in sort(groups[LookupDef])),
        delays=tuple(DelayBlock(d.name, d.input, float(d.lag), d.span) for d in sort(groups[DelayBlock])),
        order=tuple(order),
        init_order=tuple(init_order),
    )


# ---------------------------------------------------------------------------
# Time grid


def steps_in(duration: float, dt: float, what: str = "duration") -> int:
    """Number of ``dt`` steps in ``duration``; raises GridError unless integral."""
    q = duration / dt
    n = round(q)
    if n < 0 or abs(q - n) > 1e-9 * max(1.0, abs(q)):
        raise GridError(f"{what} {duration:g} is not a whole multiple of the step {dt:g}")
    return int(n)


@dataclass(frozen=True)
class TimeGrid:
    """Simulation clock, in days.

    ``dt_internal`` is the integration step; ``dt_data`` the resolution of
    the data the model is compared against. Their ratio must be a natural
    number.
    """

    horizon: float
    t0: float = 0.0
    dt_internal: float = 0.0625
    dt_data: float = 1.0

    def __post_init__(self):
        for name in ("horizon", "t0", "dt_internal", "dt_data"):
            if not math.isfinite(getattr(self, name)):
                raise GridError(f"{name} must be finite")
        if self.dt_internal <= 0:
            raise GridError("dt_internal must be > 0")
        if self.horizon <= 0:
            raise GridError("horizon must be > 0")
        steps_in(self.horizon, self.dt_internal, "horizon")
        if self.dt_data <= 0 or steps_in(self.dt_data, self.dt_internal, "dt_data") < 1:
            raise GridError(f"dt_data / dt_internal must be a positive integer, got {self.dt_data / self.dt_internal:g}")

    @property
    def n_steps(self) -> int:
        return steps_in(self.horizon, self.dt_internal, "horizon")

    @property
    def data_stride(self) -> int:
        return steps_in(self.dt_data, self.dt_internal, "dt_data")

    def time(self, k: int) -> float:
        return self.t0 + k * self.dt_internal

    def times(self):
        import numpy as np

        return self.t0 + np.arange(self.n_steps + 1) * self.dt_internal

    def step_of(self, t: float) -> int:
        """Grid index of absolute time ``t``; raises GridError if off-grid."""
        return steps_in(t - self.t0, self.dt_internal, f"time {t:g} (offset from t0)")


# ---------------------------------------------------------------------------
# Evaluation


def eval_expr(expr: Expr, env: Mapping[str, float], t: float, model: Model, owner: str) -> float:
    """Evaluate one expression. Division by zero raises EvaluationError."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Time):
        return t
    if isinstance(expr, Neg):
        return -eval_expr(expr.operand, env, t, model, owner)
    if isinstance(expr, BinOp):
        a = eval_expr(expr.left, env, t, model, owner)
        b = eval_expr(expr.right, env, t, model, owner)
        op = expr.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise EvaluationError(owner, "division by zero")
            return a / b
        if op == "<":
            return 1.0 if a < b else 0.0
        if op == "<=":
            return 1.0 if a <= b else 0.0
        if op == ">":
            return 1.0 if a > b else 0.0
        if op == ">=":
            return 1.0 if a >= b else 0.0
        if op == "==":
            return 1.0 if a == b else 0.0
        return 1.0 if a != b else 0.0
    # Call
    f = expr.func
    if f == "select":
        cond = eval_expr(expr.args[0], env, t, model, owner)
        return eval_expr(expr.args[1] if cond != 0.0 else expr.args[2], env, t, model, owner)
    args = [eval_expr(a, env, t, model, owner) for a in expr.args]
    if f == "min":
        return args[0] if args[0] <= args[1] else args[1]
    if f == "max":
        return args[0] if args[0] >= args[1] else args[1]
    if f == "clamp":
        x, lo, hi = args
        x = x if x >= lo else lo
        return x if x <= hi else hi
    return interpolate(model.lookup_map[f].points, args[0])


def _checked(value: float, owner: str) -> float:
    if not math.isfinite(value):
        raise EvaluationError(owner, "non-finite value")
    return value


@dataclass(frozen=True)
class SimState:
    """Integration state: time, stock values and delay buffers.

    ``buffers`` holds, for every lagged delay, its last ``lag/dt`` input
    samples, oldest first. The oldest is the delay's current output.
    """

    t: float
    stocks: Mapping[str, float]
    buffers: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    step: int = 0


def initial_stocks(model: Model, t0: float = 0.0) -> dict[str, float]:
    env = dict(model.constant_values)
    return {s.name: _checked(eval_expr(s.initial, env, t0, model, s.name), s.name) for s in model.stocks}


def initial_state(model: Model, grid: TimeGrid) -> SimState:
    """State at ``grid.t0``; delay buffers are filled with the inputs' start values."""
    stocks = initial_stocks(model, grid.t0)
    env = {**model.constant_values, **stocks}
    for name in model.init_order:
        env[name] = _checked(eval_expr(model.expr_of(name), env, grid.t0, model, name), name)
    buffers = {}
    for d in model.delays:
        if d.lag > 0:
            n = steps_in(d.lag, grid.dt_internal, f"lag of delay '{d.name}'")
            buffers[d.name] = (env[d.name],) * n
    return SimState(grid.t0, MappingProxyType(stocks), MappingProxyType(buffers), 0)


def evaluate(model: Model, state: SimState, overrides: Mapping[str, float] | None = None) -> dict[str, float]:
    """Values of every constant, stock, delay output, auxiliary and flow at ``state``.

    ``overrides`` may replace stock values, constants or ``t``.
    """
    overrides = dict(overrides or {})
    t = overrides.pop(TIME_NAME, state.t)
    env = {**model.constant_values, **state.stocks}
    for name, buf in state.buffers.items():
        env[name] = buf[0]
    for name, value in overrides.items():
        if name not in env or name in model.delay_map:
            raise KeyError(f"cannot override '{name}'")
        env[name] = float(value)
    for name in model.order:
        env[name] = _checked(eval_expr(model.expr_of(name), env, t, model, name), name)
    return env


def net_rates(model: Model, env: Mapping[str, float]) -> dict[str, float]:
    rates = {}
    for s in model.stocks:
        inflow = 0.0
        for f in s.inflows:
            inflow += env[f]
        outflow = 0.0
        for f in s.outflows:
            outflow += env[f]
        rates[s.name] = inflow - outflow
    return rates


def eval_rhs(model: Model, state: SimState, overrides: Mapping[str, float] | None = None) -> dict[str, float]:
    """Net rate of every stock: sum of inflows minus sum of outflows."""
    return net_rates(model, evaluate(model, state, overrides))


def delay_read(model: Model, name: str, state: SimState) -> float:
    """Current output of delay ``name``."""
    block = model.delay_map[name]
    if block.lag > 0:
        return state.buffers[name][0]
    return evaluate(model, state)[name]
