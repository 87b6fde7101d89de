"""Lower a :class:`~stockflow.sdcore.Model` to flat arrays for the kernels."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels as K
from .sdcore import BinOp, Call, Model, Neg, Num, Time, Var, steps_in

_BINARY = {"+": K.ADD, "-": K.SUB, "*": K.MUL, "/": K.DIV, "<": K.LT, "<=": K.LE,
           ">": K.GT, ">=": K.GE, "==": K.EQ, "!=": K.NE}
_CALLS = {"min": K.MIN, "max": K.MAX, "clamp": K.CLAMP}


class _Emitter:
    def __init__(self, slot_of, lookup_index):
        self.slot_of = slot_of
        self.lookup_index = lookup_index
        self.code: list[int] = []
        self.arg: list[int] = []
        self.lit: list[float] = []
        self.max_depth = 1

    def _op(self, op, arg=0, lit=0.0):
        self.code.append(op)
        self.arg.append(arg)
        self.lit.append(lit)
        return len(self.code) - 1

    def program(self, expr):
        start = len(self.code)
        self.max_depth = max(self.max_depth, self._emit(expr, 0))
        return start, len(self.code)

    def _emit(self, e, depth):
        # returns the peak stack depth reached
        if isinstance(e, Num):
            self._op(K.PUSH, lit=e.value)
            return depth + 1
        if isinstance(e, Var):
            self._op(K.LOAD, self.slot_of[e.name])
            return depth + 1
        if isinstance(e, Time):
            self._op(K.LOAD, 0)
            return depth + 1
        if isinstance(e, Neg):
            peak = self._emit(e.operand, depth)
            self._op(K.NEG)
            return peak
        if isinstance(e, BinOp):
            peak = max(self._emit(e.left, depth), self._emit(e.right, depth + 1))
            self._op(_BINARY[e.op])
            return peak
        if e.func == "select":
            peak = self._emit(e.args[0], depth)
            jz = self._op(K.JZ)
            peak = max(peak, self._emit(e.args[1], depth))
            jmp = self._op(K.JMP)
            self.arg[jz] = len(self.code)
            peak = max(peak, self._emit(e.args[2], depth))
            self.arg[jmp] = len(self.code)
            return peak
        if e.func in _CALLS:
            peak = depth
            for i, a in enumerate(e.args):
                peak = max(peak, self._emit(a, depth + i))
            self._op(_CALLS[e.func])
            return peak
        peak = self._emit(e.args[0], depth)
        self._op(K.LOOKUP, self.lookup_index[e.func])
        return peak


def _i64(xs):
    return np.asarray(xs, dtype=np.int64).reshape(-1)


def _f64(xs):
    return np.asarray(xs, dtype=np.float64).reshape(-1)


@dataclass(frozen=True, eq=False)
class CompiledModel:
    """Array form of a model for one integration step size.

    Slot 0 holds time; then stocks, constants, auxiliaries, flows and delay
    outputs, each group sorted by name.
    """

    model: Model
    dt: float
    names: tuple[str, ...]
    slot_of: dict
    stock_slots: np.ndarray
    const_slots: dict
    bytecode: tuple
    lookups: tuple
    programs: tuple
    delay_programs: tuple
    delays: tuple
    flows: tuple
    ring_size: int
    max_depth: int

    def new_stack(self):
        return np.empty(self.max_depth + 1)


@lru_cache(maxsize=64)
def compile_model(model: Model, dt: float) -> CompiledModel:
    names = ["t"]
    names += [s.name for s in model.stocks]
    names += [c.name for c in model.constants]
    names += [a.name for a in model.auxes]
    names += [f.name for f in model.flows]
    names += [d.name for d in model.delays]
    slot_of = {n: i for i, n in enumerate(names)}

    lookup_index = {lk.name: i for i, lk in enumerate(model.lookups)}
    lk_ptr = [0]
    lk_x: list[float] = []
    lk_y: list[float] = []
    for lk in model.lookups:
        lk_x += [p[0] for p in lk.points]
        lk_y += [p[1] for p in lk.points]
        lk_ptr.append(len(lk_x))

    em = _Emitter(slot_of, lookup_index)
    p_start, p_end, p_slot = [], [], []
    for name in model.order:
        a, b = em.program(model.expr_of(name))
        p_start.append(a)
        p_end.append(b)
        p_slot.append(slot_of[name])

    lagged = [d for d in model.delays if d.lag > 0]
    d_start, d_end, d_slot, ring_off, ring_len = [], [], [], [], []
    offset = 0
    for d in lagged:
        a, b = em.program(d.input)
        d_start.append(a)
        d_end.append(b)
        d_slot.append(slot_of[d.name])
        n = steps_in(d.lag, dt, f"lag of delay '{d.name}'")
        ring_off.append(offset)
        ring_len.append(n)
        offset += n

    in_ptr, in_slot, out_ptr, out_slot = [0], [], [0], []
    for s in model.stocks:
        in_slot += [slot_of[f] for f in s.inflows]
        out_slot += [slot_of[f] for f in s.outflows]
        in_ptr.append(len(in_slot))
        out_ptr.append(len(out_slot))

    return CompiledModel(
        model=model,
        dt=dt,
        names=tuple(names),
        slot_of=slot_of,
        stock_slots=_i64([slot_of[s.name] for s in model.stocks]),
        const_slots={c.name: slot_of[c.name] for c in model.constants},
        bytecode=(_i64(em.code), _i64(em.arg), _f64(em.lit)),
        lookups=(_i64(lk_ptr), _f64(lk_x), _f64(lk_y)),
        programs=(_i64(p_start), _i64(p_end), _i64(p_slot)),
        delay_programs=(_i64(d_start), _i64(d_end), _i64(d_slot)),
        delays=(_i64(ring_off), _i64(ring_len), _i64(d_slot)),
        flows=(_i64(in_ptr), _i64(in_slot), _i64(out_ptr), _i64(out_slot)),
        ring_size=offset,
        max_depth=em.max_depth,
    )
