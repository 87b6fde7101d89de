"""Hot loops: bytecode expression evaluation, fixed-step integration, moments.

Every function here is written in the numba-compatible subset of Python and
decorated with :func:`stockflow._jit.njit`, which compiles it unless
``STOCKFLOW_DISABLE_JIT`` is set. Arithmetic is performed in the same order
as the tree-walking evaluator in :mod:`stockflow.sdcore`, so both paths give
bit-identical results.
"""
import math

import numpy as np

from ._jit import njit

# opcodes
PUSH = 0
LOAD = 1
ADD = 2
SUB = 3
MUL = 4
DIV = 5
NEG = 6
MIN = 7
MAX = 8
CLAMP = 9
LT = 10
LE = 11
GT = 12
GE = 13
EQ = 14
NE = 15
LOOKUP = 16
JZ = 17
JMP = 18

# status codes written to status[0]
OK = 0
DIV_ZERO = 1
NON_FINITE = 2
STOCK_NON_FINITE = 3

EULER = 0
RK4 = 1


@njit
def interp(lk_ptr, lk_x, lk_y, table, x):
    a = lk_ptr[table]
    b = lk_ptr[table + 1]
    x0 = lk_x[a]
    y0 = lk_y[a]
    if x <= x0:
        return y0
    for i in range(a + 1, b):
        x1 = lk_x[i]
        y1 = lk_y[i]
        if x == x1:
            return y1
        if x < x1:
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        x0 = x1
        y0 = y1
    return y0


@njit
def run_program(bytecode, lookups, start, end, vals, stack):
    """Execute instructions [start, end); returns (value, status)."""
    code, arg, lit = bytecode
    lk_ptr, lk_x, lk_y = lookups
    sp = 0
    pc = start
    while pc < end:
        op = code[pc]
        if op == LOAD:
            stack[sp] = vals[arg[pc]]
            sp += 1
        elif op == PUSH:
            stack[sp] = lit[pc]
            sp += 1
        elif op == ADD:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] + stack[sp]
        elif op == SUB:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] - stack[sp]
        elif op == MUL:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] * stack[sp]
        elif op == DIV:
            sp -= 1
            if stack[sp] == 0.0:
                return 0.0, DIV_ZERO
            stack[sp - 1] = stack[sp - 1] / stack[sp]
        elif op == NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == MIN:
            sp -= 1
            if not stack[sp - 1] <= stack[sp]:
                stack[sp - 1] = stack[sp]
        elif op == MAX:
            sp -= 1
            if not stack[sp - 1] >= stack[sp]:
                stack[sp - 1] = stack[sp]
        elif op == CLAMP:
            sp -= 2
            x = stack[sp - 1]
            if not x >= stack[sp]:
                x = stack[sp]
            if not x <= stack[sp + 1]:
                x = stack[sp + 1]
            stack[sp - 1] = x
        elif op == LOOKUP:
            stack[sp - 1] = interp(lk_ptr, lk_x, lk_y, arg[pc], stack[sp - 1])
        elif op == JZ:
            sp -= 1
            if stack[sp] == 0.0:
                pc = arg[pc]
                continue
        elif op == JMP:
            pc = arg[pc]
            continue
        else:
            sp -= 1
            a = stack[sp - 1]
            b = stack[sp]
            if op == LT:
                r = a < b
            elif op == LE:
                r = a <= b
            elif op == GT:
                r = a > b
            elif op == GE:
                r = a >= b
            elif op == EQ:
                r = a == b
            else:
                r = a != b
            stack[sp - 1] = 1.0 if r else 0.0
        pc += 1
    return stack[0], OK


@njit
def run_sequence(bytecode, lookups, programs, vals, stack, status):
    """Run programs in order, storing each result in its slot."""
    p_start, p_end, p_slot = programs
    for p in range(p_start.shape[0]):
        v, st = run_program(bytecode, lookups, p_start[p], p_end[p], vals, stack)
        if st == OK and not math.isfinite(v):
            st = NON_FINITE
        if st != OK:
            status[0] = st
            status[1] = p_slot[p]
            return False
        vals[p_slot[p]] = v
    return True


@njit
def evaluate_rates(t, y, vals, bytecode, lookups, programs, stock_slots, flows, stack, status, rates):
    """Fill ``vals`` for time ``t`` and stock vector ``y``; write net rates."""
    in_ptr, in_slot, out_ptr, out_slot = flows
    vals[0] = t
    for i in range(y.shape[0]):
        vals[stock_slots[i]] = y[i]
    if not run_sequence(bytecode, lookups, programs, vals, stack, status):
        return False
    for i in range(y.shape[0]):
        inflow = 0.0
        for j in range(in_ptr[i], in_ptr[i + 1]):
            inflow += vals[in_slot[j]]
        outflow = 0.0
        for j in range(out_ptr[i], out_ptr[i + 1]):
            outflow += vals[out_slot[j]]
        rates[i] = inflow - outflow
    return True


@njit
def integrate(k0, k1, t0, dt, method, y, vals, ring, bytecode, lookups, programs, delay_programs,
              delays, stock_slots, flows, stack, traj, status):
    """Advance ``y`` from grid index ``k0`` to ``k1`` in place.

    Row k of ``traj`` receives every slot value at t0 + k*dt for k in
    [k0, k1), plus row k1 when it is the last grid index. On failure
    ``status`` holds (code, slot, step) and the function returns early.
    """
    ring_off, ring_len, ring_slot = delays
    d_start, d_end, d_slot = delay_programs
    n = y.shape[0]
    nd = ring_off.shape[0]
    r1 = np.empty(n)
    r2 = np.empty(n)
    r3 = np.empty(n)
    r4 = np.empty(n)
    ytmp = np.empty(n)
    dnew = np.empty(nd)
    for k in range(k0, k1):
        t = t0 + k * dt
        for d in range(nd):
            vals[ring_slot[d]] = ring[ring_off[d] + k % ring_len[d]]
        if not evaluate_rates(t, y, vals, bytecode, lookups, programs, stock_slots, flows, stack, status, r1):
            status[2] = k
            return
        traj[k, :] = vals
        for d in range(nd):
            v, st = run_program(bytecode, lookups, d_start[d], d_end[d], vals, stack)
            if st == OK and not math.isfinite(v):
                st = NON_FINITE
            if st != OK:
                status[0] = st
                status[1] = d_slot[d]
                status[2] = k
                return
            dnew[d] = v
        if method == EULER:
            for i in range(n):
                y[i] = y[i] + dt * r1[i]
        else:
            for i in range(n):
                r1[i] = dt * r1[i]
                ytmp[i] = y[i] + 0.5 * r1[i]
            if not evaluate_rates(t + 0.5 * dt, ytmp, vals, bytecode, lookups, programs, stock_slots, flows,
                                  stack, status, r2):
                status[2] = k
                return
            for i in range(n):
                r2[i] = dt * r2[i]
                ytmp[i] = y[i] + 0.5 * r2[i]
            if not evaluate_rates(t + 0.5 * dt, ytmp, vals, bytecode, lookups, programs, stock_slots, flows,
                                  stack, status, r3):
                status[2] = k
                return
            for i in range(n):
                r3[i] = dt * r3[i]
                ytmp[i] = y[i] + r3[i]
            if not evaluate_rates(t + dt, ytmp, vals, bytecode, lookups, programs, stock_slots, flows,
                                  stack, status, r4):
                status[2] = k
                return
            for i in range(n):
                r4[i] = dt * r4[i]
                y[i] = y[i] + (r1[i] + 2.0 * r2[i] + 2.0 * r3[i] + r4[i]) / 6.0
        for i in range(n):
            if not math.isfinite(y[i]):
                status[0] = STOCK_NON_FINITE
                status[1] = stock_slots[i]
                status[2] = k + 1
                return
        for d in range(nd):
            ring[ring_off[d] + k % ring_len[d]] = dnew[d]
    if k1 == traj.shape[0] - 1:
        for d in range(nd):
            vals[ring_slot[d]] = ring[ring_off[d] + k1 % ring_len[d]]
        if not evaluate_rates(t0 + k1 * dt, y, vals, bytecode, lookups, programs, stock_slots, flows,
                              stack, status, r1):
            status[2] = k1
            return
        traj[k1, :] = vals


@njit
def central_moments(x):
    """Mean and the 2nd, 3rd and 4th central sums (two-pass)."""
    n = x.shape[0]
    s = 0.0
    for i in range(n):
        s += x[i]
    mean = s / n
    s2 = 0.0
    s3 = 0.0
    s4 = 0.0
    for i in range(n):
        d = x[i] - mean
        d2 = d * d
        s2 += d2
        s3 += d2 * d
        s4 += d2 * d2
    return mean, s2, s3, s4
