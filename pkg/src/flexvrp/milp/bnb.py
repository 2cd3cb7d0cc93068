"""Best-bound branch and bound over the native simplex."""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from ..errors import LimitReached
from .model import LinearModel
from .simplex import solve_lp
from .solution import INFEASIBLE, INT_TOL, OPTIMAL, UNBOUNDED, MipLimits, MipSolution


def _with_bounds(model: LinearModel, lb, ub) -> LinearModel:
    sub = model.copy()
    for v, lo, hi in zip(sub.variables, lb, ub):
        v.lb, v.ub = float(lo), float(hi)
    return sub


def solve_mip(model: LinearModel, limits: MipLimits) -> MipSolution:
    t0 = time.perf_counter()
    integer = model.integrality()
    lb0, ub0 = model.bounds()
    n = model.num_vars
    incumbent = None
    inc_obj = math.inf
    counter = 0
    nodes = 0
    heap = [(-math.inf, counter, lb0, ub0)]

    def gap_closed(bound):
        return inc_obj - bound <= max(limits.abs_gap, limits.rel_gap * max(1.0, abs(inc_obj)))

    while heap:
        bound = heap[0][0]
        if incumbent is not None and gap_closed(bound):
            break
        if limits.node_limit is not None and nodes >= limits.node_limit:
            raise LimitReached("node limit reached", incumbent=incumbent, bound=bound)
        if limits.time_limit is not None and time.perf_counter() - t0 > limits.time_limit:
            raise LimitReached("time limit reached", incumbent=incumbent, bound=bound)
        _, _, lb, ub = heapq.heappop(heap)
        nodes += 1
        lp = solve_lp(_with_bounds(model, lb, ub))
        if lp.status == INFEASIBLE:
            continue
        if lp.status == UNBOUNDED:
            if nodes == 1:
                return MipSolution(UNBOUNDED, lp.x, -math.inf, nodes, math.inf, -math.inf)
            continue
        if incumbent is not None and gap_closed(lp.objective):
            continue
        x = lp.x
        frac = np.abs(x - np.round(x))
        frac[~integer] = 0.0
        if frac.max(initial=0.0) <= INT_TOL:
            xi = x.copy()
            xi[integer] = np.round(xi[integer])
            if lp.objective < inc_obj:
                incumbent, inc_obj = xi, lp.objective
            continue
        # most fractional; argmax keeps the lowest index on ties
        j = int(np.argmax(np.minimum(frac, 1.0 - frac) * integer))
        down_ub = ub.copy()
        down_ub[j] = math.floor(x[j])
        up_lb = lb.copy()
        up_lb[j] = math.ceil(x[j])
        counter += 1
        heapq.heappush(heap, (lp.objective, counter, lb, down_ub))
        counter += 1
        heapq.heappush(heap, (lp.objective, counter, up_lb, ub))

    if incumbent is None:
        return MipSolution(INFEASIBLE, np.full(n, np.nan), math.inf, nodes, math.inf, math.inf)
    bound = min(heap[0][0], inc_obj) if heap else inc_obj
    gap = (inc_obj - bound) / max(1.0, abs(inc_obj))
    return MipSolution(OPTIMAL, incumbent, inc_obj, nodes, gap, bound)
