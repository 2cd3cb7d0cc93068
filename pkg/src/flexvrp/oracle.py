"""Exhaustive ground truth for tiny instances.

Within a fixed route, starting service as early as possible is optimal: costs
do not depend on time, and a later start at any stop can only raise the slack
every later stop needs (exchange argument: pulling a start earlier never
breaks a window that is only flexible to the right).  So each ordered route
has one schedule, and its required flexibility is priced by the cheapest
discount that makes the customer accept it.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .errors import TooLarge, Unreachable
from .lower_level import TIE_TOL, best_response, discount_cost
from .model import Instance, require_valid
from .report import RunReport

_TIE = 1e-9


@dataclass(frozen=True)
class EnumLimits:
    max_customers: int = 8
    max_vehicles: int = 3

    def __post_init__(self):
        if self.max_customers < 1 or self.max_vehicles < 1:
            raise ValueError("enumeration limits must be positive")


@dataclass
class _Route:
    cost: float
    order: Tuple[int, ...]
    q: Dict[int, float]
    delta: Dict[int, float]
    t: Dict[int, float]


def _evaluate(inst: Instance, order, flexible: bool) -> Optional[_Route]:
    """Cost of one ordered route under earliest-start scheduling, or None if infeasible."""
    T = inst.travel_time
    s, e = inst.start, inst.end
    path = (s,) + tuple(order) + (e,)
    cost = 0.0
    clock = 0.0
    q, delta, times = {}, {}, {}
    for a, b in zip(path[:-1], path[1:]):
        cost += inst.arc_cost(a, b)
        if b == e:
            break
        arrival = clock + T[a, b]
        tau = inst.tau[b]
        if not flexible:
            if arrival > tau + TIE_TOL:
                return None
            clock = tau
            continue
        clock = max(arrival, tau)
        slack = clock - tau
        fn = inst.inconvenience[b]
        if slack > fn.delta_bar + TIE_TOL:
            return None
        try:
            qb, spend = discount_cost(min(slack, fn.delta_bar), fn, inst.q_max)
        except Unreachable:
            return None
        q[b] = qb
        # the operator's pick inside the customer's best-response interval
        delta[b] = max(slack, best_response(qb, fn).arg_lo)
        times[b] = clock
        cost += spend
    return _Route(cost, tuple(order), q, delta, times)


def _better(a, b) -> bool:
    """Total order: lower cost, then lexicographically smaller encoding."""
    if b is None:
        return True
    if a[0] < b[0] - _TIE:
        return True
    if a[0] > b[0] + _TIE:
        return False
    return a[1] < b[1]


def _enumerate(inst: Instance, limits: EnumLimits, flexible: bool, method: str) -> RunReport:
    require_valid(inst)
    cust = inst.customers
    if len(cust) > limits.max_customers or inst.vehicles > limits.max_vehicles:
        raise TooLarge(f"{len(cust)} customers / {inst.vehicles} vehicles exceed the oracle limits")
    t0 = time.perf_counter()
    n = len(cust)

    # best single route per nonempty customer subset
    single: Dict[int, _Route] = {}
    for mask in range(1, 1 << n):
        members = [cust[i] for i in range(n) if mask >> i & 1]
        best = None
        for order in itertools.permutations(members):
            r = _evaluate(inst, order, flexible)
            if r is not None and _better((r.cost, r.order), best and (best.cost, best.order)):
                best = r
        if best is not None:
            single[mask] = best

    # part[mask] = best split of exactly `mask` into `used` routes; the route
    # holding the lowest customer of mask is chosen first, so each split is seen once
    idle = inst.idle_cost()
    part: Dict[int, tuple] = {0: (0.0, (), [])}
    best_total = (inst.vehicles * idle, (), [])
    for used in range(1, inst.vehicles + 1):
        nxt: Dict[int, tuple] = {}
        for mask in range(1, 1 << n):
            low = mask & -mask
            sub = mask
            best = None
            while sub:
                if sub & low and sub in single and (mask ^ sub) in part:
                    c, enc, routes = part[mask ^ sub]
                    r = single[sub]
                    cand = (c + r.cost, tuple(sorted(enc + (r.order,))), routes + [r])
                    if best is None or _better(cand[:2], best[:2]):
                        best = cand
                sub = (sub - 1) & mask
            if best is not None:
                nxt[mask] = best
                cand = (best[0] + (inst.vehicles - used) * idle, best[1], best[2])
                if _better(cand[:2], best_total[:2]):
                    best_total = cand
        part = nxt

    total, enc, routes = best_total
    routes = sorted(routes, key=lambda r: r.order)
    s, e = inst.start, inst.end
    out_routes = [[s, *r.order, e] for r in routes]
    out_routes += [[s, e] for _ in range(inst.vehicles - len(routes))]
    q, delta, times = {}, {}, {}
    for r in routes:
        q.update(r.q)
        delta.update(r.delta)
        times.update(r.t)
    if not flexible:
        for r in routes:
            for j in r.order:
                q[j], delta[j], times[j] = 0.0, 0.0, inst.tau[j]
    first = total - sum(q[j] * delta[j] for j in q)
    return RunReport(method=method, objective=float(total), routes=out_routes, q=q, delta=delta,
                     t=times, iterations=1, wall_time=time.perf_counter() - t0, first_stage=first)


def enumerate_optimal(inst: Instance, limits: Optional[EnumLimits] = None) -> RunReport:
    """Global optimum of the flexible problem by exhaustive enumeration."""
    return _enumerate(inst, limits or EnumLimits(), flexible=True, method="oracle")


def enumerate_vrp(inst: Instance, limits: Optional[EnumLimits] = None) -> RunReport:
    """Global optimum with hard windows: service exactly at tau, no discounts."""
    return _enumerate(inst, limits or EnumLimits(), flexible=False, method="oracle")
