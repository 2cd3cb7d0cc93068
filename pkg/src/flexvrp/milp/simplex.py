"""Dense bounded-variable primal simplex with dual extraction.

Every row gets a slack column (a.x + s = b) whose bounds encode the sense,
so the working problem is  min c'x  s.t.  M x = b,  l <= x <= u.  Nonbasic
columns sit at a finite bound (free columns at zero); phase one adds one
artificial per row whose slack could not absorb the starting residual.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import NumericalFailure
from .model import EQ, GE, LE, LinearModel
from .solution import INFEASIBLE, OPTIMAL, UNBOUNDED, LpSolution

PIVOT_TOL = 1e-10
COST_TOL = 1e-9
FEAS_TOL = 1e-9
BLAND_AFTER = 50

_AT_LB, _AT_UB, _AT_ZERO, _BASIC = 0, 1, 2, 3


class _Tableau:
    def __init__(self, M, b, c, lb, ub):
        self.M, self.b, self.c = M, b, c
        self.lb, self.ub = lb, ub
        self.m, self.N = M.shape
        self.state = np.full(self.N, _AT_LB)
        self.x = np.zeros(self.N)
        self.basis = np.zeros(self.m, dtype=int)
        self.iterations = 0
        self.small_pivots = 0

    def solve_basic(self):
        B = self.M[:, self.basis]
        nb = self.state != _BASIC
        rhs = self.b - self.M[:, nb] @ self.x[nb]
        try:
            self.x[self.basis] = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis", {"basis": self.basis.tolist()}) from exc

    def duals(self, cost):
        B = self.M[:, self.basis]
        try:
            return np.linalg.solve(B.T, cost[self.basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis", {"basis": self.basis.tolist()}) from exc

    def run(self, cost, max_iter):
        """Primal simplex on the current basis; returns OPTIMAL or UNBOUNDED."""
        degenerate = 0
        while True:
            if self.iterations >= max_iter:
                raise NumericalFailure("simplex iteration limit", {"iterations": self.iterations})
            self.iterations += 1
            y = self.duals(cost)
            d = cost - self.M.T @ y
            st = self.state
            can_up = ((st == _AT_LB) | (st == _AT_ZERO)) & (self.ub > self.lb) & (d < -COST_TOL)
            can_dn = ((st == _AT_UB) | (st == _AT_ZERO)) & (self.ub > self.lb) & (d > COST_TOL)
            eligible = np.flatnonzero(can_up | can_dn)
            if eligible.size == 0:
                return OPTIMAL
            if degenerate >= BLAND_AFTER:
                j = int(eligible[0])
            else:
                mag = np.abs(d[eligible])
                j = int(eligible[np.argmax(mag)])  # argmax keeps the lowest index on ties
            direction = 1.0 if can_up[j] else -1.0

            B = self.M[:, self.basis]
            w = np.linalg.solve(B, self.M[:, j])
            step = math.inf
            leave = -1  # -1 means bound flip of the entering column
            if math.isfinite(self.ub[j]) and math.isfinite(self.lb[j]):
                step = self.ub[j] - self.lb[j]
            rate = -direction * w  # change of each basic per unit step
            xb = self.x[self.basis]
            lbb, ubb = self.lb[self.basis], self.ub[self.basis]
            best_var = None
            for r in range(self.m):
                if rate[r] < -PIVOT_TOL and math.isfinite(lbb[r]):
                    t = max((xb[r] - lbb[r]) / -rate[r], 0.0)
                elif rate[r] > PIVOT_TOL and math.isfinite(ubb[r]):
                    t = max((ubb[r] - xb[r]) / rate[r], 0.0)
                else:
                    continue
                var = self.basis[r]
                # strict improvement, or a tie broken toward the lowest column index;
                # ties with a bound flip keep the flip
                if t < step - 1e-12 or (leave >= 0 and abs(t - step) <= 1e-12 and var < best_var):
                    step, leave, best_var = t, r, var
            if step == math.inf:
                return UNBOUNDED
            if leave >= 0 and abs(w[leave]) < 1e-7:
                self.small_pivots += 1
                if self.small_pivots > 100:
                    raise NumericalFailure("repeated tiny pivots", {"pivot": float(w[leave])})
            degenerate = degenerate + 1 if step <= 1e-12 else 0

            if leave < 0:
                self.state[j] = _AT_UB if direction > 0 else _AT_LB
                self.x[j] = self.ub[j] if direction > 0 else self.lb[j]
            else:
                out = self.basis[leave]
                hit_lb = rate[leave] < 0
                self.state[out] = _AT_LB if hit_lb else _AT_UB
                self.x[out] = self.lb[out] if hit_lb else self.ub[out]
                self.x[j] += direction * step
                self.basis[leave] = j
                self.state[j] = _BASIC
            self.solve_basic()


def solve_lp(model: LinearModel, max_iter: int = 50000) -> LpSolution:
    n, m = model.num_vars, model.num_rows
    A = model.matrix().toarray()
    b = np.array([r.rhs for r in model.rows], dtype=float)
    c = model.cost_vector()
    lb, ub = model.bounds()

    slb = np.zeros(m)
    sub = np.zeros(m)
    for i, r in enumerate(model.rows):
        if r.sense == LE:
            slb[i], sub[i] = 0.0, math.inf
        elif r.sense == GE:
            slb[i], sub[i] = -math.inf, 0.0

    # starting point for structural columns
    x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    state0 = np.where(np.isfinite(lb), _AT_LB, np.where(np.isfinite(ub), _AT_UB, _AT_ZERO))
    resid = b - A @ x0

    # slack basic when it can take the residual, else parked at the violated bound
    s0 = np.clip(resid, slb, sub)
    s_state = np.where(slb == sub, _AT_LB, _BASIC)
    art_sign = np.sign(resid - s0)
    needs_art = np.abs(resid - s0) > FEAS_TOL
    for i in range(m):
        if needs_art[i] or slb[i] == sub[i]:
            s_state[i] = _AT_LB if s0[i] == slb[i] else _AT_UB
    art_sign[art_sign == 0] = 1.0

    M = np.hstack([A, np.eye(m), np.diag(art_sign)])
    full_lb = np.concatenate([lb, slb, np.zeros(m)])
    full_ub = np.concatenate([ub, sub, np.full(m, math.inf)])
    tab = _Tableau(M, b, None, full_lb, full_ub)
    tab.x = np.concatenate([x0, s0, np.abs(resid - s0) * needs_art])
    tab.state = np.concatenate([state0, s_state, np.full(m, _AT_LB)])
    for i in range(m):
        if s_state[i] == _BASIC:
            tab.basis[i] = n + i
        else:
            tab.basis[i] = n + m + i
            tab.state[n + m + i] = _BASIC
    tab.solve_basic()

    if needs_art.any():
        phase1 = np.concatenate([np.zeros(n + m), np.ones(m)])
        tab.run(phase1, max_iter)
        infeas = float(tab.x[n + m:].sum())
        if infeas > 1e-7 * (1.0 + float(np.abs(b).max(initial=0.0))):
            return LpSolution(INFEASIBLE, tab.x[:n].copy(), math.inf, np.zeros(m), np.zeros(n),
                              iterations=tab.iterations)
    # artificials are pinned at zero for phase two
    tab.ub[n + m:] = 0.0
    for k in range(n + m, n + 2 * m):
        if tab.state[k] != _BASIC:
            tab.x[k] = 0.0
            tab.state[k] = _AT_LB
    tab.solve_basic()

    full_c = np.concatenate([c, np.zeros(2 * m)])
    status = tab.run(full_c, max_iter)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, tab.x[:n].copy(), -math.inf, np.zeros(m), np.zeros(n),
                          iterations=tab.iterations)
    y = tab.duals(full_c)
    x = tab.x[:n].copy()
    d = c - A.T @ y
    return LpSolution(OPTIMAL, x, float(c @ x) + model.obj_constant, y, d,
                      iterations=tab.iterations)
