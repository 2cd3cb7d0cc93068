"""Result types and optimality certificates for the LP/MIP kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import EQ, GE, LE, LinearModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-7
INT_TOL = 1e-6
REL_GAP = 1e-6


@dataclass
class LpSolution:
    """Duals follow the minimisation convention: <= rows <= 0, >= rows >= 0.

    reduced_costs = c - A'duals.
    """

    status: str
    x: np.ndarray
    objective: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class MipSolution:
    status: str
    x: np.ndarray
    objective: float
    node_count: int
    gap: float
    bound: float

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class MipLimits:
    node_limit: Optional[int] = None
    time_limit: Optional[float] = None
    rel_gap: float = REL_GAP
    abs_gap: float = 1e-9


def dual_objective(model: LinearModel, duals, reduced_costs) -> float:
    """b'y plus the bound terms picked by the sign of each reduced cost."""
    lb, ub = model.bounds()
    b = np.array([r.rhs for r in model.rows])
    val = float(b @ duals) if len(b) else 0.0
    d = np.asarray(reduced_costs)
    for j in range(model.num_vars):
        if d[j] > 0:
            val += d[j] * lb[j] if math.isfinite(lb[j]) else math.inf
        elif d[j] < 0:
            val += d[j] * ub[j] if math.isfinite(ub[j]) else -math.inf
    return val + model.obj_constant


def lp_certificate(model: LinearModel, sol: LpSolution) -> dict:
    """Primal feasibility, dual sign, complementary slackness and duality gap.

    Each entry is a nonnegative violation; all are ~0 for a correct optimum.
    """
    x = sol.x
    y = np.asarray(sol.duals)
    lb, ub = model.bounds()
    A = model.matrix()
    c = model.cost_vector()
    d = c - A.T @ y
    ax = A @ x
    primal = model.max_violation(x)

    sign = 0.0
    comp = 0.0
    for i, r in enumerate(model.rows):
        if r.sense == LE:
            sign = max(sign, y[i])
        elif r.sense == GE:
            sign = max(sign, -y[i])
        if r.sense != EQ:
            comp = max(comp, abs(y[i] * (ax[i] - r.rhs)))
    for j in range(model.num_vars):
        at_lb = math.isfinite(lb[j]) and abs(x[j] - lb[j]) <= FEAS_TOL
        at_ub = math.isfinite(ub[j]) and abs(x[j] - ub[j]) <= FEAS_TOL
        if d[j] > 0 and not at_lb:
            comp = max(comp, abs(d[j] * (x[j] - lb[j])) if math.isfinite(lb[j]) else abs(d[j]))
        if d[j] < 0 and not at_ub:
            comp = max(comp, abs(d[j] * (ub[j] - x[j])) if math.isfinite(ub[j]) else abs(d[j]))
    primal_obj = model.objective_value(x)
    gap = abs(primal_obj - dual_objective(model, y, d))
    return {
        "primal": primal,
        "dual_sign": sign,
        "complementarity": comp,
        "gap": gap,
        "reduced_cost_mismatch": float(np.max(np.abs(d - sol.reduced_costs), initial=0.0)),
    }
