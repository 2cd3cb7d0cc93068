"""HiGHS backend (through highspy) for LP and MIP solves."""

from __future__ import annotations

import math

import highspy
import numpy as np

from ..errors import LimitReached, NumericalFailure
from .model import LinearModel
from .solution import INFEASIBLE, OPTIMAL, UNBOUNDED, LpSolution, MipLimits, MipSolution

_INF = highspy.kHighsInf
_Status = highspy.HighsModelStatus


def _clip(a):
    a = np.asarray(a, dtype=float).copy()
    a[a == math.inf] = _INF
    a[a == -math.inf] = -_INF
    return a


def _make(model: LinearModel, integer: bool, options: dict) -> highspy.Highs:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("dual_feasibility_tolerance", 1e-9)
    for k, v in options.items():
        h.setOptionValue(k, v)
    lp = highspy.HighsLp()
    lp.num_col_ = model.num_vars
    lp.num_row_ = model.num_rows
    lp.col_cost_ = model.cost_vector()
    lp.offset_ = model.obj_constant
    lb, ub = model.bounds()
    lp.col_lower_ = _clip(lb)
    lp.col_upper_ = _clip(ub)
    lo, hi = model.row_bounds()
    lp.row_lower_ = _clip(lo)
    lp.row_upper_ = _clip(hi)
    A = model.matrix()
    lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
    lp.a_matrix_.start_ = A.indptr.astype(np.int32)
    lp.a_matrix_.index_ = A.indices.astype(np.int32)
    lp.a_matrix_.value_ = A.data
    lp.a_matrix_.num_col_ = model.num_vars
    lp.a_matrix_.num_row_ = model.num_rows
    if integer:
        kinds = [highspy.HighsVarType.kInteger if v.integer else highspy.HighsVarType.kContinuous
                 for v in model.variables]
        if any(v.integer for v in model.variables):
            lp.integrality_ = kinds
    h.passModel(lp)
    return h


def _disambiguate(model, integer, options):
    """Re-run without presolve to split 'unbounded or infeasible'."""
    h = _make(model, integer, dict(options, presolve="off"))
    h.run()
    return h


def solve_lp(model: LinearModel) -> LpSolution:
    h = _make(model, False, {"solver": "simplex"})
    h.run()
    st = h.getModelStatus()
    if st == _Status.kUnboundedOrInfeasible:
        h = _disambiguate(model, False, {"solver": "simplex"})
        st = h.getModelStatus()
    n, m = model.num_vars, model.num_rows
    if st == _Status.kInfeasible:
        return LpSolution(INFEASIBLE, np.full(n, np.nan), math.inf, np.zeros(m), np.zeros(n))
    if st == _Status.kUnbounded:
        return LpSolution(UNBOUNDED, np.full(n, np.nan), -math.inf, np.zeros(m), np.zeros(n))
    if st != _Status.kOptimal:
        raise NumericalFailure(f"HiGHS LP status {h.modelStatusToString(st)}",
                               {"status": h.modelStatusToString(st)})
    sol = h.getSolution()
    x = np.array(sol.col_value)
    info = h.getInfo()
    return LpSolution(OPTIMAL, x, float(info.objective_function_value),
                      np.array(sol.row_dual), np.array(sol.col_dual),
                      iterations=int(info.simplex_iteration_count))


def solve_mip(model: LinearModel, limits: MipLimits) -> MipSolution:
    opts = {"mip_rel_gap": limits.rel_gap, "mip_abs_gap": limits.abs_gap,
            "mip_feasibility_tolerance": 1e-7}
    if limits.time_limit is not None:
        opts["time_limit"] = float(limits.time_limit)
    if limits.node_limit is not None:
        opts["mip_max_nodes"] = int(limits.node_limit)
    h = _make(model, True, opts)
    h.run()
    st = h.getModelStatus()
    if st == _Status.kUnboundedOrInfeasible:
        h = _disambiguate(model, True, opts)
        st = h.getModelStatus()
    info = h.getInfo()
    n = model.num_vars
    nodes = int(getattr(info, "mip_node_count", 0))
    if st == _Status.kInfeasible:
        return MipSolution(INFEASIBLE, np.full(n, np.nan), math.inf, nodes, math.inf, math.inf)
    if st == _Status.kUnbounded:
        return MipSolution(UNBOUNDED, np.full(n, np.nan), -math.inf, nodes, math.inf, -math.inf)
    has_sol = info.primal_solution_status == 2
    x = np.array(h.getSolution().col_value) if has_sol else np.full(n, np.nan)
    obj = float(info.objective_function_value) if has_sol else math.inf
    bound = float(info.mip_dual_bound) if any(v.integer for v in model.variables) else obj
    if st != _Status.kOptimal:
        raise LimitReached(f"MIP stopped with status {h.modelStatusToString(st)}",
                           incumbent=x if has_sol else None, bound=bound)
    gap = float(info.mip_gap) if any(v.integer for v in model.variables) else 0.0
    return MipSolution(OPTIMAL, x, obj, max(nodes, 1), gap, bound)
