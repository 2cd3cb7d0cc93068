"""LP/MIP kernel.

Two interchangeable backends sit behind ``solve_lp``/``solve_mip``:
``"native"`` (dense bounded-variable simplex plus best-bound branch and bound,
written for this package) and ``"highs"`` (the HiGHS solver).  The
decomposition loops default to HiGHS for speed; the native kernel is the
reference the test-suite cross-checks it against.
"""

from __future__ import annotations

from typing import Optional

from ..errors import ModelError
from . import bnb, highs, simplex
from .model import EQ, GE, LE, LinearModel, Row, Variable, add_constraint, dump_lp
from .solution import (
    FEAS_TOL, INFEASIBLE, INT_TOL, OPTIMAL, REL_GAP, UNBOUNDED,
    LpSolution, MipLimits, MipSolution, dual_objective, lp_certificate,
)

DEFAULT_BACKEND = "highs"
BACKENDS = ("highs", "native")


def _backend(name: Optional[str]) -> str:
    name = name or DEFAULT_BACKEND
    if name not in BACKENDS:
        raise ModelError(f"unknown backend {name!r}")
    return name


def solve_lp(model: LinearModel, backend: Optional[str] = None) -> LpSolution:
    """Solve the LP relaxation of model (integrality flags are ignored)."""
    model.check()
    if _backend(backend) == "native":
        return simplex.solve_lp(model)
    return highs.solve_lp(model)


def solve_mip(model: LinearModel, limits: Optional[MipLimits] = None,
              backend: Optional[str] = None) -> MipSolution:
    """Solve model to proven optimality within limits.rel_gap or raise LimitReached."""
    model.check()
    limits = limits or MipLimits()
    if _backend(backend) == "native":
        return bnb.solve_mip(model, limits)
    return highs.solve_mip(model, limits)


__all__ = [
    "EQ", "GE", "LE", "LinearModel", "Row", "Variable", "add_constraint", "dump_lp",
    "LpSolution", "MipSolution", "MipLimits", "solve_lp", "solve_mip",
    "dual_objective", "lp_certificate", "OPTIMAL", "INFEASIBLE", "UNBOUNDED",
    "FEAS_TOL", "INT_TOL", "REL_GAP", "DEFAULT_BACKEND", "BACKENDS",
]
