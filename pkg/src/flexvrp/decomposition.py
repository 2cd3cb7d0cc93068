"""Generalized Benders (GBD) and Benders dual decomposition (BDD) loops.

Both methods share the master (routing and complementarity binaries plus
Theta, the second-stage estimate) and the primal subproblem, whose copy-row
duals give the multipliers lambda.  GBD cuts are the LP-duality supporting
planes of the subproblem value.  BDD first runs cuts off the LP relaxation of
the master, then replaces each optimality cut by its Lagrangian
strengthening: the constant comes from the subproblem with binary copies and
the copy rows priced at lambda instead of enforced.

Cut sign conventions follow the kernel's dual convention (see milp): lambda
on an equality copy row is the derivative of the subproblem value with
respect to the pinned master value.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .errors import InternalError, LimitReached, NotACut
from .formulations import (
    VarMap, build_fsp, build_lsp, build_mp, build_psp, extract_routes, first_stage_cost,
    point_from,
)
from .milp import MipLimits, add_constraint, solve_lp, solve_mip
from .model import Instance, require_valid
from .report import RunReport

OPTIMALITY = "optimality"
FEASIBILITY = "feasibility"
FRACTIONAL = "fractional"
INTEGER = "integer"
CLASSIC = "classic"
STRENGTHENED = "strengthened"

CUT_TOL = 1e-9
SUB_LIMITS = MipLimits(rel_gap=1e-10, abs_gap=1e-9)


@dataclass
class Multipliers:
    lambda_x: Dict[tuple, float]
    lambda_omega: Dict[tuple, float]

    @classmethod
    def zero(cls, x_keys, omega_keys) -> "Multipliers":
        return cls({k: 0.0 for k in x_keys}, {k: 0.0 for k in omega_keys})

    @classmethod
    def from_duals(cls, duals, vm: VarMap) -> "Multipliers":
        return cls({k: float(duals[r]) for k, r in vm.copy_rows_x.items()},
                   {k: float(duals[r]) for k, r in vm.copy_rows_omega.items()})

    def dot(self, x, omega) -> float:
        return (sum(v * x[k] for k, v in self.lambda_x.items())
                + sum(v * omega[k] for k, v in self.lambda_omega.items()))


@dataclass
class Cut:
    """theta_coef * Theta + sum coef_x * x + sum coef_omega * omega >= rhs."""

    kind: str
    theta_coef: float
    coef_x: Dict[tuple, float]
    coef_omega: Dict[tuple, float]
    rhs: float
    iteration: int = 0
    phase: str = INTEGER
    source: str = CLASSIC

    def lhs(self, theta: float, x, omega) -> float:
        return (self.theta_coef * theta
                + sum(c * x[k] for k, c in self.coef_x.items())
                + sum(c * omega[k] for k, c in self.coef_omega.items()))

    def violation(self, theta: float, x, omega) -> float:
        return max(0.0, self.rhs - self.lhs(theta, x, omega))

    def terms(self, vm: VarMap) -> Dict[int, float]:
        out = {vm.x[k]: c for k, c in self.coef_x.items() if c != 0.0}
        out.update({vm.omega[k]: c for k, c in self.coef_omega.items() if c != 0.0})
        if self.theta_coef:
            out[vm.theta] = self.theta_coef
        return out

    def key(self) -> tuple:
        r = lambda v: round(v, 9)  # noqa: E731
        return (self.kind, r(self.theta_coef),
                tuple(sorted((k, r(c)) for k, c in self.coef_x.items() if r(c) != 0.0)),
                tuple(sorted((k, r(c)) for k, c in self.coef_omega.items() if r(c) != 0.0)),
                r(self.rhs))

    def to_line(self) -> str:
        parts = [self.kind, str(self.iteration), self.phase, self.source, f"theta={self.theta_coef:g}"]
        parts += ["x_%d_%d_%d=%.12g" % (*k, c) for k, c in sorted(self.coef_x.items()) if c != 0.0]
        parts += ["omega_%d_%d=%.12g" % (*k, c) for k, c in sorted(self.coef_omega.items()) if c != 0.0]
        parts.append(f"rhs={self.rhs:.12g}")
        return " ".join(parts)


def dump_cuts(cuts: List[Cut]) -> str:
    return "".join(c.to_line() + "\n" for c in cuts)


@dataclass
class SubproblemOutcome:
    """Solved LSP or FSP: proven bound without the constant lambda'(x*, omega*) part."""

    bound: float
    objective: float
    X: Dict[tuple, float]
    Omega: Dict[tuple, float]
    eta_sum: float = 0.0
    slack_sum: float = 0.0


@dataclass
class DecompositionOptions:
    gap: float = 1e-4
    max_iters: int = 200
    backend: Optional[str] = None
    frac_max_cuts: int = 50
    frac_stall: int = 3
    frac_tol: float = 1e-6
    time_limit: Optional[float] = None
    # False gives the bare master (flow and visit rows only); see build_mp.
    tightened_master: bool = True


def _classic(kind, lam: Multipliers, value: float, x_star, omega_star, iteration, phase) -> Cut:
    # Theta >= v + lambda'(x - x*)   or   0 >= w + lambda'(x - x*)
    return Cut(kind, 1.0 if kind == OPTIMALITY else 0.0,
               {k: -v for k, v in lam.lambda_x.items()},
               {k: -v for k, v in lam.lambda_omega.items()},
               value - lam.dot(x_star, omega_star), iteration, phase, CLASSIC)


def make_optimality_cut(lsp: SubproblemOutcome, lam: Multipliers, varmap: Optional[VarMap] = None,
                        iteration: int = 0, phase: str = INTEGER) -> Cut:
    """Theta - lambda'x - lambda_w'omega >= sum eta - lambda'X - lambda_w'Omega at the LSP optimum.

    The right-hand side is taken from the LSP's proven bound, which equals the
    incumbent's value up to the solve gap and keeps the cut valid regardless.
    """
    return Cut(OPTIMALITY, 1.0,
               {k: -v for k, v in lam.lambda_x.items()},
               {k: -v for k, v in lam.lambda_omega.items()},
               lsp.bound, iteration, phase, STRENGTHENED)


def make_feasibility_cut(fsp: SubproblemOutcome, lam: Multipliers, varmap: Optional[VarMap] = None,
                         iteration: int = 0, phase: str = INTEGER,
                         x_star=None, omega_star=None) -> Cut:
    """0 >= sum S + lambda'(x - X) + lambda_w'(omega - Omega) at the FSP optimum.

    Raises NotACut when the slack mass is zero, or when the cut does not
    separate the generating point (x_star, omega_star) if given.
    """
    if fsp.slack_sum <= CUT_TOL:
        raise NotACut("feasibility subproblem has zero slack mass")
    cut = Cut(FEASIBILITY, 0.0,
              {k: -v for k, v in lam.lambda_x.items()},
              {k: -v for k, v in lam.lambda_omega.items()},
              fsp.bound, iteration, phase, STRENGTHENED)
    if x_star is not None and cut.violation(0.0, x_star, omega_star) <= CUT_TOL:
        raise NotACut("strengthened feasibility cut does not separate the master point")
    return cut


def _solve_priced(model, vm: VarMap, lam: Multipliers, x_star, omega_star, backend) -> SubproblemOutcome:
    sol = solve_mip(model, SUB_LIMITS, backend)
    if not sol.optimal:
        raise InternalError(f"priced subproblem reported {sol.status}")
    const = lam.dot(x_star, omega_star)
    X = point_from(sol.x, vm.X)
    Om = point_from(sol.x, vm.Omega)
    return SubproblemOutcome(
        bound=sol.bound - const,
        objective=sol.objective - const,
        X=X, Omega=Om,
        eta_sum=float(sum(sol.x[i] for i in vm.eta.values())),
        slack_sum=float(sum(sol.x[i] for i in vm.slack_ids())),
    )


def solve_lsp(inst: Instance, lam: Multipliers, x_star, omega_star, backend=None) -> SubproblemOutcome:
    model, vm = build_lsp(inst, lam, x_star, omega_star)
    return _solve_priced(model, vm, lam, x_star, omega_star, backend)


def solve_fsp(inst: Instance, lam: Multipliers, x_star, omega_star, backend=None) -> SubproblemOutcome:
    model, vm = build_fsp(inst, lam, x_star, omega_star)
    return _solve_priced(model, vm, lam, x_star, omega_star, backend)


def compute_xi(inst: Instance, lambda_hat: Multipliers, x_star, omega_star, backend=None) -> float:
    """Integer minus LP-relaxed optimum of the Lagrangian subproblem at lambda_hat."""
    model, _ = build_lsp(inst, lambda_hat, x_star, omega_star)
    mip = solve_mip(model, SUB_LIMITS, backend)
    lp = solve_lp(model, backend)
    if not (mip.optimal and lp.optimal):
        raise InternalError(f"Lagrangian subproblem reported {mip.status}/{lp.status}")
    return float(mip.objective - lp.objective)


def _psp(inst, x_star, omega_star, backend):
    model, vm = build_psp(inst, x_star, omega_star)
    return solve_lp(model, backend), vm


def _fsp_lp(inst, x_star, omega_star, backend):
    """Phase-one style FSP with copies pinned; its duals give the classic feasibility cut."""
    model, vm = build_fsp(inst, None, x_star, omega_star, integer_copies=False)
    lp = solve_lp(model, backend)
    if not lp.optimal:
        raise InternalError(f"feasibility subproblem reported {lp.status}")
    return lp, vm


class _Loop:
    """State shared by both methods: master model, cut log, bounds and incumbent."""

    def __init__(self, inst: Instance, opts: DecompositionOptions, method: str):
        require_valid(inst)
        self.inst, self.opts, self.method = inst, opts, method
        self.t0 = time.perf_counter()
        self.mp, self.mvm = build_mp(inst, tightened=opts.tightened_master)
        self.cuts: List[Cut] = []
        self.seen = set()
        self.lb, self.ub = -math.inf, math.inf
        self.lb_trace: List[float] = []
        self.ub_trace: List[float] = []
        self.best = None
        self.xi: List[float] = []
        self.xi_checks: List[dict] = []

    def add(self, cut: Cut) -> bool:
        key = cut.key()
        if key in self.seen:
            return False
        self.seen.add(key)
        self.cuts.append(cut)
        self.mp = add_constraint(self.mp, (cut.terms(self.mvm), ">=", cut.rhs))
        return True

    def master_point(self, values, integral: bool):
        return (point_from(values, self.mvm.x, integral),
                point_from(values, self.mvm.omega, integral))

    def converged(self) -> bool:
        if not math.isfinite(self.ub):
            return False
        return self.ub - self.lb <= self.opts.gap * max(1.0, abs(self.ub))

    def record(self, bound: float):
        self.lb = max(self.lb, bound)
        self.lb_trace.append(self.lb)
        self.ub_trace.append(self.ub)

    def check_limits(self, it: int):
        over_time = (self.opts.time_limit is not None
                     and time.perf_counter() - self.t0 > self.opts.time_limit)
        if it >= self.opts.max_iters or over_time:
            raise LimitReached(f"{self.method}: stopped after {it} iterations without closing the gap",
                               incumbent=self.ub, bound=self.lb,
                               trace=list(zip(self.lb_trace, self.ub_trace)))

    def master(self, integral=True):
        if integral:
            sol = solve_mip(self.mp, None, self.opts.backend)
            if not sol.optimal:
                raise InternalError(f"master reported {sol.status}")
            return sol, sol.bound
        lp = solve_lp(self.mp, self.opts.backend)
        if not lp.optimal:
            raise InternalError(f"master relaxation reported {lp.status}")
        return lp, lp.objective

    def evaluate(self, x_star, omega_star, integral: bool):
        """Solve the primal subproblem; a feasible integral point may improve the incumbent."""
        lp, vm = _psp(self.inst, x_star, omega_star, self.opts.backend)
        if lp.optimal and integral:
            total = first_stage_cost(self.inst, x_star) + lp.objective
            if total < self.ub:
                self.ub = total
                self.best = (dict(x_star), dict(omega_star), lp, vm)
        return lp, vm

    def report(self, iterations: int, fractional: int = 0) -> RunReport:
        if self.best is None:
            raise InternalError("no feasible master point found")
        x, omega, lp, vm = self.best
        routes = extract_routes(lp.x, vm, self.inst)
        served = routes.served
        return RunReport(
            method=self.method,
            objective=float(self.ub),
            routes=routes.routes,
            q={j: float(lp.x[vm.q[j]]) for j in served},
            delta={j: float(lp.x[vm.delta[j]]) for j in served},
            t={j: float(lp.x[vm.t[j]]) for j in served},
            lb_trace=self.lb_trace,
            ub_trace=self.ub_trace,
            iterations=iterations,
            fractional_iterations=fractional,
            cuts=self.cuts,
            xi=self.xi,
            xi_checks=self.xi_checks,
            wall_time=time.perf_counter() - self.t0,
            first_stage=first_stage_cost(self.inst, x),
            x=x,
            omega=omega,
        )


def _classic_cut(loop: _Loop, x_star, omega_star, it: int, phase: str):
    lp, vm = loop.evaluate(x_star, omega_star, integral=phase == INTEGER)
    if lp.optimal:
        lam = Multipliers.from_duals(lp.duals, vm)
        return _classic(OPTIMALITY, lam, lp.objective, x_star, omega_star, it, phase), lp, lam
    flp, fvm = _fsp_lp(loop.inst, x_star, omega_star, loop.opts.backend)
    lam = Multipliers.from_duals(flp.duals, fvm)
    return _classic(FEASIBILITY, lam, flp.objective, x_star, omega_star, it, phase), None, lam


def run_gbd(inst: Instance, opts: Optional[DecompositionOptions] = None) -> RunReport:
    """Classic Benders over the integer master with LP-dual cuts."""
    opts = opts or DecompositionOptions()
    loop = _Loop(inst, opts, "gbd")
    it = 0
    while True:
        loop.check_limits(it)
        it += 1
        sol, bound = loop.master()
        x_star, omega_star = loop.master_point(sol.x, True)
        cut, _, _ = _classic_cut(loop, x_star, omega_star, it, INTEGER)
        loop.add(cut)
        loop.record(bound)
        if loop.converged():
            break
    return loop.report(it)


def _fractional_phase(loop: _Loop) -> int:
    """Cuts from the master's LP relaxation until its bound stalls."""
    opts = loop.opts
    history: List[float] = []
    count = 0
    while count < opts.frac_max_cuts:
        lp, bound = loop.master(integral=False)
        history.append(bound)
        if len(history) > opts.frac_stall:
            old = history[-1 - opts.frac_stall]
            if bound - old < opts.frac_tol * max(1.0, abs(old)):
                break
        x_star, omega_star = loop.master_point(lp.x, False)
        theta = float(lp.x[loop.mvm.theta])
        cut, _, _ = _classic_cut(loop, x_star, omega_star, count + 1, FRACTIONAL)
        if cut.violation(theta, x_star, omega_star) <= CUT_TOL or not loop.add(cut):
            break
        count += 1
    return count


def run_bdd(inst: Instance, opts: Optional[DecompositionOptions] = None) -> RunReport:
    """LP-master warm start, then Lagrangian-strengthened cuts over the integer master."""
    opts = opts or DecompositionOptions()
    loop = _Loop(inst, opts, "bdd")
    fractional = _fractional_phase(loop)
    it = 0
    while True:
        loop.check_limits(it)
        it += 1
        sol, bound = loop.master()
        x_star, omega_star = loop.master_point(sol.x, True)
        classic, psp, lam = _classic_cut(loop, x_star, omega_star, it, INTEGER)
        if psp is not None:
            lsp_model, lvm = build_lsp(inst, lam, x_star, omega_star)
            outcome = _solve_priced(lsp_model, lvm, lam, x_star, omega_star, opts.backend)
            cut = make_optimality_cut(outcome, lam, iteration=it)
            relaxed = solve_lp(lsp_model, opts.backend)
            xi = outcome.objective + lam.dot(x_star, omega_star) - relaxed.objective
            loop.xi.append(float(xi))
            loop.xi_checks.append({"iteration": it, "xi": float(xi),
                                   "rhs_difference": cut.rhs - classic.rhs})
        else:
            try:
                outcome = solve_fsp(inst, lam, x_star, omega_star, opts.backend)
                cut = make_feasibility_cut(outcome, lam, iteration=it,
                                           x_star=x_star, omega_star=omega_star)
            except NotACut:
                cut = classic
        loop.add(cut)
        loop.record(bound)
        if loop.converged():
            break
    return loop.report(it, fractional)
