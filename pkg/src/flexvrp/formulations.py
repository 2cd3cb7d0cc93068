"""Builders mapping an Instance to each optimisation model of the method.

Index conventions shared by every builder:

* routing binaries are keyed ``(i, j, k)`` over ``inst.arcs`` and vehicles k;
* complementarity binaries are keyed ``(j, m)`` for customer j, where m = 1
  pairs ``delta_bar - delta`` with ``u``, m = 2 pairs ``delta`` with
  ``sigma``, and m = 3 + n pairs segment n's epigraph slack with ``mu_n``.

The single-level model (P2) keeps everything; the Benders master keeps the
routing and complementarity binaries plus Theta; the subproblems work on
copies (``X``, ``Omega``) of the master binaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import InternalError, ModelError
from .milp import LinearModel
from .model import Instance, validate_instance

ArcKey = Tuple[int, int, int]
OmegaKey = Tuple[int, int]

SLACK_FAMILIES = tuple(range(1, 22))


@dataclass
class BigM:
    m_time: float
    m_comp_delta: float
    m_comp_dual: float
    m_eta: float
    m_comp_seg: float

    @classmethod
    def for_instance(cls, inst: Instance) -> "BigM":
        T = inst.travel_time
        cust = inst.customers
        fns = [inst.inconvenience[j] for j in cust]
        max_tau = max((inst.tau[j] for j in cust), default=0.0)
        dbar = max((f.delta_bar for f in fns), default=0.0)
        max_slope = max((f.max_abs_slope for f in fns), default=0.0)
        m_dual = inst.q_max + max_slope + 1.0
        m_eta = 0.0
        m_seg = 0.0
        for f in fns:
            lo, hi = f.value_range()
            m_eta = max(m_eta, hi + m_dual * f.delta_bar + f.max_abs_intercept)
            for g, c in f.segments:
                for d in (0.0, f.delta_bar):
                    m_seg = max(m_seg, f(d) - (g * d + c))
        return cls(
            m_time=max_tau + dbar + float(T.max(initial=0.0)),
            m_comp_delta=dbar,
            m_comp_dual=m_dual,
            m_eta=m_eta,
            m_comp_seg=m_seg,
        )


@dataclass
class VarMap:
    x: Dict[ArcKey, int] = field(default_factory=dict)
    omega: Dict[OmegaKey, int] = field(default_factory=dict)
    X: Dict[ArcKey, int] = field(default_factory=dict)
    Omega: Dict[OmegaKey, int] = field(default_factory=dict)
    t: Dict[int, int] = field(default_factory=dict)
    q: Dict[int, int] = field(default_factory=dict)
    delta: Dict[int, int] = field(default_factory=dict)
    z: Dict[int, int] = field(default_factory=dict)
    u: Dict[int, int] = field(default_factory=dict)
    sigma: Dict[int, int] = field(default_factory=dict)
    mu: Dict[Tuple[int, int], int] = field(default_factory=dict)
    eta: Dict[int, int] = field(default_factory=dict)
    theta: Optional[int] = None
    slacks: Dict[int, Dict[tuple, int]] = field(default_factory=dict)
    copy_rows_x: Dict[ArcKey, int] = field(default_factory=dict)
    copy_rows_omega: Dict[OmegaKey, int] = field(default_factory=dict)
    bigm: Optional[BigM] = None

    @property
    def routing(self) -> Dict[ArcKey, int]:
        return self.x if self.x else self.X

    @property
    def complementarity(self) -> Dict[OmegaKey, int]:
        return self.omega if self.omega else self.Omega

    def all_ids(self) -> List[int]:
        ids = []
        for name in ("x", "omega", "X", "Omega", "t", "q", "delta", "z", "u", "sigma", "mu", "eta"):
            ids.extend(getattr(self, name).values())
        if self.theta is not None:
            ids.append(self.theta)
        for fam in self.slacks.values():
            ids.extend(fam.values())
        return ids

    def slack_ids(self) -> List[int]:
        return [v for fam in self.slacks.values() for v in fam.values()]


def arc_keys(inst: Instance) -> List[ArcKey]:
    return [(i, j, k) for k in range(inst.vehicles) for (i, j) in inst.arcs]


def omega_keys(inst: Instance) -> List[OmegaKey]:
    keys = []
    for j in inst.customers:
        nseg = len(inst.inconvenience[j].segments)
        keys.extend((j, m) for m in range(1, 3 + nseg))
    return keys


def first_stage_cost(inst: Instance, x: Mapping[ArcKey, float]) -> float:
    return float(sum(inst.arc_cost(i, j) * v for (i, j, _), v in x.items()))


def _check(inst: Instance):
    problems = validate_instance(inst)
    if problems:
        raise ModelError("invalid instance: " + "; ".join(problems))


# building blocks -------------------------------------------------------------

def _routing_vars(m: LinearModel, inst: Instance, prefix: str, integer: bool) -> Dict[ArcKey, int]:
    return {(i, j, k): m.add_var(f"{prefix}_{i}_{j}_{k}", 0.0, 1.0, integer)
            for (i, j, k) in arc_keys(inst)}


def _omega_vars(m: LinearModel, inst: Instance, prefix: str, integer: bool) -> Dict[OmegaKey, int]:
    return {(j, mm): m.add_var(f"{prefix}_{j}_{mm}", 0.0, 1.0, integer)
            for (j, mm) in omega_keys(inst)}


def _slack(m: LinearModel, vm: VarMap, family: int, key: tuple) -> int:
    name = f"S{family}_" + "_".join(str(k) for k in key)
    sid = m.add_var(name, 0.0, math.inf)
    vm.slacks.setdefault(family, {})[key] = sid
    return sid


def _flow_and_visit(m: LinearModel, inst: Instance, x: Dict[ArcKey, int],
                    vm: Optional[VarMap] = None) -> None:
    """Flow conservation per node and vehicle, and visit-at-most-once.

    With vm given, the rows are relaxed by the feasibility slacks S15/S16/S17.
    """
    s, e = inst.start, inst.end
    for k in range(inst.vehicles):
        for i in range(inst.n):
            terms: Dict[int, float] = {}
            for (a, b, kk), vid in x.items():
                if kk != k:
                    continue
                if a == i:
                    terms[vid] = terms.get(vid, 0.0) + 1.0
                if b == i:
                    terms[vid] = terms.get(vid, 0.0) - 1.0
            rhs = 1.0 if i == s else (-1.0 if i == e else 0.0)
            if vm is None:
                m.add_row(terms, "==", rhs, f"flow_{i}_{k}")
            else:
                s15 = _slack(m, vm, 15, (i, k))
                s16 = _slack(m, vm, 16, (i, k))
                m.add_row({**terms, s15: -1.0}, "<=", rhs, f"flow_le_{i}_{k}")
                m.add_row({**terms, s16: 1.0}, ">=", rhs, f"flow_ge_{i}_{k}")
    for j in inst.customers:
        terms = {vid: 1.0 for (a, b, k), vid in x.items() if a == j}
        if vm is None:
            m.add_row(terms, "<=", 1.0, f"visit_{j}")
        else:
            s17 = _slack(m, vm, 17, (j,))
            m.add_row({**terms, s17: -1.0}, "<=", 1.0, f"visit_{j}")


def _second_stage(m: LinearModel, inst: Instance, bigm: BigM, vm: VarMap,
                  x: Dict[ArcKey, int], omega: Dict[OmegaKey, int], relax: bool = False) -> None:
    """Time propagation, flexible windows, lower-level KKT and the eta linearisation.

    relax=True gives the feasibility-subproblem variant: every row family
    gets a nonnegative slack (S1..S14 as numbered in the method, S18..S21 for
    the per-segment rows) and the sign bounds on delta, u, sigma become rows.
    """
    s = inst.start
    cust = inst.customers
    M = bigm

    for v in range(inst.n):
        if v != s:
            vm.t[v] = m.add_var(f"t_{v}", 0.0, M.m_time)

    for j in cust:
        f = inst.inconvenience[j]
        zlo, zhi = f.value_range()
        vm.q[j] = m.add_var(f"q_{j}", 0.0, inst.q_max)
        if relax:
            vm.delta[j] = m.add_var(f"delta_{j}", -math.inf, math.inf)
            vm.u[j] = m.add_var(f"u_{j}", -math.inf, math.inf)
            vm.sigma[j] = m.add_var(f"sigma_{j}", -math.inf, math.inf)
        else:
            vm.delta[j] = m.add_var(f"delta_{j}", 0.0, f.delta_bar)
            vm.u[j] = m.add_var(f"u_{j}", 0.0, math.inf)
            vm.sigma[j] = m.add_var(f"sigma_{j}", 0.0, math.inf)
        vm.z[j] = m.add_var(f"z_{j}", zlo, zhi)
        for n in range(len(f.segments)):
            vm.mu[j, n] = m.add_var(f"mu_{j}_{n}", 0.0, 1.0)
        vm.eta[j] = m.add_var(f"eta_{j}", 0.0, math.inf)

    def row(terms, sense, rhs, name, family=None, key=None):
        # a relaxed >= row gains +S, a relaxed <= row gains -S
        if relax and family is not None:
            sid = _slack(m, vm, family, key)
            terms = dict(terms)
            terms[sid] = terms.get(sid, 0.0) + (1.0 if sense == ">=" else -1.0)
        m.add_row(terms, sense, rhs, name)

    # time propagation: t_j >= t_i + T_ij - M (1 - x_ijk)
    T = inst.travel_time
    for (i, j, k), xid in x.items():
        terms = {vm.t[j]: 1.0, xid: -M.m_time}
        if i != s:
            terms[vm.t[i]] = terms.get(vm.t[i], 0.0) - 1.0
        row(terms, ">=", T[i, j] - M.m_time, f"time_{i}_{j}_{k}", 1, (i, j, k))

    for j in cust:
        f = inst.inconvenience[j]
        tj, qj, dj, zj, uj, sj, ej = (vm.t[j], vm.q[j], vm.delta[j], vm.z[j], vm.u[j],
                                      vm.sigma[j], vm.eta[j])
        mus = [vm.mu[j, n] for n in range(len(f.segments))]
        # flexible window tau_j <= t_j <= tau_j + delta_j
        row({tj: 1.0}, ">=", inst.tau[j], f"win_lo_{j}", 2, (j,))
        row({tj: 1.0, dj: -1.0}, "<=", inst.tau[j], f"win_hi_{j}", 3, (j,))
        # stationarity of the epigraph LP: sum mu_n slope_n - q - sigma + u = 0
        stat = {qj: -1.0, sj: -1.0, uj: 1.0}
        for n, (g, _) in enumerate(f.segments):
            stat[mus[n]] = g
        if relax:
            row(stat, ">=", 0.0, f"stat_lo_{j}", 4, (j,))
            row(stat, "<=", 0.0, f"stat_hi_{j}", 5, (j,))
            row({mu: 1.0 for mu in mus}, ">=", 1.0, f"musum_lo_{j}", 18, (j,))
            row({mu: 1.0 for mu in mus}, "<=", 1.0, f"musum_hi_{j}", 19, (j,))
        else:
            m.add_row(stat, "==", 0.0, f"stat_{j}")
            m.add_row({mu: 1.0 for mu in mus}, "==", 1.0, f"musum_{j}")
        for n, (g, c) in enumerate(f.segments):
            m.add_row({zj: 1.0, dj: -g}, ">=", c, f"epi_{j}_{n}")

        w1, w2 = omega[j, 1], omega[j, 2]
        # 0 <= delta_bar - delta <= M w1 ;  0 <= u <= M (1 - w1)
        if relax:
            row({dj: -1.0}, ">=", -f.delta_bar, f"ub_gap_{j}", 6, (j,))
        row({dj: -1.0, w1: -M.m_comp_delta}, "<=", -f.delta_bar, f"ub_comp_{j}", 7, (j,))
        if relax:
            row({uj: 1.0}, ">=", 0.0, f"u_sign_{j}", 8, (j,))
        row({uj: 1.0, w1: M.m_comp_dual}, "<=", M.m_comp_dual, f"u_comp_{j}", 9, (j,))
        # 0 <= delta <= M w2 ;  0 <= sigma <= M (1 - w2)
        if relax:
            row({dj: 1.0}, ">=", 0.0, f"lb_gap_{j}", 10, (j,))
        row({dj: 1.0, w2: -M.m_comp_delta}, "<=", 0.0, f"lb_comp_{j}", 11, (j,))
        if relax:
            row({sj: 1.0}, ">=", 0.0, f"sigma_sign_{j}", 12, (j,))
        row({sj: 1.0, w2: M.m_comp_dual}, "<=", M.m_comp_dual, f"sigma_comp_{j}", 13, (j,))
        # segment n: z - slope_n delta - intercept_n <= M w_n ;  mu_n <= 1 - w_n
        for n, (g, c) in enumerate(f.segments):
            wn = omega[j, 3 + n]
            row({zj: 1.0, dj: -g, wn: -M.m_comp_seg}, "<=", c, f"seg_comp_{j}_{n}", 20, (j, n))
            row({mus[n]: 1.0, wn: 1.0}, "<=", 1.0, f"mu_comp_{j}_{n}", 21, (j, n))

        # eta_j >= z + u delta_bar - sum mu_n intercept_n - M (1 - served_j)
        terms = {ej: 1.0, zj: -1.0, uj: -f.delta_bar}
        for n, (_, c) in enumerate(f.segments):
            terms[mus[n]] = terms.get(mus[n], 0.0) + c
        for (a, b, k), xid in x.items():
            if b == j:
                terms[xid] = terms.get(xid, 0.0) - M.m_eta
        row(terms, ">=", -M.m_eta, f"eta_{j}", 14, (j,))


# public builders -------------------------------------------------------------

def build_p2(inst: Instance, bigm: Optional[BigM] = None) -> Tuple[LinearModel, VarMap]:
    """Single-level MIP: routing, flexible windows, follower KKT, linearised discounts."""
    _check(inst)
    bigm = bigm or BigM.for_instance(inst)
    m = LinearModel("P2")
    vm = VarMap(bigm=bigm)
    vm.x = _routing_vars(m, inst, "x", True)
    vm.omega = _omega_vars(m, inst, "omega", True)
    _flow_and_visit(m, inst, vm.x)
    _second_stage(m, inst, bigm, vm, vm.x, vm.omega)
    obj = {vid: inst.arc_cost(i, j) for (i, j, k), vid in vm.x.items()}
    obj.update({eid: 1.0 for eid in vm.eta.values()})
    m.set_objective(obj)
    return m, vm


def _master_valid_rows(m: LinearModel, inst: Instance, bigm: BigM, vm: VarMap) -> None:
    """Rows satisfied by every feasible point of the single-level model.

    The master gets its own service times and flexibilities.  Each
    complementarity binary left at 0 pins the flexibility: to a bound for
    m = 1, 2, and to the segment's active interval on the envelope for the
    segment binaries.  Times propagate along chosen arcs and must fall in
    [tau_j, tau_j + delta_j].  This removes disconnected customer cycles and
    (route, omega) pairs whose implied window cannot fit the route.
    """
    s = inst.start
    w = vm.omega
    for v in range(inst.n):
        if v != s and v not in inst.tau:
            vm.t[v] = m.add_var(f"t_{v}", 0.0, bigm.m_time)
    for j in inst.customers:
        f = inst.inconvenience[j]
        dbar = f.delta_bar
        tau = inst.tau[j]
        vm.t[j] = m.add_var(f"t_{j}", tau, tau + dbar)
        d = vm.delta[j] = m.add_var(f"delta_{j}", 0.0, dbar)
        m.add_row({vm.t[j]: 1.0, d: -1.0}, "<=", tau, f"win_{j}")
        m.add_row({d: 1.0, w[j, 2]: -dbar}, "<=", 0.0, f"at_zero_{j}")
        m.add_row({d: 1.0, w[j, 1]: dbar}, ">=", dbar, f"at_cap_{j}")
        segs = f.segments
        m.add_row({w[j, 3 + n]: 1.0 for n in range(len(segs))}, "<=", len(segs) - 1.0,
                  f"active_{j}")
        # q >= 0: unless u may be positive (delta at its cap), some active
        # segment must have a nonnegative slope
        rising = [n for n, (g, _) in enumerate(segs) if g >= 0]
        terms = {w[j, 3 + n]: -1.0 for n in rising}
        terms[w[j, 1]] = -1.0
        m.add_row(terms, ">=", -float(len(rising)), f"price_sign_{j}")
        for n in range(len(segs)):
            span = f.active_interval(n)
            wid = w[j, 3 + n]
            if span is None:
                m.add_row({wid: 1.0}, ">=", 1.0, f"never_active_{j}_{n}")
                continue
            lo, hi = span
            m.add_row({d: 1.0, wid: -(dbar - hi)}, "<=", hi, f"seg_hi_{j}_{n}")
            m.add_row({d: 1.0, wid: lo}, ">=", lo, f"seg_lo_{j}_{n}")
    # Per-arc big-M from the time bounds; arcs that can never fit are fixed off.
    T = inst.travel_time
    for (i, j, k), xid in vm.x.items():
        lo_i, hi_i = (0.0, 0.0) if i == s else (m.variables[vm.t[i]].lb, m.variables[vm.t[i]].ub)
        lo_j = m.variables[vm.t[j]].lb
        big = max(0.0, hi_i + T[i, j] - lo_j)
        if lo_i + T[i, j] > m.variables[vm.t[j]].ub + 1e-9:
            m.add_row({xid: 1.0}, "<=", 0.0, f"unreachable_{i}_{j}_{k}")
            continue
        terms = {vm.t[j]: 1.0, xid: -big}
        if i != s:
            terms[vm.t[i]] = -1.0
        m.add_row(terms, ">=", T[i, j] - big, f"mtime_{i}_{j}_{k}")

    # A best response beats every other flexibility at its price q >= 0, so the
    # spend q delta is at least I(delta) - min I >= seg_n(delta) - min I.  When
    # every other segment is switched off, mu_n = 1 and q >= slope_n, so the
    # spend is also at least slope_n delta.  Both are charged only when served.
    theta_row = {vm.theta: 1.0}
    for j in inst.customers:
        f = inst.inconvenience[j]
        floor = f.value_range()[0]
        e = vm.eta[j] = m.add_var(f"eta_{j}", 0.0, math.inf)
        theta_row[e] = -1.0
        into = [xid for (a, b, k), xid in vm.x.items() if b == j]
        segs = f.segments
        for n, (g, c) in enumerate(segs):
            # the right-hand side never exceeds its value at an end of [0, delta_bar]
            big = max(0.0, c - floor, g * f.delta_bar + c - floor)
            terms = {e: 1.0, vm.delta[j]: -g}
            terms.update({xid: -big for xid in into})
            m.add_row(terms, ">=", c - floor - big, f"spend_{j}_{n}")
            if g <= 0:
                continue
            big = g * f.delta_bar
            terms = {e: 1.0, vm.delta[j]: -g}
            terms.update({xid: -big for xid in into})
            others = [w[j, 3 + o] for o in range(len(segs)) if o != n]
            terms.update({wid: -big for wid in others})
            m.add_row(terms, ">=", -big * (1 + len(others)), f"sole_{j}_{n}")
    m.add_row(theta_row, ">=", 0.0, "theta_spend")


def build_mp(inst: Instance, bigm: Optional[BigM] = None,
             tightened: bool = False) -> Tuple[LinearModel, VarMap]:
    """Benders master: routing and complementarity binaries plus Theta >= 0.

    tightened=True adds rows valid for the single-level model (see
    _master_valid_rows); the master stays a relaxation and cuts are unchanged.
    """
    _check(inst)
    bigm = bigm or BigM.for_instance(inst)
    m = LinearModel("MP")
    vm = VarMap(bigm=bigm)
    vm.x = _routing_vars(m, inst, "x", True)
    vm.omega = _omega_vars(m, inst, "omega", True)
    vm.theta = m.add_var("theta", 0.0, bigm.m_eta * max(len(inst.customers), 1))
    _flow_and_visit(m, inst, vm.x)
    if tightened:
        _master_valid_rows(m, inst, bigm, vm)
    obj = {vid: inst.arc_cost(i, j) for (i, j, k), vid in vm.x.items()}
    obj[vm.theta] = 1.0
    m.set_objective(obj)
    return m, vm


def _check_point(inst, x_star, omega_star):
    if set(x_star) != set(arc_keys(inst)):
        raise ModelError("x_star keys do not match the instance arcs")
    if set(omega_star) != set(omega_keys(inst)):
        raise ModelError("omega_star keys do not match the instance complementarity set")


def _subproblem(inst, name, bigm, integer_copies, relax=False):
    _check(inst)
    bigm = bigm or BigM.for_instance(inst)
    m = LinearModel(name)
    vm = VarMap(bigm=bigm)
    vm.X = _routing_vars(m, inst, "X", integer_copies)
    vm.Omega = _omega_vars(m, inst, "Omega", integer_copies)
    _flow_and_visit(m, inst, vm.X, vm if relax else None)
    _second_stage(m, inst, bigm, vm, vm.X, vm.Omega, relax=relax)
    return m, vm


def _copy_rows(m: LinearModel, vm: VarMap, x_star, omega_star) -> None:
    for key, vid in vm.X.items():
        vm.copy_rows_x[key] = m.add_row({vid: 1.0}, "==", float(x_star[key]), "copyX_%d_%d_%d" % key)
    for key, vid in vm.Omega.items():
        vm.copy_rows_omega[key] = m.add_row({vid: 1.0}, "==", float(omega_star[key]),
                                            "copyW_%d_%d" % key)


def _penalty(m: LinearModel, vm: VarMap, lam, x_star, omega_star, sign: float) -> None:
    """Add sign * (lambda_x'(X - x*) + lambda_w'(Omega - w*)) to the objective."""
    const = 0.0
    terms = {}
    for key, vid in vm.X.items():
        lx = lam.lambda_x.get(key, 0.0)
        terms[vid] = sign * lx
        const -= sign * lx * float(x_star[key])
    for key, vid in vm.Omega.items():
        lw = lam.lambda_omega.get(key, 0.0)
        terms[vid] = sign * lw
        const -= sign * lw * float(omega_star[key])
    m.add_objective(terms, const)


def build_psp(inst: Instance, x_star, omega_star, bigm: Optional[BigM] = None):
    """Primal subproblem: continuous copies pinned to the master point.

    The duals of the copy rows (VarMap.copy_rows_x / copy_rows_omega) are the
    multipliers used by both cut families.
    """
    _check_point(inst, x_star, omega_star)
    m, vm = _subproblem(inst, "PSP", bigm, integer_copies=False)
    _copy_rows(m, vm, x_star, omega_star)
    m.set_objective({eid: 1.0 for eid in vm.eta.values()})
    return m, vm


def build_lsp(inst: Instance, lam, x_star, omega_star, bigm: Optional[BigM] = None):
    """Lagrangian subproblem: binary copies, copy rows priced into the objective."""
    _check_point(inst, x_star, omega_star)
    m, vm = _subproblem(inst, "LSP", bigm, integer_copies=True)
    m.set_objective({eid: 1.0 for eid in vm.eta.values()})
    _penalty(m, vm, lam, x_star, omega_star, sign=-1.0)
    return m, vm


def build_fsp(inst: Instance, lam, x_star, omega_star, bigm: Optional[BigM] = None,
              integer_copies: bool = True):
    """Feasibility subproblem: every constraint family relaxed by a slack.

    With lam=None the copies are pinned to (x_star, omega_star) by equality
    rows and the model measures the infeasibility of that very point; its LP
    relaxation yields the classic feasibility cut.  With multipliers the copy
    rows are priced into the objective instead, as in the Lagrangian
    subproblem.
    """
    _check_point(inst, x_star, omega_star)
    m, vm = _subproblem(inst, "FSP", bigm, integer_copies=integer_copies, relax=True)
    m.set_objective({sid: 1.0 for sid in vm.slack_ids()})
    if lam is None:
        _copy_rows(m, vm, x_star, omega_star)
    else:
        _penalty(m, vm, lam, x_star, omega_star, sign=-1.0)
    return m, vm


def build_vrp_baseline(inst: Instance, bigm: Optional[BigM] = None):
    """Routing with hard windows t_j = tau_j and no discounts."""
    _check(inst)
    bigm = bigm or BigM.for_instance(inst)
    m = LinearModel("VRP")
    vm = VarMap(bigm=bigm)
    vm.x = _routing_vars(m, inst, "x", True)
    _flow_and_visit(m, inst, vm.x)
    s = inst.start
    for v in range(inst.n):
        if v == s:
            continue
        if v in inst.tau:
            vm.t[v] = m.add_var(f"t_{v}", inst.tau[v], inst.tau[v])
        else:
            vm.t[v] = m.add_var(f"t_{v}", 0.0, bigm.m_time)
    T = inst.travel_time
    for (i, j, k), xid in vm.x.items():
        terms = {vm.t[j]: 1.0, xid: -bigm.m_time}
        if i != s:
            terms[vm.t[i]] = -1.0
        m.add_row(terms, ">=", T[i, j] - bigm.m_time, f"time_{i}_{j}_{k}")
    m.set_objective({vid: inst.arc_cost(i, j) for (i, j, k), vid in vm.x.items()})
    return m, vm


# solution decoding -------------------------------------------------------------

@dataclass
class Routes:
    routes: List[List[int]]
    served: List[int]
    unserved: List[int]
    service: Dict[int, Dict[str, float]]


def point_from(values, ids: Mapping, integral: bool = True) -> Dict:
    """Read a keyed group of variables; binaries are rounded when integral."""
    out = {}
    for key, vid in ids.items():
        v = float(values[vid])
        out[key] = float(round(v)) if integral else v
    return out


def extract_routes(values, vm: VarMap, inst: Instance, tol: float = 1e-4) -> Routes:
    """Walk the arcs with x = 1 from the start depot for every vehicle."""
    xs = vm.routing
    for key, vid in xs.items():
        v = values[vid]
        if min(abs(v), abs(v - 1.0)) > tol:
            raise InternalError(f"non-binary routing value {v} on arc {key}")
    used = {key for key, vid in xs.items() if values[vid] > 0.5}
    s, e = inst.start, inst.end
    routes = []
    seen = set()
    walked = set()
    for k in range(inst.vehicles):
        succ = {i: j for (i, j, kk) in used if kk == k}
        route = [s]
        node = s
        while node != e:
            if node not in succ or len(route) > inst.n + 1:
                raise InternalError(f"broken walk for vehicle {k}: arcs {sorted(used)}")
            nxt = succ[node]
            walked.add((node, nxt, k))
            route.append(nxt)
            node = nxt
        for c in route[1:-1]:
            if c in seen:
                raise InternalError(f"customer {c} visited twice: arcs {sorted(used)}")
            seen.add(c)
        routes.append(route)
    if walked != used:
        raise InternalError(f"arcs off every route (subtour): {sorted(used - walked)}")
    served = sorted(seen)
    service = {}
    for j in inst.customers:
        rec = {}
        for name in ("q", "delta", "t", "eta"):
            ids = getattr(vm, name)
            if j in ids:
                rec[name] = float(values[ids[j]])
        if rec:
            service[j] = rec
    return Routes(routes, served, [j for j in inst.customers if j not in seen], service)


def simulate_routes(inst: Instance, routes: List[List[int]]):
    """Earliest-start schedule along each route: {customer: (arrival, start)}."""
    T = inst.travel_time
    sched = {}
    for route in routes:
        t = 0.0
        for a, b in zip(route[:-1], route[1:]):
            arr = t + T[a, b]
            t = max(arr, inst.tau[b]) if b in inst.tau else arr
            if b in inst.tau:
                sched[b] = (arr, t)
    return sched
