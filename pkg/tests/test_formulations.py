import math

import numpy as np
import pytest

from flexvrp.decomposition import Multipliers
from flexvrp.errors import InternalError, ModelError
from flexvrp.formulations import (
    BigM, VarMap, arc_keys, build_fsp, build_lsp, build_mp, build_p2, build_psp,
    build_vrp_baseline, extract_routes, first_stage_cost, omega_keys, point_from, simulate_routes,
)
from flexvrp.lower_level import PwlInconvenience, kkt_certificate
from flexvrp.milp import INFEASIBLE, OPTIMAL, solve_lp, solve_mip
from flexvrp.model import CostParams, make_instance
from flexvrp.solve import solve_monolithic, solve_vrp

from conftest import TRI_NODE_OPTIMUM, TRI_NODE_VRP, random_instance, tri_node

SQRT2 = math.sqrt(2.0)


def route_point(inst, routes):
    """Binary x for the given per-vehicle node sequences."""
    x = {key: 0.0 for key in arc_keys(inst)}
    for k, route in enumerate(routes):
        for a, b in zip(route[:-1], route[1:]):
            x[a, b, k] = 1.0
    return x


def p2_optimum(inst):
    model, vm = build_p2(inst)
    sol = solve_mip(model)
    assert sol.status == OPTIMAL
    return sol, vm


# BigM ------------------------------------------------------------------------

def test_bigm_tri_node(tri):
    m = BigM.for_instance(tri)
    # max tau 2, delta_bar 1, longest arc sqrt2; q_max = 2 * 0.5
    assert m.m_time == pytest.approx(3.0 + SQRT2)
    assert m.m_comp_delta == 1.0
    assert m.m_comp_dual == pytest.approx(1.0 + 0.5 + 1.0)
    # I(1) = 0.49, plus 2.5 * 1, plus max |chi| 0.01
    assert m.m_eta == pytest.approx(3.0)
    # segment 2 at delta = 1 sits 0.98 below the envelope
    assert m.m_comp_seg == pytest.approx(0.98)


# P2 ----------------------------------------------------------------------------

def test_p2_variable_count(tri):
    model, vm = build_p2(tri)
    # 7 usable arcs (no self-loops, none into the start, none out of the end),
    # t for end + 2 customers, {q, delta, z, u, sigma, eta} x 2, mu 2 x 2, omega 2 x 4
    assert len(vm.x) == 7 and len(vm.t) == 3 and len(vm.mu) == 4 and len(vm.omega) == 8
    assert model.num_vars == 7 + 3 + 12 + 4 + 8 == 34
    assert sorted(vm.all_ids()) == list(range(model.num_vars))


def test_p2_tri_node_optimum(tri):
    sol, vm = p2_optimum(tri)
    assert sol.objective == pytest.approx(TRI_NODE_OPTIMUM, abs=1e-6)
    routes = extract_routes(sol.x, vm, tri)
    assert routes.routes == [[0, 2, 3, 1]]
    assert sol.x[vm.t[2]] == pytest.approx(1.0, abs=1e-6)
    t_b, d_b = sol.x[vm.t[3]], sol.x[vm.delta[3]]
    assert 2.0 - 1e-6 <= t_b <= 2.0 + d_b + 1e-6
    assert d_b >= SQRT2 - 1 - 1e-6


def test_p2_matches_monolithic_report(tri):
    rep = solve_monolithic(tri)
    assert rep.objective == pytest.approx(TRI_NODE_OPTIMUM, abs=1e-9)
    assert rep.routes == [[0, 2, 3, 1]]
    assert rep.q[3] == pytest.approx(0.5)
    assert rep.delta[3] == pytest.approx(SQRT2 - 1, abs=1e-7)
    assert rep.q[2] == pytest.approx(0.0, abs=1e-9)


def test_p2_zero_flexibility_equals_vrp():
    fn = PwlInconvenience.two_segment(delta_bar=0.0)
    for seed in range(4):
        inst = random_instance(seed, 4, 2).with_inconvenience(lambda _: fn)
        rep = solve_monolithic(inst)
        assert all(abs(d) <= 1e-7 for d in rep.delta.values())
        assert rep.objective == pytest.approx(solve_vrp(inst).objective, abs=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_p2_properties_random(seed):
    inst = random_instance(seed, 4, 2, charge_idle=seed % 2 == 0)
    sol, vm = p2_optimum(inst)
    routes = extract_routes(sol.x, vm, inst)
    # dominance over the hard-window baseline
    assert sol.objective <= solve_vrp(inst).objective + 1e-6
    # served customers play a best response; unserved ones pay nothing
    for j in routes.served:
        q = max(sol.x[vm.q[j]], 0.0)
        d = min(max(sol.x[vm.delta[j]], 0.0), inst.inconvenience[j].delta_bar)
        kkt_certificate(d, q, inst.inconvenience[j])
    for j in routes.unserved:
        assert sol.x[vm.eta[j]] <= 1e-7
    # forward simulation fits every window without using the big-M rows
    sched = simulate_routes(inst, routes.routes)
    for j in routes.served:
        arrival, start = sched[j]
        assert start - inst.tau[j] <= sol.x[vm.delta[j]] + 1e-6


def test_p2_nonincreasing_in_delta_bar():
    for seed in range(3):
        base = random_instance(seed, 4, 2)
        values = [solve_monolithic(base.with_inconvenience(
            lambda f, d=d: PwlInconvenience(f.segments, d))).objective for d in (0.25, 0.5, 1.0, 1.5)]
        assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))


def test_builders_reject_invalid_instance():
    inst = make_instance([(0, 0), (0, 1)], [0.0], params=CostParams(speed=1.0))
    for build in (build_p2, build_mp, build_vrp_baseline):
        with pytest.raises(ModelError):
            build(inst)


# master ------------------------------------------------------------------------

def test_mp_structure_and_relaxation(tri):
    model, vm = build_mp(tri)
    assert model.objective[vm.theta] == 1.0
    assert sum(1 for j in model.objective if j == vm.theta) == 1
    assert all(model.variables[i].integer for i in list(vm.x.values()) + list(vm.omega.values()))
    assert not vm.t and not vm.q
    assert solve_mip(model).objective <= TRI_NODE_OPTIMUM + 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_tightened_master_admits_single_level_optimum(seed):
    inst = random_instance(seed, 5, 2, charge_idle=seed % 3 != 0)
    sol, pv = p2_optimum(inst)
    mp, mv = build_mp(inst, tightened=True)
    vals = np.zeros(mp.num_vars)
    for name in ("x", "omega", "t", "delta", "eta"):
        for key, vid in getattr(mv, name).items():
            vals[vid] = sol.x[getattr(pv, name)[key]]
    vals[mv.theta] = sum(sol.x[i] for i in pv.eta.values())
    assert mp.max_violation(vals) <= 1e-6
    assert solve_mip(mp).objective <= sol.objective + 1e-6


def test_tightened_master_excludes_disconnected_cycle(tri):
    # vehicle leaves straight for the end while A and B swap among themselves
    mp, mv = build_mp(tri, tightened=True)
    x = route_point(tri, [[0, 1]])
    x[2, 3, 0] = x[3, 2, 0] = 1.0
    for key, vid in mv.x.items():
        mp.variables[vid].lb = mp.variables[vid].ub = x[key]
    assert solve_mip(mp).status == INFEASIBLE
    bare, bv = build_mp(tri)
    for key, vid in bv.x.items():
        bare.variables[vid].lb = bare.variables[vid].ub = x[key]
    assert solve_mip(bare).status == OPTIMAL


def test_tightened_master_excludes_negative_price_pattern(tri):
    # only the falling segment active with delta below its cap forces q = -0.5 + u with u = 0
    _, x, w = optimum_point(tri)
    w.update({(2, 1): 1.0, (2, 2): 1.0, (2, 3): 1.0, (2, 4): 0.0})
    assert solve_lp(build_psp(tri, x, w)[0]).status == INFEASIBLE
    mp, mv = build_mp(tri, tightened=True)
    for name, point in (("x", x), ("omega", w)):
        for key, vid in getattr(mv, name).items():
            mp.variables[vid].lb = mp.variables[vid].ub = point[key]
    assert solve_mip(mp).status == INFEASIBLE


# subproblems ---------------------------------------------------------------------

def optimum_point(inst):
    sol, vm = p2_optimum(inst)
    return sol, point_from(sol.x, vm.x), point_from(sol.x, vm.omega)


def test_psp_at_optimum_recovers_second_stage(tri):
    sol, x, w = optimum_point(tri)
    model, vm = build_psp(tri, x, w)
    lp = solve_lp(model)
    assert lp.status == OPTIMAL
    assert lp.objective == pytest.approx(sol.objective - first_stage_cost(tri, x), abs=1e-6)
    assert set(vm.copy_rows_x) == set(x) and set(vm.copy_rows_omega) == set(w)


def infeasible_point():
    """tau_B = 1, so B must start by 2, but 0-A-B reaches B at 1 + sqrt2.

    The complementarity point is a best response for both customers: A sits on
    the kink (0.02) at q = 0, B takes the whole allowance on the rising segment.
    """
    inst = tri_node(tau_b=1.0)
    x = route_point(inst, [[0, 2, 3, 1]])
    w = {(2, 1): 1.0, (2, 2): 1.0, (2, 3): 0.0, (2, 4): 0.0,
         (3, 1): 0.0, (3, 2): 1.0, (3, 3): 0.0, (3, 4): 1.0}
    return inst, x, w


def test_psp_time_infeasible_route():
    inst, x, w = infeasible_point()
    assert solve_lp(build_psp(inst, x, w)[0]).status == INFEASIBLE
    # the same complementarity point is fine once B's window allows the detour
    assert solve_lp(build_psp(tri_node(tau_b=1.5), x, w)[0]).status == OPTIMAL


def test_psp_all_zero_routing_infeasible(tri):
    inst = tri.with_params(charge_idle_vehicles=True)
    x = {key: 0.0 for key in arc_keys(inst)}
    w = {key: 1.0 for key in omega_keys(inst)}
    assert solve_lp(build_psp(inst, x, w)[0]).status == INFEASIBLE


def test_psp_rejects_misshaped_point(tri):
    with pytest.raises(ModelError):
        build_psp(tri, {}, {})


def test_lsp_zero_multipliers_ignore_master_point(tri):
    _, x1, w1 = optimum_point(tri)
    x2 = route_point(tri, [[0, 1]])
    w2 = {key: 0.0 for key in w1}
    zero = Multipliers.zero(arc_keys(tri), omega_keys(tri))
    a = solve_mip(build_lsp(tri, zero, x1, w1)[0])
    b = solve_mip(build_lsp(tri, zero, x2, w2)[0])
    assert a.objective == pytest.approx(b.objective, abs=1e-9)
    assert a.objective == pytest.approx(0.0, abs=1e-9)  # idle routing spends nothing


def test_lsp_with_psp_multipliers_brackets_psp(tri):
    _, x, w = optimum_point(tri)
    model, vm = build_psp(tri, x, w)
    lp = solve_lp(model)
    lam = Multipliers.from_duals(lp.duals, vm)
    lsp = solve_mip(build_lsp(tri, lam, x, w)[0])
    relaxed = solve_lp(build_lsp(tri, lam, x, w)[0])
    # LP Lagrangian dual at optimal multipliers equals the PSP; integrality can only raise it,
    # and the master point itself is feasible in the LSP
    assert relaxed.objective == pytest.approx(lp.objective, abs=1e-6)
    assert relaxed.objective - 1e-6 <= lsp.objective <= lp.objective + 1e-6


def test_lsp_infeasible_when_time_budget_collapses(tri):
    _, x, w = optimum_point(tri)
    tiny = BigM.for_instance(tri)
    tiny.m_time = 0.5  # below every tau
    assert solve_mip(build_lsp(tri, Multipliers.zero(arc_keys(tri), omega_keys(tri)), x, w, bigm=tiny)[0]).status == INFEASIBLE


def test_fsp_feasible_point_has_no_slack(tri):
    _, x, w = optimum_point(tri)
    pinned = solve_mip(build_fsp(tri, None, x, w)[0])
    assert pinned.objective == pytest.approx(0.0, abs=1e-9)
    priced = solve_mip(build_fsp(tri, Multipliers.zero(arc_keys(tri), omega_keys(tri)), x, w)[0])
    assert priced.objective == pytest.approx(0.0, abs=1e-9)


def test_fsp_slack_measures_lateness():
    # every slack buys at most one unit of time, and the route is late by sqrt2 - 1
    inst, x, w = infeasible_point()
    for integer_copies in (True, False):
        model, vm = build_fsp(inst, None, x, w, integer_copies=integer_copies)
        sol = solve_lp(model)
        assert sol.objective == pytest.approx(SQRT2 - 1, abs=1e-7)
        assert vm.slack_ids() and set(vm.slacks) <= set(range(1, 22))


def test_fsp_slack_can_sit_on_late_customer_window():
    # confining the slack to B's upper window row loses nothing
    inst, x, w = infeasible_point()
    model, vm = build_fsp(inst, None, x, w)
    for family, ids in vm.slacks.items():
        for key, sid in ids.items():
            if (family, key) != (3, (3,)):
                model.variables[sid].ub = 0.0
    sol = solve_lp(model)
    assert sol.objective == pytest.approx(SQRT2 - 1, abs=1e-7)
    assert sol.x[vm.slacks[3][(3,)]] == pytest.approx(SQRT2 - 1, abs=1e-7)


def test_fsp_all_ones_complementarity_needs_mu_slack(tri):
    # every segment switched off contradicts sum mu = 1
    _, x, _ = optimum_point(tri)
    w = {key: 1.0 for key in omega_keys(tri)}
    assert solve_lp(build_psp(tri, x, w)[0]).status == INFEASIBLE
    assert solve_lp(build_fsp(tri, None, x, w)[0]).objective >= 1.0 - 1e-7


# baseline ------------------------------------------------------------------------

def test_vrp_baseline_tri_node(tri):
    model, vm = build_vrp_baseline(tri)
    sol = solve_mip(model)
    assert sol.objective == pytest.approx(TRI_NODE_VRP, abs=1e-9)
    assert not vm.q and not vm.delta and not vm.eta
    assert sol.objective >= TRI_NODE_OPTIMUM


def test_vrp_chainable_pair():
    # tau_B = tau_A + T_AB lets one vehicle serve A then B at the hard windows
    inst = tri_node(tau_b=1.0 + SQRT2)
    rep = solve_vrp(inst)
    assert rep.routes == [[0, 2, 3, 1]]
    assert rep.objective == pytest.approx(2 + SQRT2 + 1 - 10)


def test_vrp_single_customer_hand_cost():
    inst = make_instance([(0, 0), (3, 4)], [5.0], params=CostParams(
        gamma_time=2.0, vehicle_cost=1.5, fee=25.0, speed=1.0))
    # travel 5 each way at Gamma 2, one vehicle charge, one delivery fee
    rep = solve_vrp(inst)
    assert rep.routes == [[0, 2, 1]]
    assert rep.objective == pytest.approx(2 * 10 + 1.5 - 25)
    # with a smaller fee staying idle (cost 0) wins
    assert solve_vrp(inst.with_params(fee=20.0)).objective == 0.0


# route extraction ------------------------------------------------------------------

def test_extract_routes_simple(tri):
    vm = VarMap(x={key: i for i, key in enumerate(arc_keys(tri))})
    values = np.zeros(len(vm.x))
    values[vm.x[0, 2, 0]] = values[vm.x[2, 1, 0]] = 1.0
    out = extract_routes(values, vm, tri)
    assert out.routes == [[0, 2, 1]] and out.served == [2] and out.unserved == [3]


def test_extract_routes_idle_fleet():
    inst = random_instance(0, 3, 2, charge_idle=False)
    vm = VarMap(x={key: i for i, key in enumerate(arc_keys(inst))})
    values = np.zeros(len(vm.x))
    for k in range(2):
        values[vm.x[0, 1, k]] = 1.0
    out = extract_routes(values, vm, inst)
    assert out.routes == [[0, 1], [0, 1]] and out.served == []


def test_extract_routes_rejects_bad_walks(tri):
    vm = VarMap(x={key: i for i, key in enumerate(arc_keys(tri))})
    frac = np.zeros(len(vm.x))
    frac[vm.x[0, 2, 0]] = 0.5
    with pytest.raises(InternalError):
        extract_routes(frac, vm, tri)
    broken = np.zeros(len(vm.x))
    broken[vm.x[0, 2, 0]] = 1.0
    with pytest.raises(InternalError):
        extract_routes(broken, vm, tri)
    cycle = np.zeros(len(vm.x))
    for key in ((0, 1, 0), (2, 3, 0), (3, 2, 0)):
        cycle[vm.x[key]] = 1.0
    with pytest.raises(InternalError):
        extract_routes(cycle, vm, tri)
