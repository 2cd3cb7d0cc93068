import math

import numpy as np
import pytest

from flexvrp.model import CostParams, make_instance


def tri_node(tau_b=2.0, **params):
    """Depot (0,0), A (0,1), B (1,0), one vehicle, Gamma 1, fee 5, c_v 1, speed 1."""
    base = dict(gamma_time=1.0, vehicle_cost=1.0, fee=5.0, speed=1.0)
    base.update(params)
    return make_instance([(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)], [1.0, tau_b], vehicles=1,
                         params=CostParams(**base))


def random_instance(seed, n_customers, vehicles, charge_idle=True, vehicle_cost=99.0,
                    width=50.0, speed=50.0, spread=1.5):
    """Uniform customers around a depot; windows tau_j = T_0j + U[0, spread]."""
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, width, size=(n_customers + 1, 2))
    t0 = np.hypot(*(coords[1:] - coords[0]).T) / speed
    tau = t0 + rng.uniform(0.0, spread, n_customers)
    params = CostParams(charge_idle_vehicles=charge_idle, vehicle_cost=vehicle_cost, speed=speed)
    return make_instance([tuple(c) for c in coords], list(tau), vehicles=vehicles, params=params)


# Hand derivation for the tri-node optimum: route 0-A-B-end travels 2 + sqrt2,
# reaches B at 1 + sqrt2 (slack sqrt2 - 1 bought at q = 0.5), pays c_v once and
# earns two fees: 2 + sqrt2 + 1 - 10 + 0.5 (sqrt2 - 1) = -7.5 + 1.5 sqrt2.
TRI_NODE_OPTIMUM = -7.5 + 1.5 * math.sqrt(2.0)
TRI_NODE_VRP = -2.0


@pytest.fixture
def tri():
    return tri_node()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
