"""Random LP/MIP generators and an exhaustive binary oracle shared by tests."""

import itertools

import numpy as np

from flexvrp.milp import LinearModel

SENSES = ("<=", ">=", "==")


def random_lp(rng, n_max=8, m_max=6):
    """Feasible boxed LP: rows built around a random interior point x0 in [0, 10]^n."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    model = LinearModel("lp")
    for j in range(n):
        model.add_var(f"x{j}", 0.0, 10.0)
    x0 = rng.uniform(0.0, 10.0, n)
    for i in range(m):
        mask = rng.random(n) < 0.6
        if not mask.any():
            mask[rng.integers(n)] = True
        coef = np.where(mask, rng.integers(-5, 6, n), 0).astype(float)
        sense = SENSES[int(rng.integers(3))]
        act = float(coef @ x0)
        slack = float(rng.uniform(0.0, 5.0))
        rhs = act + slack if sense == "<=" else act - slack if sense == ">=" else act
        model.add_row({j: c for j, c in enumerate(coef) if c != 0.0}, sense, rhs, f"r{i}")
    model.set_objective({j: float(c) for j, c in enumerate(rng.integers(-5, 6, n))})
    return model


def random_binary_mip(rng, n_max=12, m_max=5):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    model = LinearModel("mip")
    for j in range(n):
        model.add_var(f"b{j}", 0.0, 1.0, integer=True)
    for i in range(m):
        coef = rng.integers(-6, 7, n).astype(float)
        sense = SENSES[int(rng.integers(2))] if rng.random() < 0.9 else "=="
        rhs = float(rng.integers(-4, 10))
        model.add_row({j: c for j, c in enumerate(coef) if c != 0.0}, sense, rhs, f"r{i}")
    model.set_objective({j: float(c) for j, c in enumerate(rng.integers(-10, 11, n))})
    return model


def enumerate_binary(model, tol=1e-9):
    """(best objective, best point) over {0,1}^n, or (None, None) when infeasible."""
    n = model.num_vars
    pts = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    A = model.matrix().toarray()
    act = pts @ A.T
    ok = np.ones(len(pts), dtype=bool)
    for i, r in enumerate(model.rows):
        if r.sense == "<=":
            ok &= act[:, i] <= r.rhs + tol
        elif r.sense == ">=":
            ok &= act[:, i] >= r.rhs - tol
        else:
            ok &= np.abs(act[:, i] - r.rhs) <= tol
    if not ok.any():
        return None, None
    obj = pts @ model.cost_vector() + model.obj_constant
    obj[~ok] = np.inf
    k = int(np.argmin(obj))
    return float(obj[k]), pts[k]
