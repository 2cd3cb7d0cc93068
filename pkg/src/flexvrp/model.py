"""Problem instances: nodes, travel times, time windows and cost parameters."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInstance
from .lower_level import PwlInconvenience, default_q_max

START_DEPOT = "start_depot"
END_DEPOT = "end_depot"
CUSTOMER = "customer"
NODE_KINDS = (START_DEPOT, END_DEPOT, CUSTOMER)

# Table 1 of the source experiments; gamma_time has no published value.
TABLE1 = dict(gamma=0.5, chi=(-0.01, 0.01), delta_bar=1.0, vehicle_cost=99.0, fee=9.05)


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    kind: str = CUSTOMER

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise ValueError(f"unknown node kind {self.kind!r}")


@dataclass(frozen=True)
class CostParams:
    gamma_time: float = 1.0          # $ per hour of travel
    vehicle_cost: float = TABLE1["vehicle_cost"]
    fee: float = TABLE1["fee"]       # revenue per served request
    speed: float = 50.0              # km/h
    q_max: Optional[float] = None    # None: twice the steepest inconvenience slope
    charge_idle_vehicles: bool = False

    def violations(self) -> List[str]:
        out = []
        for name in ("gamma_time", "vehicle_cost", "fee"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                out.append(f"cost parameter {name} must be finite and >= 0")
        if not (math.isfinite(self.speed) and self.speed > 0):
            out.append("speed must be > 0")
        if self.q_max is not None and not (math.isfinite(self.q_max) and self.q_max > 0):
            out.append("q_max must be > 0")
        return out


def travel_time_matrix(nodes: Sequence[Node], speed: float) -> np.ndarray:
    """Straight-line travel times in hours; symmetric with a zero diagonal."""
    if not (speed > 0 and math.isfinite(speed)):
        raise InvalidInstance(f"speed must be a positive finite number, got {speed}")
    xy = np.array([[n.x, n.y] for n in nodes], dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(xy)):
        bad = [n.id for n in nodes if not (math.isfinite(n.x) and math.isfinite(n.y))]
        raise InvalidInstance(f"non-finite coordinates at nodes {bad}")
    diff = xy[:, None, :] - xy[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1]) / speed


@dataclass(frozen=True, eq=False)
class Instance:
    nodes: Tuple[Node, ...]
    vehicles: int
    travel_time: np.ndarray
    tau: Mapping[int, float]
    inconvenience: Mapping[int, PwlInconvenience]
    params: CostParams = field(default_factory=CostParams)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        tt = np.array(self.travel_time, dtype=float)
        tt.setflags(write=False)
        object.__setattr__(self, "travel_time", tt)
        object.__setattr__(self, "tau", {int(k): float(v) for k, v in self.tau.items()})
        object.__setattr__(self, "inconvenience", dict(self.inconvenience))

    @classmethod
    def from_nodes(cls, nodes, vehicles, tau, inconvenience, params=None):
        params = params or CostParams()
        return cls(tuple(nodes), vehicles, travel_time_matrix(nodes, params.speed),
                   tau, inconvenience, params)

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def start(self) -> int:
        return next(n.id for n in self.nodes if n.kind == START_DEPOT)

    @property
    def end(self) -> int:
        return next(n.id for n in self.nodes if n.kind == END_DEPOT)

    @property
    def customers(self) -> List[int]:
        return [n.id for n in self.nodes if n.kind == CUSTOMER]

    @property
    def arcs(self) -> List[Tuple[int, int]]:
        """Usable arcs: no self-loops, nothing into the start or out of the end depot."""
        s, e = self.start, self.end
        return [(i, j) for i in range(self.n) for j in range(self.n)
                if i != j and i != e and j != s]

    @property
    def q_max(self) -> float:
        if self.params.q_max is not None:
            return self.params.q_max
        fns = list(self.inconvenience.values())
        return default_q_max(fns) if fns else 1.0

    def arc_cost(self, i: int, j: int) -> float:
        """Per-traversal cost: travel time value plus vehicle fee or minus delivery fee."""
        p = self.params
        c = p.gamma_time * self.travel_time[i, j]
        if i == self.start:
            if j != self.end or p.charge_idle_vehicles:
                c += p.vehicle_cost
        elif self.nodes[i].kind == CUSTOMER:
            c -= p.fee
        return float(c)

    def idle_cost(self) -> float:
        return self.arc_cost(self.start, self.end)

    def with_params(self, **changes) -> "Instance":
        return replace(self, params=replace(self.params, **changes))

    def with_inconvenience(self, fn_for) -> "Instance":
        """Copy with each customer's inconvenience replaced by fn_for(old)."""
        return replace(self, inconvenience={j: fn_for(f) for j, f in self.inconvenience.items()})

    def to_dict(self) -> dict:
        return {
            "nodes": [[n.id, n.x, n.y, n.kind] for n in self.nodes],
            "vehicles": self.vehicles,
            "travel_time": self.travel_time.tolist(),
            "tau": {str(k): v for k, v in sorted(self.tau.items())},
            "inconvenience": {
                str(k): {"segments": [list(s) for s in f.segments], "delta_bar": f.delta_bar}
                for k, f in sorted(self.inconvenience.items())
            },
            "params": asdict(self.params),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Instance":
        nodes = [Node(int(i), float(x), float(y), kind) for i, x, y, kind in d["nodes"]]
        params = CostParams(**d.get("params", {}))
        tt = d.get("travel_time")
        if tt is None:
            tt = travel_time_matrix(nodes, params.speed)
        inc = {int(k): PwlInconvenience(tuple(tuple(s) for s in v["segments"]), v["delta_bar"])
               for k, v in d["inconvenience"].items()}
        return cls(tuple(nodes), int(d["vehicles"]), np.asarray(tt, dtype=float),
                   {int(k): v for k, v in d["tau"].items()}, inc, params)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "Instance":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def validate_instance(inst: Instance, tol: float = 1e-9) -> List[str]:
    """Every violated instance invariant; an empty list means the instance is ok."""
    out: List[str] = []
    ids = [n.id for n in inst.nodes]
    if sorted(ids) != list(range(len(ids))):
        out.append("node ids must be unique and contiguous from 0")
    for kind in (START_DEPOT, END_DEPOT):
        cnt = sum(n.kind == kind for n in inst.nodes)
        if cnt != 1:
            out.append(f"depot multiplicity: {cnt} nodes of kind {kind}")
    if inst.vehicles < 1:
        out.append("at least one vehicle required")
    out.extend(inst.params.violations())

    T = inst.travel_time
    n = len(inst.nodes)
    if T.shape != (n, n):
        out.append(f"travel_time shape {T.shape} does not match {n} nodes")
        return out
    if not np.all(np.isfinite(T)):
        out.append("travel_time has non-finite entries")
        return out
    for i, j in zip(*np.nonzero(T < 0)):
        out.append(f"negative travel time on arc ({i},{j})")
    for i in np.flatnonzero(np.abs(np.diag(T)) > tol):
        out.append(f"nonzero self travel time at node {i}")
    # triangle inequality: T[i,j] <= T[i,k] + T[k,j]
    via = T[:, :, None] + T[None, :, :]
    bad = np.argwhere(T[:, None, :] > via + tol)
    for i, k, j in bad[:5]:
        out.append(f"triangle inequality violated on ({i},{j}) via node {k}")

    if any(s.startswith("depot") for s in out):
        return out
    s = inst.start
    customers = inst.customers
    for j in customers:
        if j not in inst.tau:
            out.append(f"missing time window at node {j}")
            continue
        if j not in inst.inconvenience:
            out.append(f"missing inconvenience at node {j}")
        if not math.isfinite(inst.tau[j]):
            out.append(f"non-finite time window at node {j}")
        elif inst.tau[j] < T[s, j] - tol:
            out.append(f"unreachable window at node {j}")
    for a in customers:
        for b in customers:
            # time propagation alone rules out subtours only along positive-time arcs
            if a < b and T[a, b] <= tol:
                out.append(f"zero travel time between customers {a} and {b}")
    return out


def require_valid(inst: Instance, exc=InvalidInstance) -> None:
    problems = validate_instance(inst)
    if problems:
        raise exc("invalid instance: " + "; ".join(problems))


def make_instance(
    coords: Sequence[Tuple[float, float]],
    tau: Sequence[float],
    vehicles: int = 1,
    params: Optional[CostParams] = None,
    inconvenience: Optional[PwlInconvenience] = None,
    end_coord: Optional[Tuple[float, float]] = None,
) -> Instance:
    """Convenience constructor: coords[0] is the depot, coords[1:] customers.

    The end depot sits on the start depot unless end_coord is given.  Node ids
    are 0 (start), 1 (end), 2.. (customers in the given order).
    """
    params = params or CostParams()
    fn = inconvenience or PwlInconvenience.two_segment()
    depot = coords[0]
    end = end_coord if end_coord is not None else depot
    nodes = [Node(0, *depot, START_DEPOT), Node(1, *end, END_DEPOT)]
    nodes += [Node(2 + k, x, y, CUSTOMER) for k, (x, y) in enumerate(coords[1:])]
    if len(tau) != len(coords) - 1:
        raise ValueError("one time window per customer required")
    tau_map = {2 + k: float(t) for k, t in enumerate(tau)}
    inc = {2 + k: fn for k in range(len(tau))}
    return Instance.from_nodes(nodes, vehicles, tau_map, inc, params)
