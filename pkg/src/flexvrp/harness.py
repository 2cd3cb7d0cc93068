"""Instance ingestion, sampling, experiment sweeps and CSV reporting."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError, FlexVrpError, LimitReached, ParseError
from .lower_level import PwlInconvenience
from .model import CUSTOMER, END_DEPOT, START_DEPOT, TABLE1, CostParams, Instance, Node

CSV_COLUMNS = (
    "row_type", "seed", "customers", "vehicles", "sweep", "value", "method", "status",
    "objective", "iterations", "fractional_iterations", "wall_seconds", "served",
    "discount_spend", "fee_savings", "op_cost_reduction", "op_cost_reduction_pct",
)
SWEEPS = ("gamma", "delta_bar")


def parse_coords(path) -> List[Node]:
    """Read "id x y" lines (km); '#' starts a comment, blank lines are skipped."""
    with open(path) as fh:
        return parse_coords_text(fh.read())


def parse_coords_text(text: str) -> List[Node]:
    nodes = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'id x y', got {raw.strip()!r}", lineno)
        try:
            nid = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"expected 'id x y', got {raw.strip()!r}", lineno) from None
        if nid < 0 or nid in seen:
            raise ParseError(f"node id {nid} is negative or repeated", lineno)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ParseError("non-finite coordinate", lineno)
        seen.add(nid)
        nodes.append(Node(nid, x, y, CUSTOMER))
    return nodes


def format_coords(nodes: Sequence[Node]) -> str:
    return "".join(f"{n.id} {n.x:.6f} {n.y:.6f}\n" for n in nodes)


def synthetic_map(count: int = 1000, seed: int = 0, width: float = 50.0,
                  height: float = 50.0, clusters: int = 8) -> List[Node]:
    """Deterministic clustered point cloud standing in for a city-scale map (km)."""
    rng = np.random.default_rng(seed)
    centres = rng.uniform((0.0, 0.0), (width, height), size=(clusters, 2))
    which = rng.integers(0, clusters, size=count)
    pts = centres[which] + rng.normal(0.0, 0.12 * min(width, height), size=(count, 2))
    pts = np.clip(pts, (0.0, 0.0), (width, height))
    return [Node(i, float(x), float(y), CUSTOMER) for i, (x, y) in enumerate(pts)]


def make_inconvenience(gamma: Optional[float] = None, slopes=None, chi=None,
                       delta_bar: Optional[float] = None) -> PwlInconvenience:
    """Two-segment inconvenience; gamma sets slopes (gamma, -gamma)."""
    if slopes is None:
        g = TABLE1["gamma"] if gamma is None else gamma
        slopes = (g, -g)
    chi = TABLE1["chi"] if chi is None else chi
    dbar = TABLE1["delta_bar"] if delta_bar is None else delta_bar
    return PwlInconvenience(tuple((float(s), float(c)) for s, c in zip(slopes, chi)), float(dbar))


def sample_instance(nodes: Sequence[Node], n_customers: int, n_vehicles: int, seed: int,
                    params: Optional[CostParams] = None,
                    inconvenience: Optional[PwlInconvenience] = None,
                    horizon_factor: float = 1.5) -> Instance:
    """Random depot plus customers drawn without replacement from a map.

    Windows: tau_j ~ U[T(depot, j), horizon], horizon = horizon_factor *
    max_j (T(depot, j) + T(j, end)).  The end depot sits on the start depot.
    """
    if n_customers < 0 or n_vehicles < 1:
        raise ConfigError("customers must be >= 0 and vehicles >= 1")
    if n_customers + 1 > len(nodes):
        raise ConfigError(f"need {n_customers + 1} map nodes, have {len(nodes)}")
    params = params or CostParams()
    fn = inconvenience or make_inconvenience()
    rng = np.random.default_rng(seed)
    coords = np.array([(n.x, n.y) for n in nodes])
    if len(np.unique(coords, axis=0)) < n_customers + 1:
        raise ConfigError(f"need {n_customers + 1} distinct map points")
    # coincident points would give zero travel times; redraw until all are distinct
    while True:
        pick = rng.choice(len(nodes), size=n_customers + 1, replace=False)
        if len(np.unique(coords[pick], axis=0)) == len(pick):
            break
    depot = nodes[int(pick[0])]
    chosen = [Node(0, depot.x, depot.y, START_DEPOT), Node(1, depot.x, depot.y, END_DEPOT)]
    chosen += [Node(2 + k, nodes[int(p)].x, nodes[int(p)].y, CUSTOMER)
               for k, p in enumerate(pick[1:])]
    inst = Instance.from_nodes(chosen, n_vehicles, {}, {}, params)
    T = inst.travel_time
    cust = inst.customers
    horizon = horizon_factor * max((T[0, j] + T[j, 1] for j in cust), default=0.0)
    u = rng.uniform(0.0, 1.0, size=len(cust))
    tau = {j: float(T[0, j] + u[k] * max(horizon - T[0, j], 0.0)) for k, j in enumerate(cust)}
    return replace(inst, tau=tau, inconvenience={j: fn for j in cust})


# experiment configuration ------------------------------------------------------

@dataclass
class ExperimentConfig:
    nodes: Optional[str] = None
    customers: int = 8
    vehicles: int = 2
    repetitions: int = 1
    seed: int = 0
    methods: List[str] = field(default_factory=lambda: ["bdd", "gbd"])
    sweep: Optional[str] = None
    values: List[float] = field(default_factory=list)
    gamma1: float = TABLE1["gamma"]
    gamma2: float = -TABLE1["gamma"]
    chi1: float = TABLE1["chi"][0]
    chi2: float = TABLE1["chi"][1]
    delta_bar: float = TABLE1["delta_bar"]
    c_v: float = TABLE1["vehicle_cost"]
    fee: float = TABLE1["fee"]
    Gamma: float = 1.0
    speed: float = 50.0
    q_max: Optional[float] = None
    charge_idle: bool = True
    horizon_factor: float = 1.5
    gap: float = 1e-4
    max_iters: int = 200
    time_limit: Optional[float] = None
    literal_master: bool = False
    map_seed: int = 0
    map_size: int = 1000
    output: Optional[str] = None

    def validate(self) -> None:
        from .report import METHODS

        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.sweep is not None:
            if self.sweep not in SWEEPS:
                raise ConfigError(f"sweep must be one of {SWEEPS}")
            if not self.values:
                raise ConfigError("a named sweep needs a nonempty value list")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")

    def params(self) -> CostParams:
        return CostParams(gamma_time=self.Gamma, vehicle_cost=self.c_v, fee=self.fee,
                          speed=self.speed, q_max=self.q_max,
                          charge_idle_vehicles=self.charge_idle)

    def inconvenience(self, sweep_value=None) -> PwlInconvenience:
        slopes = (self.gamma1, self.gamma2)
        dbar = self.delta_bar
        if self.sweep == "gamma" and sweep_value is not None:
            slopes = (sweep_value, -sweep_value)
        if self.sweep == "delta_bar" and sweep_value is not None:
            dbar = sweep_value
        return make_inconvenience(slopes=slopes, chi=(self.chi1, self.chi2), delta_bar=dbar)


_LISTS = {"methods": str, "values": float}


def _coerce(key: str, raw: str, default):
    if key in _LISTS:
        return [_LISTS[key](v.strip()) for v in raw.split(",") if v.strip()]
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if key in ("q_max", "time_limit"):
        return None if raw.lower() in ("", "none") else float(raw)
    if key in ("sweep", "nodes", "output"):
        return None if raw.lower() in ("", "none") else raw
    if isinstance(default, int):
        return int(raw)
    return float(raw)


def parse_config_text(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    defaults = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key == "gamma":  # symmetric shorthand for the two slopes
                g = float(value)
                cfg.gamma1, cfg.gamma2 = g, -g
                continue
            if not hasattr(defaults, key):
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            setattr(cfg, key, _coerce(key, value, getattr(defaults, key)))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def load_map(cfg: ExperimentConfig) -> List[Node]:
    if cfg.nodes:
        return parse_coords(cfg.nodes)
    return synthetic_map(cfg.map_size, cfg.map_seed)


# running ---------------------------------------------------------------------

def run_method(inst: Instance, method: str, gap: float = 1e-4, max_iters: int = 200,
               time_limit: Optional[float] = None, literal_master: bool = False):
    from .decomposition import DecompositionOptions, run_bdd, run_gbd
    from .milp import MipLimits
    from .oracle import enumerate_optimal
    from .solve import solve_monolithic, solve_vrp

    if method in ("gbd", "bdd"):
        opts = DecompositionOptions(gap=gap, max_iters=max_iters, time_limit=time_limit,
                                    tightened_master=not literal_master)
        return (run_gbd if method == "gbd" else run_bdd)(inst, opts)
    limits = MipLimits(time_limit=time_limit)
    if method == "monolithic":
        return solve_monolithic(inst, limits)
    if method == "vrp":
        return solve_vrp(inst, limits)
    if method == "oracle":
        return enumerate_optimal(inst)
    raise ConfigError(f"unknown method {method!r}")


def fee_savings(report, inst: Instance) -> float:
    """Discount paid out over fees earned, on served customers."""
    served = report.served
    fees = inst.params.fee * len(served)
    return report.discount_spend / fees if fees > 0 else 0.0


def run_experiment(cfg: ExperimentConfig) -> List[Dict]:
    """One row per repetition x sweep value x method, then one mean row per sweep value x method."""
    cfg.validate()
    nodes = load_map(cfg)
    params = cfg.params()
    values = cfg.values if cfg.sweep else [None]
    rows: List[Dict] = []
    for rep in range(cfg.repetitions):
        seed = cfg.seed + rep
        for value in values:
            inst = sample_instance(nodes, cfg.customers, cfg.vehicles, seed, params,
                                   cfg.inconvenience(value), cfg.horizon_factor)
            baseline = None
            try:
                baseline = run_method(inst, "vrp", time_limit=cfg.time_limit).objective
            except FlexVrpError:
                pass
            for method in cfg.methods:
                row = {c: "" for c in CSV_COLUMNS}
                row.update(row_type="run", seed=seed, customers=cfg.customers,
                           vehicles=cfg.vehicles, sweep=cfg.sweep or "",
                           value="" if value is None else value, method=method)
                t0 = time.perf_counter()
                try:
                    rep_ = run_method(inst, method, cfg.gap, cfg.max_iters, cfg.time_limit,
                                      cfg.literal_master)
                except LimitReached:
                    row.update(status="limit", wall_seconds=time.perf_counter() - t0)
                    rows.append(row)
                    continue
                except FlexVrpError as exc:
                    row.update(status=f"error: {type(exc).__name__}",
                               wall_seconds=time.perf_counter() - t0)
                    rows.append(row)
                    continue
                row.update(status="ok", objective=rep_.objective, iterations=rep_.iterations,
                           fractional_iterations=rep_.fractional_iterations,
                           wall_seconds=rep_.wall_time, served=len(rep_.served),
                           discount_spend=rep_.discount_spend,
                           fee_savings=fee_savings(rep_, inst))
                if baseline is not None:
                    red = baseline - rep_.objective
                    row.update(op_cost_reduction=red,
                               op_cost_reduction_pct=100.0 * red / max(abs(baseline), 1e-12))
                rows.append(row)
    rows.extend(mean_rows(rows))
    return rows


_NUMERIC = ("objective", "iterations", "fractional_iterations", "wall_seconds", "served",
            "discount_spend", "fee_savings", "op_cost_reduction", "op_cost_reduction_pct")


def mean_rows(rows: List[Dict]) -> List[Dict]:
    groups: Dict[tuple, List[Dict]] = {}
    for r in rows:
        if r["row_type"] == "run" and r["status"] == "ok":
            groups.setdefault((r["sweep"], r["value"], r["method"]), []).append(r)
    out = []
    for (sweep, value, method), members in groups.items():
        row = {c: "" for c in CSV_COLUMNS}
        row.update(row_type="mean", sweep=sweep, value=value, method=method, status="ok",
                   customers=members[0]["customers"],
                   vehicles=members[0]["vehicles"])
        for col in _NUMERIC:
            vals = [float(m[col]) for m in members if m[col] != ""]
            if vals:
                row[col] = sum(vals) / len(vals)
        out.append(row)
    return out


def to_csv(rows: List[Dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()
