"""Solve outcome shared by every solution method."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

METHODS = ("monolithic", "gbd", "bdd", "vrp", "oracle")


@dataclass
class RunReport:
    method: str
    objective: float
    routes: List[List[int]]
    q: Dict[int, float] = field(default_factory=dict)
    delta: Dict[int, float] = field(default_factory=dict)
    t: Dict[int, float] = field(default_factory=dict)
    lb_trace: List[float] = field(default_factory=list)
    ub_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    fractional_iterations: int = 0
    cuts: list = field(default_factory=list)
    xi: List[float] = field(default_factory=list)
    xi_checks: List[dict] = field(default_factory=list)
    wall_time: float = 0.0
    first_stage: float = 0.0
    x: Optional[dict] = None
    omega: Optional[dict] = None

    @property
    def served(self) -> List[int]:
        return sorted(c for r in self.routes for c in r[1:-1])

    @property
    def discount_spend(self) -> float:
        return float(sum(self.q.get(j, 0.0) * self.delta.get(j, 0.0) for j in self.served))

    @property
    def gap(self) -> float:
        if not self.lb_trace or not self.ub_trace:
            return 0.0
        ub, lb = self.ub_trace[-1], self.lb_trace[-1]
        return (ub - lb) / max(1.0, abs(ub))

    def summary(self) -> dict:
        return {
            "method": self.method,
            "objective": self.objective,
            "routes": self.routes,
            "served": self.served,
            "q": {str(k): v for k, v in sorted(self.q.items())},
            "delta": {str(k): v for k, v in sorted(self.delta.items())},
            "iterations": self.iterations,
            "fractional_iterations": self.fractional_iterations,
            "cuts": len(self.cuts),
            "wall_time": self.wall_time,
        }
