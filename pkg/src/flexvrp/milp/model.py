"""Solver-neutral linear model: boxed variables, sparse rows, minimised objective."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from ..errors import ModelError

LE, GE, EQ = "<=", ">=", "=="
_SENSES = {"<=": LE, "<": LE, "L": LE, ">=": GE, ">": GE, "G": GE, "==": EQ, "=": EQ, "E": EQ}

Terms = Union[Mapping[int, float], Iterable[Tuple[int, float]]]


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    integer: bool = False


@dataclass(frozen=True)
class Row:
    index: Tuple[int, ...]
    coef: Tuple[float, ...]
    sense: str
    rhs: float
    name: str = ""

    @classmethod
    def make(cls, terms: Terms, sense: str, rhs: float, name: str = "") -> "Row":
        try:
            sense = _SENSES[sense]
        except KeyError:
            raise ModelError(f"unknown row sense {sense!r}") from None
        merged: Dict[int, float] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for j, a in items:
            merged[int(j)] = merged.get(int(j), 0.0) + float(a)
        idx = tuple(sorted(j for j, a in merged.items() if a != 0.0))
        return cls(idx, tuple(merged[j] for j in idx), sense, float(rhs), name)

    def activity(self, x) -> float:
        return float(sum(a * x[j] for j, a in zip(self.index, self.coef)))

    def violation(self, x) -> float:
        lhs = self.activity(x)
        if self.sense == LE:
            return max(lhs - self.rhs, 0.0)
        if self.sense == GE:
            return max(self.rhs - lhs, 0.0)
        return abs(lhs - self.rhs)


class LinearModel:
    """Minimise c'x + constant subject to rows and variable bounds.

    Builders mutate a model through add_var/add_row; solvers never modify it.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: List[Variable] = []
        self.rows: List[Row] = []
        self.objective: Dict[int, float] = {}
        self.obj_constant = 0.0

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, integer: bool = False) -> int:
        if lb > ub:
            raise ModelError(f"variable {name}: lb {lb} > ub {ub}")
        self.variables.append(Variable(name, float(lb), float(ub), bool(integer)))
        return len(self.variables) - 1

    def add_row(self, terms: Terms, sense: str, rhs: float, name: str = "") -> int:
        row = Row.make(terms, sense, rhs, name)
        self._check_row(row)
        self.rows.append(row)
        return len(self.rows) - 1

    def _check_row(self, row: Row) -> None:
        if row.index and (row.index[0] < 0 or row.index[-1] >= self.num_vars):
            raise ModelError(f"row {row.name!r} references a variable out of range")
        if not all(math.isfinite(a) for a in row.coef) or not math.isfinite(row.rhs):
            raise ModelError(f"row {row.name!r} has a non-finite coefficient")

    def set_objective(self, terms: Terms, constant: float = 0.0) -> None:
        items = terms.items() if isinstance(terms, Mapping) else terms
        obj: Dict[int, float] = {}
        for j, a in items:
            if not 0 <= j < self.num_vars:
                raise ModelError(f"objective references variable {j} out of range")
            obj[int(j)] = obj.get(int(j), 0.0) + float(a)
        self.objective = obj
        self.obj_constant = float(constant)

    def add_objective(self, terms: Terms, constant: float = 0.0) -> None:
        items = terms.items() if isinstance(terms, Mapping) else terms
        for j, a in items:
            self.objective[int(j)] = self.objective.get(int(j), 0.0) + float(a)
        self.obj_constant += float(constant)

    def copy(self, name: Optional[str] = None) -> "LinearModel":
        m = LinearModel(name or self.name)
        m.variables = [Variable(v.name, v.lb, v.ub, v.integer) for v in self.variables]
        m.rows = list(self.rows)
        m.objective = dict(self.objective)
        m.obj_constant = self.obj_constant
        return m

    def relaxed(self) -> "LinearModel":
        m = self.copy(self.name + "_lp")
        for v in m.variables:
            v.integer = False
        return m

    def var_index(self, name: str) -> int:
        for j, v in enumerate(self.variables):
            if v.name == name:
                return j
        raise KeyError(name)

    def check(self) -> None:
        """Raise ModelError unless every model invariant holds."""
        for v in self.variables:
            if math.isnan(v.lb) or math.isnan(v.ub) or v.lb > v.ub:
                raise ModelError(f"variable {v.name} has invalid bounds")
            if v.integer and not (math.isfinite(v.lb) and math.isfinite(v.ub)):
                raise ModelError(f"integer variable {v.name} needs finite bounds")
        for r in self.rows:
            self._check_row(r)
        for j, a in self.objective.items():
            if not (0 <= j < self.num_vars and math.isfinite(a)):
                raise ModelError(f"bad objective coefficient on variable {j}")

    # numeric views -------------------------------------------------------

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        return lb, ub

    def integrality(self) -> np.ndarray:
        return np.array([v.integer for v in self.variables], dtype=bool)

    def matrix(self) -> sp.csr_matrix:
        indptr = [0]
        idx: List[int] = []
        val: List[float] = []
        for r in self.rows:
            idx.extend(r.index)
            val.extend(r.coef)
            indptr.append(len(idx))
        return sp.csr_matrix((np.array(val, dtype=float), np.array(idx, dtype=np.int64),
                              np.array(indptr, dtype=np.int64)),
                             shape=(self.num_rows, self.num_vars))

    def row_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lo = np.full(self.num_rows, -math.inf)
        hi = np.full(self.num_rows, math.inf)
        for i, r in enumerate(self.rows):
            if r.sense in (GE, EQ):
                lo[i] = r.rhs
            if r.sense in (LE, EQ):
                hi[i] = r.rhs
        return lo, hi

    def objective_value(self, x) -> float:
        return float(sum(a * x[j] for j, a in self.objective.items()) + self.obj_constant)

    def max_violation(self, x) -> float:
        """Largest row or bound violation of the point x."""
        lb, ub = self.bounds()
        x = np.asarray(x, dtype=float)
        worst = float(np.max(np.maximum(lb - x, 0.0), initial=0.0))
        worst = max(worst, float(np.max(np.maximum(x - ub, 0.0), initial=0.0)))
        for r in self.rows:
            worst = max(worst, r.violation(x))
        return worst


def add_constraint(model: LinearModel, row: Union[Row, Tuple[Terms, str, float]]) -> LinearModel:
    """Return a copy of model with one more row; the original is untouched."""
    if not isinstance(row, Row):
        row = Row.make(*row)
    out = model.copy()
    out._check_row(row)
    out.rows.append(row)
    return out


def _lp_name(name: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_.]", "_", name)
    return s if s and not s[0].isdigit() and s[0] != "." else "v" + s


def _lp_expr(terms, names) -> str:
    parts = []
    for j, a in terms:
        sign = "-" if a < 0 else "+"
        parts.append(f"{sign} {abs(a):.12g} {names[j]}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def dump_lp(model: LinearModel) -> str:
    """CPLEX-LP-style text of the model, for cross-checking with other solvers."""
    names = [_lp_name(v.name) for v in model.variables]
    out = [f"\\ {model.name}", "Minimize"]
    obj = _lp_expr(sorted(model.objective.items()), names)
    if model.obj_constant:
        obj += f" + {model.obj_constant:.12g} __const"
    out.append(f" obj: {obj}")
    out.append("Subject To")
    for i, r in enumerate(model.rows):
        sense = {LE: "<=", GE: ">=", EQ: "="}[r.sense]
        label = _lp_name(r.name) if r.name else f"r{i}"
        out.append(f" {label}: {_lp_expr(zip(r.index, r.coef), names)} {sense} {r.rhs:.12g}")
    out.append("Bounds")
    for v, nm in zip(model.variables, names):
        if v.lb == -math.inf and v.ub == math.inf:
            out.append(f" {nm} free")
        elif v.lb == v.ub:
            out.append(f" {nm} = {v.lb:.12g}")
        else:
            lo = "-inf" if v.lb == -math.inf else f"{v.lb:.12g}"
            hi = "+inf" if v.ub == math.inf else f"{v.ub:.12g}"
            out.append(f" {lo} <= {nm} <= {hi}")
    if model.obj_constant:
        out.append(" __const = 1")
    gens = [nm for v, nm in zip(model.variables, names) if v.integer]
    if gens:
        out.append("General")
        out.extend(f" {nm}" for nm in gens)
    out.append("End")
    return "\n".join(out) + "\n"
