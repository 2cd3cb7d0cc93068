"""The customer's problem: choose a flexibility delta in [0, delta_bar] that
minimises inconvenience(delta) - q * delta for an offered discount price q.

The inconvenience is a convex piecewise-linear function given as the maximum
of affine segments.  Inside the single-level model the customer problem is
encoded as the epigraph LP

    min  z - q*delta
    s.t. z >= slope_n * delta + intercept_n   (mu_n >= 0)
         delta >= 0                           (sigma >= 0)
         delta <= delta_bar                   (u >= 0)

whose KKT system is what :func:`kkt_certificate` reconstructs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidDiscount, NotOptimal, Unreachable

TIE_TOL = 1e-9
KKT_TOL = 1e-8
SLOPE_TOL = 1e-12


@dataclass(frozen=True)
class PwlInconvenience:
    """Convex piecewise-linear inconvenience max_n(slope_n * delta + intercept_n)."""

    segments: Tuple[Tuple[float, float], ...]
    delta_bar: float

    def __post_init__(self):
        segs = tuple((float(g), float(c)) for g, c in self.segments)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "delta_bar", float(self.delta_bar))
        if not segs:
            raise ValueError("inconvenience needs at least one segment")
        slopes = [g for g, _ in segs]
        if len(set(slopes)) != len(slopes):
            raise ValueError("segment slopes must be distinct")
        if not all(np.isfinite(v) for s in segs for v in s):
            raise ValueError("non-finite segment coefficient")
        if not (self.delta_bar >= 0 and np.isfinite(self.delta_bar)):
            raise ValueError("delta_bar must be finite and >= 0")

    @classmethod
    def two_segment(cls, gamma=0.5, chi=(-0.01, 0.01), delta_bar=1.0):
        """Symmetric V shape with slopes (gamma, -gamma), the default family."""
        return cls(((gamma, chi[0]), (-gamma, chi[1])), delta_bar)

    @property
    def slopes(self) -> np.ndarray:
        return np.array([g for g, _ in self.segments])

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([c for _, c in self.segments])

    @property
    def max_abs_slope(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    @property
    def max_abs_intercept(self) -> float:
        return float(np.max(np.abs(self.intercepts)))

    def __call__(self, delta):
        d = np.asarray(delta, dtype=float)
        vals = np.max(np.multiply.outer(d, self.slopes) + self.intercepts, axis=-1)
        return float(vals) if vals.ndim == 0 else vals

    def breakpoints(self) -> list:
        """Kinks of the envelope strictly inside (0, delta_bar), ascending."""
        pts = set()
        segs = self.segments
        for a in range(len(segs)):
            for b in range(a + 1, len(segs)):
                (ga, ca), (gb, cb) = segs[a], segs[b]
                d = (cb - ca) / (ga - gb)
                if 0.0 < d < self.delta_bar:
                    env = self(d)
                    if abs(env - (ga * d + ca)) <= TIE_TOL * (1 + abs(env)):
                        pts.add(d)
        return sorted(pts)

    def candidates(self) -> list:
        return [0.0] + self.breakpoints() + ([self.delta_bar] if self.delta_bar > 0 else [])

    def active_interval(self, n: int) -> Optional[Tuple[float, float]]:
        """Where segment n touches the envelope on [0, delta_bar], or None.

        The set is an interval of a convex function's support line, so its
        endpoints are among the candidate points.
        """
        g, c = self.segments[n]
        hits = [d for d in self.candidates()
                if self(d) - (g * d + c) <= TIE_TOL * (1 + abs(self(d)))]
        return (min(hits), max(hits)) if hits else None

    def value_range(self) -> Tuple[float, float]:
        """(min, max) of the inconvenience over [0, delta_bar]."""
        vals = [self(d) for d in self.candidates()]
        return min(vals), max(vals)


@dataclass(frozen=True)
class BestResponse:
    arg_lo: float
    arg_hi: float
    value: float

    def contains(self, delta, tol=TIE_TOL) -> bool:
        return self.arg_lo - tol <= delta <= self.arg_hi + tol


@dataclass(frozen=True)
class KktCertificate:
    mu: Tuple[float, ...]
    sigma: float
    u: float
    z: float


def _check_q(q):
    if not np.isfinite(q) or q < 0:
        raise InvalidDiscount(f"discount price must be finite and >= 0, got {q}")


def best_response(q: float, fn: PwlInconvenience) -> BestResponse:
    """Exact minimiser interval of fn(delta) - q*delta over [0, delta_bar]."""
    _check_q(q)
    pts = fn.candidates()
    vals = [fn(d) - q * d for d in pts]
    best = min(vals)
    # the objective is convex, so a candidate minimises it exactly when q lies
    # in its subgradient window; slopes and q are exact inputs, so the window
    # test needs only rounding slack, unlike value ties on tiny domains
    hits = []
    for d in pts:
        _, _, _, _, q_lo, q_hi = _slope_window(d, fn)
        if q_lo - SLOPE_TOL <= q <= q_hi + SLOPE_TOL:
            hits.append(d)
    if not hits:
        tol = TIE_TOL * (1.0 + abs(best))
        hits = [d for d, v in zip(pts, vals) if v - best <= tol]
    return BestResponse(min(hits), max(hits), best)


def best_response_brute(q: float, fn: PwlInconvenience, grid_points: int) -> BestResponse:
    """Grid-search oracle; arg_lo/arg_hi are the first/last grid minimisers."""
    _check_q(q)
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    grid = np.linspace(0.0, fn.delta_bar, grid_points)
    vals = fn(grid) - q * grid
    vals = np.atleast_1d(vals)
    best = float(vals.min())
    idx = np.flatnonzero(vals <= best + TIE_TOL * (1.0 + abs(best)))
    return BestResponse(float(grid[idx[0]]), float(grid[idx[-1]]), best)


def _slope_window(delta, fn):
    """Active segment indices and the admissible range of the stationarity term."""
    z = fn(delta)
    g = fn.slopes
    line = g * delta + fn.intercepts
    active = [n for n in range(len(g)) if z - line[n] <= TIE_TOL * (1.0 + abs(z))]
    lo, hi = min(g[active]), max(g[active])
    at_zero = delta <= TIE_TOL
    at_top = delta >= fn.delta_bar - TIE_TOL
    # sigma absorbs q below the window at delta = 0, u absorbs q above it at delta_bar
    q_lo = -np.inf if at_zero else lo
    q_hi = np.inf if at_top else hi
    return z, active, lo, hi, q_lo, q_hi


def kkt_certificate(delta: float, q: float, fn: PwlInconvenience) -> KktCertificate:
    """Multipliers proving delta optimal for price q, or NotOptimal.

    The stationarity term sum_n mu_n*slope_n is set to q clamped into the
    range spanned by the active slopes; sigma or u absorbs the remainder.
    """
    _check_q(q)
    if not (-TIE_TOL <= delta <= fn.delta_bar + TIE_TOL):
        raise ValueError(f"delta {delta} outside [0, {fn.delta_bar}]")
    delta = min(max(delta, 0.0), fn.delta_bar)
    z, active, lo, hi, q_lo, q_hi = _slope_window(delta, fn)
    residual = max(q_lo - q, q - q_hi, 0.0)
    if residual > KKT_TOL:
        raise NotOptimal(f"delta={delta} is not a best response to q={q}", residual)

    target = min(max(q, lo), hi)
    slopes = fn.slopes
    mu = [0.0] * len(slopes)
    exact = [n for n in active if abs(slopes[n] - target) <= TIE_TOL]
    if exact:
        mu[exact[0]] = 1.0
    else:
        a = next(n for n in active if slopes[n] < target)
        b = next(n for n in active if slopes[n] > target)
        w = (target - slopes[b]) / (slopes[a] - slopes[b])
        mu[a], mu[b] = w, 1.0 - w
    diff = target - q
    sigma = max(diff, 0.0)
    u = max(-diff, 0.0)
    return KktCertificate(tuple(mu), sigma, u, z)


def check_certificate(cert: KktCertificate, delta, q, fn: PwlInconvenience) -> float:
    """Largest violation of the epigraph-LP KKT conditions (0 when exact)."""
    mu = np.asarray(cert.mu)
    lines = fn.slopes * delta + fn.intercepts
    viol = [
        abs(mu.sum() - 1.0),
        max(-mu.min(), 0.0),
        max(-cert.sigma, 0.0),
        max(-cert.u, 0.0),
        abs(mu @ fn.slopes - q - cert.sigma + cert.u),
        max(np.max(lines - cert.z), 0.0),
        float(np.max(np.abs(mu * (cert.z - lines)))),
        abs(cert.sigma * delta),
        abs(cert.u * (fn.delta_bar - delta)),
    ]
    return max(viol)


def discount_identity(cert: KktCertificate, delta: float, q: float, fn: PwlInconvenience) -> float:
    """Residual of q*delta = z + u*delta_bar - sum_n mu_n*intercept_n."""
    dual_const = float(np.dot(cert.mu, fn.intercepts))
    return q * delta - (cert.z + cert.u * fn.delta_bar - dual_const)


def discount_cost(
    delta_target: float, fn: PwlInconvenience, q_max: Optional[float] = None
) -> Tuple[float, float]:
    """Cheapest (q, q*delta) such that some best response delta >= delta_target.

    The operator is optimistic: any point of a tied best-response interval may
    be selected.  Best-response sets move right as q grows, so the smallest
    price whose interval reaches the target is the cheapest; that price is 0 or
    one of the segment slopes.
    """
    if q_max is None:
        q_max = default_q_max([fn])
    if delta_target < -TIE_TOL or delta_target > fn.delta_bar + TIE_TOL:
        raise Unreachable(f"target {delta_target} outside [0, {fn.delta_bar}]")
    delta_target = max(delta_target, 0.0)
    prices = sorted({0.0} | {float(g) for g in fn.slopes if 0.0 < g <= q_max})
    for q in prices:
        br = best_response(q, fn)
        if br.arg_hi >= delta_target - TIE_TOL:
            d = max(delta_target, br.arg_lo)
            return q, q * d
    raise Unreachable(f"no price <= {q_max} buys flexibility {delta_target}")


def default_q_max(fns: Sequence[PwlInconvenience]) -> float:
    """Twice the steepest slope; any larger price already buys delta_bar."""
    return 2.0 * max(f.max_abs_slope for f in fns)
