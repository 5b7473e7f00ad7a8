"""The four discrete gradient constructions and their defining-property checks.

A discrete gradient is a two-point map DG(x, y) satisfying

    <DG(x, y), y - x> = V(y) - V(x)      (mean value property)
    DG(x, x) = grad V(x)                 (consistency)

The Gonzalez and mean value constructions are gradient based; the Itoh-Abe
construction is built from successive coordinate difference quotients and is
derivative-free away from its 0/0 branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .core import Array, ConfigError, EvaluationError, Objective

GONZALEZ_DEGENERACY = 1e-14


class DiscreteGradientKind(Enum):
    GONZALEZ = "gonzalez"
    MEAN_VALUE = "mean_value"
    ITOH_ABE = "itoh_abe"
    RANDOMIZED_ITOH_ABE = "randomized_itoh_abe"


#: Boundedness constants C_n such that |DG(x,y)| <= C_n sup|grad V| on a
#: convex set (thickened by delta(diam) for Itoh-Abe, where delta(r) = r).
def boundedness_constant(kind: DiscreteGradientKind, dim: int) -> float:
    if kind is DiscreteGradientKind.GONZALEZ:
        return math.sqrt(2.0)
    if kind is DiscreteGradientKind.MEAN_VALUE:
        return 1.0
    if kind in (DiscreteGradientKind.ITOH_ABE, DiscreteGradientKind.RANDOMIZED_ITOH_ABE):
        return math.sqrt(dim)
    raise ConfigError(f"unknown kind {kind}")


def thickening(kind: DiscreteGradientKind, diam: float) -> float:
    """Radius increase of the region whose gradient sup controls the DG."""
    if kind in (DiscreteGradientKind.ITOH_ABE, DiscreteGradientKind.RANDOMIZED_ITOH_ABE):
        return diam
    return 0.0


@dataclass(frozen=True)
class QuadratureConfig:
    """Fixed-order Gauss-Legendre rule on [0, 1] for the mean value integral."""

    order: int = 20

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError("quadrature order must be >= 1")

    def nodes(self):
        return _gl_nodes(self.order)


@lru_cache(maxsize=32)
def _gl_nodes(order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    return (t + 1.0) / 2.0, w / 2.0


@dataclass
class DGEvaluation:
    """One discrete gradient value with its mean-value defect and eval count."""

    dg: Array
    mv_residual: float
    evals: int


def _mv_residual(dg: Array, x: Array, y: Array, vx: float, vy: float) -> float:
    return abs(float(dg @ (y - x)) - (vy - vx))


def gonzalez_dg(obj: Objective, x: Array, y: Array) -> DGEvaluation:
    """Midpoint gradient plus the rank-one correction along y - x.

    Below the degeneracy threshold |y - x| <= 1e-14 (1 + |x|) the consistency
    limit grad V(x) is returned, since the correction divides by |y - x|^2.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = y - x
    nrm2 = float(diff @ diff)
    if math.sqrt(nrm2) <= GONZALEZ_DEGENERACY * (1.0 + float(np.linalg.norm(x))):
        return DGEvaluation(obj.gradient(x), 0.0, 1)
    gm = obj.gradient((x + y) / 2.0)
    vx = obj.value(x)
    vy = obj.value(y)
    dg = gm + ((vy - vx) - float(gm @ diff)) / nrm2 * diff
    if not np.all(np.isfinite(dg)):
        raise EvaluationError("non-finite Gonzalez discrete gradient")
    return DGEvaluation(dg, _mv_residual(dg, x, y, vx, vy), 3)


def mean_value_dg(
    obj: Objective, x: Array, y: Array, quad: QuadratureConfig = QuadratureConfig()
) -> DGEvaluation:
    """Gauss-Legendre approximation of the segment-averaged gradient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        return DGEvaluation(obj.gradient(x), 0.0, 1)
    nodes, weights = quad.nodes()
    dg = np.zeros(obj.dim)
    for s, w in zip(nodes, weights):
        dg += w * obj.gradient((1.0 - s) * x + s * y)
    if not np.all(np.isfinite(dg)):
        raise EvaluationError("non-finite mean value discrete gradient")
    vx = obj.value(x)
    vy = obj.value(y)
    return DGEvaluation(dg, _mv_residual(dg, x, y, vx, vy), quad.order + 2)


def itoh_abe_dg(obj: Objective, x: Array, y: Array) -> DGEvaluation:
    """Successive coordinate difference quotients; 0/0 takes the partial at
    the mixed point (y_1..y_{i-1}, x_i..x_n)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = obj.dim
    dg = np.empty(n)
    z = x.copy()
    v_prev = obj.value(z)
    vx = v_prev
    evals = 1
    for i in range(n):
        if y[i] == x[i]:
            dg[i] = obj.partial(i, z)
            evals += 1
            continue
        z[i] = y[i]
        v_next = obj.value(z)
        evals += 1
        dg[i] = (v_next - v_prev) / (y[i] - x[i])
        v_prev = v_next
    if not np.all(np.isfinite(dg)):
        raise EvaluationError("non-finite Itoh-Abe discrete gradient")
    vy = v_prev if np.array_equal(z, y) else obj.value(y)
    return DGEvaluation(dg, _mv_residual(dg, x, y, vx, vy), evals)


def evaluate_dg(
    kind: DiscreteGradientKind,
    obj: Objective,
    x: Array,
    y: Array,
    quad: QuadratureConfig = QuadratureConfig(),
) -> DGEvaluation:
    if kind is DiscreteGradientKind.GONZALEZ:
        return gonzalez_dg(obj, x, y)
    if kind is DiscreteGradientKind.MEAN_VALUE:
        return mean_value_dg(obj, x, y, quad)
    if kind in (DiscreteGradientKind.ITOH_ABE, DiscreteGradientKind.RANDOMIZED_ITOH_ABE):
        return itoh_abe_dg(obj, x, y)
    raise ConfigError(f"unknown kind {kind}")


@dataclass
class DGAxiomReport:
    kind: DiscreteGradientKind
    trials: int
    max_relative_residual: float
    consistency_slopes: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def min_slope(self) -> float:
        return min(self.consistency_slopes) if self.consistency_slopes else float("nan")

    @property
    def ok(self) -> bool:
        return not self.failures


def check_dg_axioms(
    kind: DiscreteGradientKind,
    obj: Objective,
    trials: int,
    seed: int,
    scale: float = 1.0,
    step_scale: float = 1.0,
    center: Optional[Array] = None,
    h_values: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
    quad: QuadratureConfig = QuadratureConfig(),
    rtol: float = 1e-8,
    atol: float = 1e-10,
    slope_min: float = 0.9,
    consistency_trials: int = 8,
) -> DGAxiomReport:
    """Verify the two defining properties on random pairs.

    The mean value identity is checked exactly (to atol + rtol |V(y)-V(x)|);
    consistency is checked by fitting the log-log slope of the gap
    |DG(x, x + h d) - grad V(x)| against h, which must be at least
    ``slope_min`` (below h ~ 1e-6 double-precision difference quotients hit
    the rounding floor, so the default grid stops there).
    """
    rng = np.random.default_rng(seed)
    c = np.zeros(obj.dim) if center is None else np.asarray(center, dtype=float)
    report = DGAxiomReport(kind, trials, 0.0)
    for t in range(trials):
        x = c + scale * rng.normal(size=obj.dim)
        u = rng.normal(size=obj.dim)
        u /= np.linalg.norm(u)
        y = x + step_scale * u
        ev = evaluate_dg(kind, obj, x, y, quad)
        dv = abs(obj.value(y) - obj.value(x))
        rel = ev.mv_residual / (atol + dv)
        report.max_relative_residual = max(report.max_relative_residual, rel)
        if ev.mv_residual > atol + rtol * dv:
            report.failures.append(
                {"property": "mean_value", "trial": t, "residual": ev.mv_residual, "x": x, "y": y}
            )
    hs = np.asarray(sorted(h_values, reverse=True), dtype=float)
    quotient_kind = kind in (DiscreteGradientKind.ITOH_ABE, DiscreteGradientKind.RANDOMIZED_ITOH_ABE)
    eps = np.finfo(float).eps
    for t in range(consistency_trials):
        x = c + scale * rng.normal(size=obj.dim)
        d = rng.normal(size=obj.dim)
        d /= np.linalg.norm(d)
        g0 = obj.gradient(x)
        gaps = []
        for h in hs:
            ev = evaluate_dg(kind, obj, x, x + h * d, quad)
            gaps.append(float(np.linalg.norm(ev.dg - g0)))
        gaps = np.asarray(gaps)
        # drop points the arithmetic cannot resolve: difference quotients
        # carry rounding noise ~ eps |V| / (h d_i), which blows up for small
        # direction components; gradient-based kinds only see eps |grad V|
        if quotient_kind:
            amp = float(np.linalg.norm(1.0 / d[d != 0.0])) if np.any(d != 0.0) else 1.0
            noise = 8.0 * eps * (1.0 + abs(obj.value(x))) * amp / hs
        else:
            noise = np.full_like(hs, 64.0 * eps * (1.0 + float(np.linalg.norm(g0))))
        keep = gaps > 8.0 * noise
        if keep.sum() < 2:
            # the gap sits at rounding level across the grid: consistent
            report.consistency_slopes.append(1.0)
            continue
        slope = float(np.polyfit(np.log(hs[keep]), np.log(gaps[keep]), 1)[0])
        report.consistency_slopes.append(slope)
        if slope < slope_min:
            report.failures.append({"property": "consistency", "trial": t, "slope": slope, "x": x, "d": d})
    return report


@dataclass
class BoundednessReport:
    kind: DiscreteGradientKind
    c_n: float
    max_ratio: float
    trials: int
    ok: bool


def check_boundedness_constant(
    kind: DiscreteGradientKind,
    obj: Objective,
    ball_center: Array,
    radius: float,
    trials: int,
    seed: int = 0,
    rtol: float = 1e-6,
    quad: QuadratureConfig = QuadratureConfig(),
) -> BoundednessReport:
    """Check |DG(x, y)| <= C_n sup |grad V| on pairs from a ball.

    The gradient sup is sampled over the thickened ball and, for each pair,
    over the proof-relevant points (segment nodes and the Itoh-Abe mixed
    points), so the sampled sup genuinely dominates the values entering the
    bound.
    """
    rng = np.random.default_rng(seed)
    center = np.asarray(ball_center, dtype=float)
    n = obj.dim
    c_n = boundedness_constant(kind, n)
    r_thick = radius + thickening(kind, 2.0 * radius)

    def ball_point(r):
        u = rng.normal(size=n)
        u /= np.linalg.norm(u)
        return center + r * u * rng.uniform() ** (1.0 / n)

    sup_grad = 0.0
    for _ in range(max(256, 8 * trials)):
        sup_grad = max(sup_grad, float(np.linalg.norm(obj.gradient(ball_point(r_thick)))))

    max_ratio = 0.0
    for _ in range(trials):
        x = ball_point(radius)
        y = ball_point(radius)
        local_sup = sup_grad
        for s in np.linspace(0.0, 1.0, 33):
            local_sup = max(local_sup, float(np.linalg.norm(obj.gradient((1 - s) * x + s * y))))
        if kind in (DiscreteGradientKind.ITOH_ABE, DiscreteGradientKind.RANDOMIZED_ITOH_ABE):
            z = x.copy()
            for i in range(n):
                for ci in np.linspace(x[i], y[i], 9):
                    zi = z.copy()
                    zi[i] = ci
                    local_sup = max(local_sup, float(np.linalg.norm(obj.gradient(zi))))
                z[i] = y[i]
        ev = evaluate_dg(kind, obj, x, y, quad)
        if local_sup > 0:
            max_ratio = max(max_ratio, float(np.linalg.norm(ev.dg)) / local_sup)
    return BoundednessReport(kind, c_n, max_ratio, trials, max_ratio <= c_n * (1.0 + rtol))
