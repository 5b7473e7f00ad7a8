"""Theoretical convergence-rate calculators.

Each method carries a per-iteration estimate beta (V_k - V_{k+1}) >= |grad
V(x_k)|^2, from which the O(1/k) bound for smooth convex coercive objectives
and the linear rate under gradient dominance follow.  The calculators are
used both for plot overlays and for bound-checking tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Array, ConfigError, DirectionDistribution, Objective, SmoothnessInfo
from .discrete_gradients import DiscreteGradientKind


@dataclass(frozen=True)
class RateInputs:
    """Constants feeding the rate calculators for one (method, step) pair."""

    method: DiscreteGradientKind
    tau: float
    L: Optional[float] = None
    L_sum: Optional[float] = None
    L_max: Optional[float] = None
    zeta: Optional[float] = None
    mu: float = 0.0
    pl_mu: float = 0.0
    R0: float = 0.0
    V0_gap: float = 0.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.zeta is not None and not (0.0 < self.zeta <= 1.0):
            raise ConfigError("zeta must lie in (0, 1]")

    @staticmethod
    def from_problem(
        method: DiscreteGradientKind,
        tau: float,
        info: SmoothnessInfo,
        dist: Optional[DirectionDistribution] = None,
        R0: float = 0.0,
        V0_gap: float = 0.0,
    ) -> "RateInputs":
        l_max = info.L_max_dir if (dist is None or dist.coordinate_based) else info.L
        zeta = dist.zeta if dist is not None else 1.0 / info.dim
        return RateInputs(method, tau, L=info.L, L_sum=info.L_sum, L_max=l_max,
                          zeta=zeta, mu=info.mu, pl_mu=info.pl_mu, R0=R0, V0_gap=V0_gap)


def _require(value, name):
    if value is None or value <= 0:
        raise ConfigError(f"rate calculation needs positive {name}")
    return float(value)


def beta(method: DiscreteGradientKind, tau: float, inputs: RateInputs) -> float:
    """Per-iteration estimate constant for the given method and time step."""
    if tau <= 0:
        raise ConfigError("tau must be positive")
    if method is DiscreteGradientKind.GONZALEZ:
        L = _require(inputs.L, "L")
        return 2.0 * (1.0 / tau + L * L * tau / 2.0)
    if method is DiscreteGradientKind.MEAN_VALUE:
        L = _require(inputs.L, "L")
        return 2.0 * (1.0 / tau + L * L * tau / 4.0)
    if method is DiscreteGradientKind.ITOH_ABE:
        L_sum = _require(inputs.L_sum, "L_sum")
        return 2.0 * (1.0 / tau + L_sum * L_sum * tau)
    if method is DiscreteGradientKind.RANDOMIZED_ITOH_ABE:
        L_max = _require(inputs.L_max, "L_max")
        zeta = _require(inputs.zeta, "zeta")
        return tau * (1.0 / tau + L_max / 2.0) ** 2 / zeta
    raise ConfigError(f"unknown method {method}")


def tau_star(method: DiscreteGradientKind, inputs: RateInputs) -> float:
    """Time step minimising beta for the method."""
    if method is DiscreteGradientKind.GONZALEZ:
        return math.sqrt(2.0) / _require(inputs.L, "L")
    if method is DiscreteGradientKind.MEAN_VALUE:
        return 2.0 / _require(inputs.L, "L")
    if method is DiscreteGradientKind.ITOH_ABE:
        return 1.0 / _require(inputs.L_sum, "L_sum")
    if method is DiscreteGradientKind.RANDOMIZED_ITOH_ABE:
        return 2.0 / _require(inputs.L_max, "L_max")
    raise ConfigError(f"unknown method {method}")


def beta_star(method: DiscreteGradientKind, inputs: RateInputs) -> float:
    """Minimal beta: 2 sqrt(2) L, 2L, 4 L_sum, 2 L_max / zeta respectively."""
    return beta(method, tau_star(method, inputs), inputs)


def sublinear_bound(k: int, beta_value: float, L: float, R0: float) -> float:
    """O(1/k) bound beta R0^2 / (k + 2 beta / L) for smooth convex coercive V."""
    if k < 0:
        raise ConfigError("k must be nonnegative")
    if beta_value <= 0 or L <= 0:
        raise ConfigError("beta and L must be positive")
    return beta_value * R0 * R0 / (k + 2.0 * beta_value / L)


def linear_bound(k: int, beta_value: float, pl_mu: float, V0_gap: float) -> float:
    """Linear rate (1 - 2 mu / beta)^k (V(x0) - V*) under gradient dominance."""
    if k < 0:
        raise ConfigError("k must be nonnegative")
    if beta_value <= 0 or pl_mu < 0:
        raise ConfigError("beta must be positive and pl_mu nonnegative")
    if 2.0 * pl_mu > beta_value:
        raise ConfigError("2*pl_mu exceeds beta; the bound is vacuous")
    return (1.0 - 2.0 * pl_mu / beta_value) ** k * V0_gap


def cd_beta_appendix(alpha: float, n: int, L: float, L_min: float, L_max: float) -> float:
    """Sharpened cyclic-CD estimate 2 L_max (1 + n a^2 L^2 / L_min^2) / (a - a^2/2)
    for the steps tau_i = alpha / L_i; at alpha = 1/sqrt(n) with equal L_i it
    reduces to 4 L sqrt(n) * 2 sqrt(n) / (2 sqrt(n) - 1)."""
    if not (0.0 < alpha < 2.0):
        raise ConfigError("alpha must lie in (0, 2)")
    if min(L, L_min, L_max) <= 0:
        raise ConfigError("Lipschitz constants must be positive")
    return 2.0 * L_max * (1.0 + n * alpha * alpha * L * L / (L_min * L_min)) / (alpha - alpha * alpha / 2.0)


def quadratic_initial_radius(V0_gap: float, mu_plus: float) -> float:
    """Effective sublevel diameter 2 sqrt(2 (V(x0)-V*) / mu_plus) of a quadratic.

    ``mu_plus`` is the smallest nonzero curvature; directions the objective is
    flat along are excluded (the distance-to-minimiser-set bound the O(1/k)
    proof needs is controlled by the nonflat part).
    """
    if mu_plus <= 0:
        raise ConfigError("mu_plus must be positive")
    if V0_gap < 0:
        raise ConfigError("V0_gap must be nonnegative")
    return 2.0 * math.sqrt(2.0 * V0_gap / mu_plus)


def estimate_initial_radius(
    obj: Objective,
    x0: Array,
    center: Optional[Array] = None,
    samples: int = 64,
    seed: int = 0,
    cap: float = 1e6,
    safety: float = 1.1,
) -> float:
    """Sampled upper bound for the diameter of {V <= V(x0)}.

    Shoots random rays from ``center`` (the minimiser when known, else x0),
    bisects for the sublevel boundary along each +/- pair, caps unbounded
    rays, and applies a safety factor so downstream bound checks stay valid.
    """
    x0 = np.asarray(x0, dtype=float)
    c = x0 if center is None else np.asarray(center, dtype=float)
    v0 = obj.value(x0)
    rng = np.random.default_rng(seed)

    def exit_time(d):
        lo, hi = 0.0, 1.0
        while obj.value(c + hi * d) <= v0 and hi < cap:
            lo, hi = hi, 2.0 * hi
        if hi >= cap:
            return cap
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if obj.value(c + mid * d) <= v0:
                lo = mid
            else:
                hi = mid
        return lo

    best = 0.0
    for _ in range(samples):
        d = rng.normal(size=obj.dim)
        d /= np.linalg.norm(d)
        best = max(best, exit_time(d) + exit_time(-d))
    return safety * best
