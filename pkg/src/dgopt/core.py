"""Objective abstraction, smoothness metadata and the shared vocabulary.

An :class:`Objective` is a plain container of callables; everything downstream
(discrete gradient evaluations, inner solvers, the outer iteration, the
experiment harness) talks to this interface only.  Objectives are immutable
after construction and evaluations are pure, so they are safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

Array = np.ndarray


class EvaluationError(RuntimeError):
    """An objective or gradient evaluation produced a non-finite result."""


class ConfigError(ValueError):
    """Invalid configuration or a missing constant."""


class MetadataError(ValueError):
    """Declared smoothness constants contradict sampled behaviour."""


class CoordinateContext:
    """Stateful view of an objective along a sweep of coordinate updates.

    The generic implementation re-evaluates the full objective; problems with
    structure (least squares, logistic, local stencils) install O(stencil)
    specialisations via ``Objective(coordinate_context=...)``.  The contract:

    - ``value`` is V at the current point,
    - ``partial(i)`` is the i-th partial derivative at the current point,
    - ``delta(i, t)`` is V(x + t e_i) - V(x) at the current point,
    - ``commit(i, t)`` moves the current point by t along e_i,
    - ``refresh()`` recomputes cached state from scratch.
    """

    def __init__(self, obj: "Objective", x: Array):
        self._obj = obj
        self.x = np.array(x, dtype=float)
        self.value = float(obj.value(self.x))
        self.evals = 1

    def partial(self, i: int) -> float:
        self.evals += 1
        return float(self._obj.partial(i, self.x))

    def delta(self, i: int, t: float) -> float:
        self.evals += 1
        xi = self.x[i]
        self.x[i] = xi + t
        v = float(self._obj.value(self.x))
        self.x[i] = xi
        return v - self.value

    def commit(self, i: int, t: float) -> None:
        self.x[i] += t
        self.value = float(self._obj.value(self.x))
        self.evals += 1

    def refresh(self) -> None:
        self.value = float(self._obj.value(self.x))

    def point(self) -> Array:
        return self.x.copy()


class LineRestriction:
    """One-dimensional restriction t -> V(x + t d) - V(x) along a fixed d."""

    def __init__(self, obj: "Objective", x: Array, d: Array):
        self._obj = obj
        self.x = np.array(x, dtype=float)
        self.d = np.array(d, dtype=float)
        self.base = float(obj.value(self.x))
        self.evals = 1

    def delta(self, t: float) -> float:
        self.evals += 1
        return float(self._obj.directional_value(self.x, self.d, t)) - self.base

    def slope0(self) -> float:
        """Directional derivative <grad V(x), d> (finite difference fallback)."""
        if self._obj.has_gradient:
            return float(self._obj.gradient(self.x) @ self.d)
        h = 1e-6 * (1.0 + float(np.linalg.norm(self.x)))
        return (self.delta(h) - self.delta(-h)) / (2.0 * h)


class Objective:
    """A smooth function V: R^n -> R with optional derivative information.

    Parameters
    ----------
    dim : ambient dimension n.
    value : callable x -> V(x).
    gradient : callable x -> grad V(x), or None for derivative-free use.
    partial : callable (i, x) -> dV/dx_i; derived from `gradient` or central
        differences when omitted.
    directional_value : callable (x, d, a) -> V(x + a d); defaults to a full
        evaluation.  This is the only evaluation the scalar solver needs.
    coordinate_context : optional factory x -> CoordinateContext with cheap
        per-coordinate updates.
    line_restriction : optional factory (x, d) -> LineRestriction.
    """

    def __init__(
        self,
        dim: int,
        value: Callable[[Array], float],
        gradient: Optional[Callable[[Array], Array]] = None,
        partial: Optional[Callable[[int, Array], float]] = None,
        directional_value: Optional[Callable[[Array, Array, float], float]] = None,
        coordinate_context: Optional[Callable[["Objective", Array], CoordinateContext]] = None,
        line_restriction: Optional[Callable[["Objective", Array, Array], LineRestriction]] = None,
        name: str = "",
    ):
        if dim < 1:
            raise ConfigError("objective dimension must be positive")
        self.dim = int(dim)
        self.name = name
        self._value = value
        self._gradient = gradient
        self._partial = partial
        self._directional_value = directional_value
        self._coordinate_context = coordinate_context
        self._line_restriction = line_restriction

    @property
    def has_gradient(self) -> bool:
        return self._gradient is not None

    def value(self, x: Array) -> float:
        return float(self._value(np.asarray(x, dtype=float)))

    def gradient(self, x: Array) -> Array:
        if self._gradient is None:
            raise ConfigError(f"objective {self.name!r} has no gradient")
        return np.asarray(self._gradient(np.asarray(x, dtype=float)), dtype=float)

    def partial(self, i: int, x: Array) -> float:
        if self._partial is not None:
            return float(self._partial(i, np.asarray(x, dtype=float)))
        if self._gradient is not None:
            return float(self.gradient(x)[i])
        # central difference on the coordinate restriction
        x = np.asarray(x, dtype=float)
        h = 1e-6 * (1.0 + abs(float(x[i])))
        e = np.zeros(self.dim)
        e[i] = 1.0
        return (self.directional_value(x, e, h) - self.directional_value(x, e, -h)) / (2.0 * h)

    def directional_value(self, x: Array, d: Array, alpha: float) -> float:
        if self._directional_value is not None:
            return float(self._directional_value(np.asarray(x, dtype=float), np.asarray(d, dtype=float), float(alpha)))
        return self.value(np.asarray(x, dtype=float) + float(alpha) * np.asarray(d, dtype=float))

    def coordinate_context(self, x: Array) -> CoordinateContext:
        if self._coordinate_context is not None:
            return self._coordinate_context(self, x)
        return CoordinateContext(self, x)

    def line_restriction(self, x: Array, d: Array) -> LineRestriction:
        if self._line_restriction is not None:
            return self._line_restriction(self, x, d)
        return LineRestriction(self, x, d)

    def __repr__(self) -> str:
        return f"Objective(dim={self.dim}, name={self.name!r})"


@dataclass(frozen=True, eq=False)
class SmoothnessInfo:
    """Smoothness and convexity constants of one objective.

    L is the global gradient Lipschitz constant.  ``L_coord[i]`` bounds the
    Lipschitz constant of the i-th partial derivative as a function of the
    full point; ``L_sum`` is their l2 aggregate and always lies in
    [L, sqrt(n) L].  ``L_dir_coord[i]`` bounds the curvature of the restriction
    to the i-th coordinate axis (used for per-coordinate time steps) and
    ``L_max_dir`` is its maximum.  ``mu`` is the strong convexity modulus
    (0 when merely convex or nonconvex) and ``pl_mu`` the gradient-dominance
    constant (0 when unknown).  ``V_star`` is the known minimum value when
    available.
    """

    L: float
    L_coord: Array
    L_sum: float
    L_max_dir: float
    mu: float = 0.0
    pl_mu: float = 0.0
    V_star: Optional[float] = None
    L_dir_coord: Optional[Array] = None
    convex: bool = False

    def __post_init__(self):
        n = len(self.L_coord)
        tol = 1e-9
        if self.L < 0 or self.mu < 0 or self.pl_mu < 0:
            raise MetadataError("smoothness constants must be nonnegative")
        if self.mu > 0 and self.pl_mu < self.mu * (1 - tol):
            raise MetadataError("pl_mu must dominate mu for mu-convex objectives")
        if self.mu > self.L * (1 + tol):
            raise MetadataError("mu exceeds L")
        if self.L_sum < self.L * (1 - tol):
            raise MetadataError(f"L_sum={self.L_sum} below L={self.L}")
        if self.L_sum > math.sqrt(n) * self.L * (1 + tol):
            raise MetadataError(f"L_sum={self.L_sum} above sqrt(n)*L")
        if self.L_max_dir > self.L * (1 + tol):
            raise MetadataError("L_max_dir exceeds L")

    @property
    def dim(self) -> int:
        return len(self.L_coord)

    def coordinate_steps(self, factor: float = 2.0) -> Array:
        """Per-coordinate time steps factor / L_i from the directional constants."""
        L_dir = self.L_dir_coord if self.L_dir_coord is not None else self.L_coord
        return factor / np.asarray(L_dir, dtype=float)


class DirectionKind(Enum):
    CYCLIC_COORDINATES = "cyclic_coordinates"
    UNIFORM_COORDINATES = "uniform_coordinates"
    UNIFORM_SPHERE = "uniform_sphere"


@dataclass(frozen=True)
class DirectionDistribution:
    """Distribution of descent directions for the randomised method.

    ``zeta`` is the direction-coverage constant min_e E[<d, e>^2]; it equals
    1/n exactly for the uniform distribution on coordinates and on the sphere.
    """

    kind: DirectionKind
    dim: int
    zeta: float

    def __post_init__(self):
        if not (0.0 < self.zeta <= 1.0):
            raise ConfigError("zeta must lie in (0, 1]")

    @staticmethod
    def cyclic(n: int) -> "DirectionDistribution":
        return DirectionDistribution(DirectionKind.CYCLIC_COORDINATES, n, 1.0 / n)

    @staticmethod
    def uniform_coordinates(n: int) -> "DirectionDistribution":
        return DirectionDistribution(DirectionKind.UNIFORM_COORDINATES, n, 1.0 / n)

    @staticmethod
    def uniform_sphere(n: int) -> "DirectionDistribution":
        return DirectionDistribution(DirectionKind.UNIFORM_SPHERE, n, 1.0 / n)

    @property
    def coordinate_based(self) -> bool:
        return self.kind in (DirectionKind.CYCLIC_COORDINATES, DirectionKind.UNIFORM_COORDINATES)

    def sample(self, rng: np.random.Generator, k: int):
        """Return (coordinate index or None, unit direction) for update k."""
        if self.kind is DirectionKind.CYCLIC_COORDINATES:
            i = k % self.dim
            d = np.zeros(self.dim)
            d[i] = 1.0
            return i, d
        if self.kind is DirectionKind.UNIFORM_COORDINATES:
            i = int(rng.integers(self.dim))
            d = np.zeros(self.dim)
            d[i] = 1.0
            return i, d
        g = rng.normal(size=self.dim)
        norm = float(np.linalg.norm(g))
        while norm == 0.0:  # pragma: no cover
            g = rng.normal(size=self.dim)
            norm = float(np.linalg.norm(g))
        return None, g / norm


def finite_difference_gradient(obj: Objective, x: Array, h: float) -> Array:
    """Central-difference gradient, the testing oracle for analytic gradients."""
    if h <= 0:
        raise ConfigError("finite difference step must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty(obj.dim)
    xp = x.copy()
    for i in range(obj.dim):
        xi = x[i]
        xp[i] = xi + h
        up = obj.value(xp)
        xp[i] = xi - h
        dn = obj.value(xp)
        xp[i] = xi
        if not (math.isfinite(up) and math.isfinite(dn)):
            raise EvaluationError(f"non-finite value near coordinate {i}")
        g[i] = (up - dn) / (2.0 * h)
    return g


@dataclass
class SmoothnessReport:
    samples: int
    max_ratio_global: float
    max_ratio_coord: float
    worst_coord: int
    ok: bool


def validate_smoothness(
    obj: Objective,
    info: SmoothnessInfo,
    samples: int,
    seed: int,
    scale: float = 1.0,
    center: Optional[Array] = None,
) -> SmoothnessReport:
    """Sample random pairs and check the declared Lipschitz constants.

    Checks |grad V(x) - grad V(y)| <= L |x - y| and the coordinate-wise
    analogue with L_coord.  Raises :class:`MetadataError` when any observed
    ratio exceeds 1.01, naming the offending constant.
    """
    if samples < 1:
        raise ConfigError("samples must be positive")
    rng = np.random.default_rng(seed)
    c = np.zeros(obj.dim) if center is None else np.asarray(center, dtype=float)
    L_coord = np.asarray(info.L_coord, dtype=float)
    max_g = 0.0
    max_c = 0.0
    worst = 0
    for _ in range(samples):
        x = c + scale * rng.normal(size=obj.dim)
        y = c + scale * rng.normal(size=obj.dim)
        dist = float(np.linalg.norm(x - y))
        if dist == 0.0:
            continue
        gx = obj.gradient(x)
        gy = obj.gradient(y)
        ratio = float(np.linalg.norm(gx - gy)) / (info.L * dist)
        max_g = max(max_g, ratio)
        ratios = np.abs(gx - gy) / (L_coord * dist)
        j = int(np.argmax(ratios))
        if ratios[j] > max_c:
            max_c = float(ratios[j])
            worst = j
    ok = max_g <= 1.01 and max_c <= 1.01
    report = SmoothnessReport(samples, max_g, max_c, worst, ok)
    if max_g > 1.01:
        raise MetadataError(f"global constant L={info.L} violated: observed ratio {max_g:.6f}")
    if max_c > 1.01:
        raise MetadataError(
            f"coordinate constant L_coord[{worst}]={L_coord[worst]} violated: observed ratio {max_c:.6f}"
        )
    return report
