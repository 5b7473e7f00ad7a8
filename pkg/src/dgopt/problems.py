"""Reproducible test problems with exact smoothness constants.

Four families: least squares (optionally rank-deficient or with uniform
entries), l2-regularised logistic regression, a nonconvex sin^2 perturbation
of a quadratic satisfying gradient dominance, and smoothed total variation
denoising.  Each problem installs a coordinate context so scalar solves and
coordinate descent touch only residuals or local stencils instead of
re-evaluating the full objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .core import (
    Array,
    ConfigError,
    CoordinateContext,
    LineRestriction,
    Objective,
    SmoothnessInfo,
)


# ---------------------------------------------------------------------------
# least squares


class _LeastSquaresContext(CoordinateContext):
    """Maintains the residual r = Ax - b; coordinate updates are O(m)."""

    def __init__(self, obj, x, A, b, col_sq):
        self._obj = obj
        self.A = A
        self.b = b
        self.col_sq = col_sq
        self.x = np.array(x, dtype=float)
        self.r = A @ self.x - b
        self.value = 0.5 * float(self.r @ self.r)
        self.evals = 1
        self._cache_i = -1
        self._cache_air = 0.0

    def _air(self, i):
        if self._cache_i != i:
            self._cache_air = float(self.A[:, i] @ self.r)
            self._cache_i = i
        return self._cache_air

    def partial(self, i):
        self.evals += 1
        return self._air(i)

    def delta(self, i, t):
        self.evals += 1
        return t * self._air(i) + 0.5 * t * t * self.col_sq[i]

    def commit(self, i, t):
        air = self._air(i)
        self.x[i] += t
        self.r += t * self.A[:, i]
        self.value += t * air + 0.5 * t * t * self.col_sq[i]
        self._cache_i = -1
        self.evals += 1

    def refresh(self):
        self.r = self.A @ self.x - self.b
        self.value = 0.5 * float(self.r @ self.r)
        self._cache_i = -1


class _LeastSquaresLine(LineRestriction):
    def __init__(self, obj, x, d, A, b):
        self.x = np.array(x, dtype=float)
        self.d = np.array(d, dtype=float)
        r = A @ self.x - b
        self._Ad = A @ self.d
        self._rAd = float(r @ self._Ad)
        self._Ad_sq = float(self._Ad @ self._Ad)
        self._slope = self._rAd
        self.base = 0.5 * float(r @ r)
        self.evals = 1

    def delta(self, t):
        self.evals += 1
        return t * self._rAd + 0.5 * t * t * self._Ad_sq

    def slope0(self):
        return self._slope


@dataclass(eq=False)
class LinearSystemProblem:
    """V(x) = 0.5 |Ax - b|^2 with singular values respaced to a target
    condition number; constants, minimiser and minimum are exact."""

    A: Array
    b: Array
    kappa_target: Optional[float]
    kernel_dim: int
    objective: Objective
    smoothness: SmoothnessInfo
    x_star: Array
    V_star: float
    name: str = "linear_system"

    @property
    def mu_plus(self) -> float:
        """Smallest nonzero eigenvalue of A^T A (defines kappa and the PL rate)."""
        return self.smoothness.pl_mu

    @property
    def kappa(self) -> float:
        return self.smoothness.L / self.mu_plus

    def default_x0(self) -> Array:
        return np.zeros(self.A.shape[1])


def make_linear_system(
    n: int,
    m: Optional[int] = None,
    kappa: Optional[float] = 100.0,
    seed: int = 0,
    kernel_dim: int = 0,
    uniform_entries: bool = False,
) -> LinearSystemProblem:
    """Gaussian (or uniform) matrix with linearly respaced singular values.

    Singular values are spaced linearly in [1/sqrt(kappa), 1], so cond(A^T A)
    equals ``kappa`` exactly on the nonzero part.  ``kernel_dim`` zeroes the
    smallest singular values on top of any kernel forced by the shape
    (m < n).  ``kappa=None`` keeps the raw draw (used for the uniform-entry
    variant, whose point is the nonzero-mean structure).
    """
    if m is None:
        m = n
    r_shape = min(m, n)
    if not (0 <= kernel_dim < r_shape):
        raise ConfigError("kernel_dim must be smaller than min(m, n)")
    rng = np.random.default_rng(seed)
    G = rng.uniform(0.0, 1.0, size=(m, n)) if uniform_entries else rng.normal(size=(m, n))
    if kappa is not None:
        if kappa < 1:
            raise ConfigError("kappa must be >= 1")
        U, _, Vt = np.linalg.svd(G, full_matrices=False)
        r = r_shape - kernel_dim
        s = np.zeros(r_shape)
        s[:r] = np.linspace(1.0, 1.0 / math.sqrt(kappa), r)
        A = (U * s) @ Vt
    else:
        if kernel_dim:
            raise ConfigError("kernel_dim requires a target kappa")
        A = G
    b = rng.normal(size=m)

    M = A.T @ A
    sv = np.linalg.svd(A, compute_uv=False)
    s_pos = sv[sv > 1e-12 * sv[0]]
    L = float(s_pos[0] ** 2)
    mu_plus = float(s_pos[-1] ** 2)
    rank = len(s_pos)
    full_rank = rank == n
    col_sq = np.einsum("ij,ij->j", A, A)
    L_coord = np.linalg.norm(M, axis=0)
    L_sum = float(np.linalg.norm(M, "fro"))
    # min-norm least squares solution
    U, s_all, Vt = np.linalg.svd(A, full_matrices=False)
    inv = np.where(s_all > 1e-12 * s_all[0], 1.0 / np.where(s_all > 0, s_all, 1.0), 0.0)
    x_star = Vt.T @ (inv * (U.T @ b))
    r_star = A @ x_star - b
    V_star = 0.5 * float(r_star @ r_star)

    Atb = A.T @ b

    obj = Objective(
        dim=n,
        value=lambda x: 0.5 * float(np.sum((A @ x - b) ** 2)),
        gradient=lambda x: M @ x - Atb,
        partial=lambda i, x: float(M[i] @ x - Atb[i]),
        coordinate_context=lambda o, x: _LeastSquaresContext(o, x, A, b, col_sq),
        line_restriction=lambda o, x, d: _LeastSquaresLine(o, x, d, A, b),
        name="linear_system",
    )
    info = SmoothnessInfo(
        L=L,
        L_coord=L_coord,
        L_sum=L_sum,
        L_max_dir=float(np.max(col_sq)),
        mu=mu_plus if full_rank else 0.0,
        pl_mu=mu_plus,
        V_star=V_star,
        L_dir_coord=col_sq,
        convex=True,
    )
    return LinearSystemProblem(A, b, kappa, n - rank, obj, info, x_star, V_star)


# ---------------------------------------------------------------------------
# logistic regression


class _LogisticContext(CoordinateContext):
    """Maintains the margins t_j = y_j <w, x^j>; updates are O(m)."""

    def __init__(self, obj, w, Xy, C):
        self._obj = obj
        self.Xy = Xy  # rows y_j * x^j
        self.C = C
        self.x = np.array(w, dtype=float)
        self.t = Xy @ self.x
        self.terms = np.logaddexp(0.0, -self.t)
        self.value = C * float(np.sum(self.terms)) + 0.5 * float(self.x @ self.x)
        self.evals = 1

    def partial(self, i):
        self.evals += 1
        return -self.C * float(self.Xy[:, i] @ expit(-self.t)) + self.x[i]

    def delta(self, i, t):
        self.evals += 1
        wi = self.x[i]
        new_terms = np.logaddexp(0.0, -(self.t + t * self.Xy[:, i]))
        return self.C * float(np.sum(new_terms - self.terms)) + t * wi + 0.5 * t * t

    def commit(self, i, t):
        self.x[i] += t
        self.t += t * self.Xy[:, i]
        self.terms = np.logaddexp(0.0, -self.t)
        self.value = self.C * float(np.sum(self.terms)) + 0.5 * float(self.x @ self.x)
        self.evals += 1

    def refresh(self):
        self.t = self.Xy @ self.x
        self.terms = np.logaddexp(0.0, -self.t)
        self.value = self.C * float(np.sum(self.terms)) + 0.5 * float(self.x @ self.x)


@dataclass(eq=False)
class LogisticProblem:
    """l2-regularised logistic regression; 1-convex from the regulariser."""

    X: Array
    y: Array
    C: float
    objective: Objective
    smoothness: SmoothnessInfo
    V_star: Optional[float]
    name: str = "logistic"

    def default_x0(self) -> Array:
        return np.zeros(self.X.shape[1])


def make_logistic(
    n: int = 100,
    m: int = 200,
    C: float = 1.0,
    seed: int = 0,
    compute_v_star: bool = True,
) -> LogisticProblem:
    """Gaussian features, labels drawn from {-1, 1} with equal probability."""
    if C < 0:
        raise ConfigError("C must be nonnegative")
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(m, n))
    y = rng.choice([-1.0, 1.0], size=m)
    Xy = X * y[:, None]

    def value(w):
        return C * float(np.sum(np.logaddexp(0.0, -(Xy @ w)))) + 0.5 * float(w @ w)

    def gradient(w):
        return -C * (Xy.T @ expit(-(Xy @ w))) + w

    sigma_max = float(np.linalg.svd(X, compute_uv=False)[0])
    L = C / 4.0 * sigma_max ** 2 + 1.0
    XtX = X.T @ X
    L_coord = C / 4.0 * np.linalg.norm(XtX, axis=0) + 1.0
    L_dir = C / 4.0 * np.einsum("ij,ij->j", X, X) + 1.0

    obj = Objective(
        dim=n,
        value=value,
        gradient=gradient,
        partial=lambda i, w: -C * float(Xy[:, i] @ expit(-(Xy @ w))) + float(w[i]),
        coordinate_context=lambda o, w: _LogisticContext(o, w, Xy, C),
        name="logistic",
    )
    V_star = None
    if compute_v_star:
        res = minimize(value, np.zeros(n), jac=gradient, method="L-BFGS-B",
                       options={"maxiter": 5000, "gtol": 1e-10, "ftol": 1e-16})
        V_star = float(res.fun)
    info = SmoothnessInfo(
        L=L,
        L_coord=L_coord,
        L_sum=float(np.linalg.norm(L_coord)),
        L_max_dir=float(np.max(L_dir)),
        mu=1.0,
        pl_mu=1.0,
        V_star=V_star,
        L_dir_coord=L_dir,
        convex=True,
    )
    return LogisticProblem(X, y, C, obj, info, V_star)


# ---------------------------------------------------------------------------
# nonconvex sin^2 problem


class _SinSquaredContext(CoordinateContext):
    """Maintains u = Mx and s = <c, x>; coordinate updates are O(n)."""

    def __init__(self, obj, x, M, c):
        self._obj = obj
        self.M = M
        self.c = c
        self.x = np.array(x, dtype=float)
        self.u = M @ self.x
        self.s = float(self.c @ self.x)
        self.value = float(self.x @ self.u) + 3.0 * math.sin(self.s) ** 2
        self.evals = 1

    def partial(self, i):
        self.evals += 1
        return 2.0 * self.u[i] + 3.0 * math.sin(2.0 * self.s) * self.c[i]

    def delta(self, i, t):
        self.evals += 1
        return (
            2.0 * t * self.u[i]
            + t * t * self.M[i, i]
            + 3.0 * (math.sin(self.s + t * self.c[i]) ** 2 - math.sin(self.s) ** 2)
        )

    def commit(self, i, t):
        self.value += self.delta(i, t)
        self.x[i] += t
        self.u += t * self.M[:, i]
        self.s += t * self.c[i]
        self.evals += 1

    def refresh(self):
        self.u = self.M @ self.x
        self.s = float(self.c @ self.x)
        self.value = float(self.x @ self.u) + 3.0 * math.sin(self.s) ** 2


@dataclass(eq=False)
class SinSquaredProblem:
    """V(x) = |Ax|^2 + 3 sin^2(<c, x>) with Ac = c; nonconvex but gradient
    dominated with constant 1/(32 kappa), unique minimiser 0."""

    A: Array
    c: Array
    kappa: float
    objective: Objective
    smoothness: SmoothnessInfo
    x_star: Array
    V_star: float
    name: str = "sin_squared"

    def default_x0(self, seed: int = 1) -> Array:
        return np.random.default_rng(seed).normal(size=self.A.shape[0])


def make_sin_squared(n: int = 50, kappa: float = 100.0, seed: int = 0) -> SinSquaredProblem:
    """Symmetric A = Q diag(1, s_2..s_n) Q^T with unit first column c, the
    remaining singular values spaced linearly so cond(A^T A) = kappa."""
    if kappa < 1:
        raise ConfigError("kappa must be >= 1")
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n)
    c /= np.linalg.norm(c)
    basis = np.concatenate([c[:, None], rng.normal(size=(n, n - 1))], axis=1)
    Q, _ = np.linalg.qr(basis)
    if Q[:, 0] @ c < 0:
        Q[:, 0] = -Q[:, 0]
    s = np.linspace(1.0, 1.0 / math.sqrt(kappa), n)
    A = (Q * s) @ Q.T
    c = Q[:, 0]  # exact unit eigenvector of A
    M = (Q * s * s) @ Q.T

    def value(x):
        return float(x @ (M @ x)) + 3.0 * math.sin(float(c @ x)) ** 2

    def gradient(x):
        return 2.0 * (M @ x) + 3.0 * math.sin(2.0 * float(c @ x)) * c

    L = max(2.0 * float(np.max(s) ** 2), 2.0 + 6.0)
    L_coord = 2.0 * np.linalg.norm(M, axis=0) + 6.0 * np.abs(c)
    L_dir = 2.0 * np.diag(M) + 6.0 * c * c

    obj = Objective(
        dim=n,
        value=value,
        gradient=gradient,
        partial=lambda i, x: 2.0 * float(M[i] @ x) + 3.0 * math.sin(2.0 * float(c @ x)) * float(c[i]),
        coordinate_context=lambda o, x: _SinSquaredContext(o, x, M, c),
        name="sin_squared",
    )
    info = SmoothnessInfo(
        L=L,
        L_coord=L_coord,
        L_sum=float(np.linalg.norm(L_coord)),
        L_max_dir=float(np.max(L_dir)),
        mu=0.0,
        pl_mu=1.0 / (32.0 * kappa),
        V_star=0.0,
        L_dir_coord=L_dir,
        convex=False,
    )
    return SinSquaredProblem(A, c, kappa, obj, info, np.zeros(n), 0.0)


# ---------------------------------------------------------------------------
# total variation denoising


def synthetic_phantom(size: int = 64) -> Array:
    """Piecewise-constant squares on a flat background, values in [0, 1]."""
    img = np.full((size, size), 0.2)
    img[size // 8: size // 2, size // 8: size // 2] = 0.8
    img[5 * size // 8: 7 * size // 8, size // 6: size // 2] = 0.5
    img[size // 2: 3 * size // 4, 5 * size // 8: 7 * size // 8] = 1.0
    img[size // 16: size // 4, 5 * size // 8: 13 * size // 16] = 0.35
    return img


def load_image(path) -> Array:
    """8-bit grayscale PNG/PGM rescaled to [0, 1]."""
    from PIL import Image

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=float) / 255.0
    except OSError as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc


def save_image(img: Array, path) -> None:
    from PIL import Image

    data = np.clip(np.asarray(img, dtype=float), 0.0, 1.0)
    Image.fromarray((data * 255.0 + 0.5).astype(np.uint8), mode="L").save(path)


def _tv_gradients(u: Array):
    dx = np.zeros_like(u)
    dy = np.zeros_like(u)
    dx[:, :-1] = u[:, 1:] - u[:, :-1]
    dy[:-1, :] = u[1:, :] - u[:-1, :]
    return dx, dy


class _TVContext(CoordinateContext):
    """Local-stencil evaluation: a pixel change touches three patches."""

    def __init__(self, obj, x, noisy, lam, eps):
        self._obj = obj
        self.noisy = noisy
        self.lam = lam
        self.eps = eps
        self.rows, self.cols = noisy.shape
        self.u = np.array(x, dtype=float).reshape(noisy.shape)
        self.x = self.u.reshape(-1)  # view; commits mutate u in place
        self.dx, self.dy = _tv_gradients(self.u)
        self.W = np.sqrt(self.dx ** 2 + self.dy ** 2 + eps)
        self.value = 0.5 * float(np.sum((self.u - noisy) ** 2)) + lam * float(np.sum(self.W))
        self.evals = 1

    def _patches(self, a, b, t):
        """(index, new_dx, new_dy) for the patches affected by u[a,b] += t."""
        out = []
        dx, dy = self.dx, self.dy
        ndx = dx[a, b] - (t if b < self.cols - 1 else 0.0)
        ndy = dy[a, b] - (t if a < self.rows - 1 else 0.0)
        out.append(((a, b), ndx, ndy))
        if b >= 1:
            out.append(((a, b - 1), dx[a, b - 1] + t, dy[a, b - 1]))
        if a >= 1:
            out.append(((a - 1, b), dx[a - 1, b], dy[a - 1, b] + t))
        return out

    def partial(self, i):
        self.evals += 1
        a, b = divmod(i, self.cols)
        g = self.u[a, b] - self.noisy[a, b]
        g -= self.lam * (self.dx[a, b] + self.dy[a, b]) / self.W[a, b]
        if b >= 1:
            g += self.lam * self.dx[a, b - 1] / self.W[a, b - 1]
        if a >= 1:
            g += self.lam * self.dy[a - 1, b] / self.W[a - 1, b]
        return float(g)

    def delta(self, i, t):
        self.evals += 1
        a, b = divmod(i, self.cols)
        d = t * (self.u[a, b] - self.noisy[a, b]) + 0.5 * t * t
        for (p, ndx, ndy) in self._patches(a, b, t):
            d += self.lam * (math.sqrt(ndx * ndx + ndy * ndy + self.eps) - self.W[p])
        return float(d)

    def commit(self, i, t):
        self.value += self.delta(i, t)
        a, b = divmod(i, self.cols)
        self.u[a, b] += t
        if b < self.cols - 1:
            self.dx[a, b] -= t
        if a < self.rows - 1:
            self.dy[a, b] -= t
        if b >= 1:
            self.dx[a, b - 1] += t
        if a >= 1:
            self.dy[a - 1, b] += t
        for p in [(a, b)] + ([(a, b - 1)] if b >= 1 else []) + ([(a - 1, b)] if a >= 1 else []):
            self.W[p] = math.sqrt(self.dx[p] ** 2 + self.dy[p] ** 2 + self.eps)
        self.evals += 1

    def refresh(self):
        self.dx, self.dy = _tv_gradients(self.u)
        self.W = np.sqrt(self.dx ** 2 + self.dy ** 2 + self.eps)
        self.value = 0.5 * float(np.sum((self.u - self.noisy) ** 2)) + self.lam * float(np.sum(self.W))

    def point(self) -> Array:
        return self.u.reshape(-1).copy()


@dataclass(eq=False)
class TVDenoiseProblem:
    """Smoothed total variation denoising of a noisy image."""

    image: Array
    noisy: Array
    lam: float
    epsilon: float
    objective: Objective
    smoothness: SmoothnessInfo
    V_star: Optional[float]
    name: str = "tv_denoise"

    @property
    def shape(self):
        return self.noisy.shape

    def default_x0(self) -> Array:
        return self.noisy.reshape(-1).copy()

    def to_image(self, x: Array) -> Array:
        return np.asarray(x, dtype=float).reshape(self.noisy.shape)


def make_tv_denoise(
    image=None,
    size: int = 64,
    lam: float = 0.1,
    epsilon: float = 1e-4,
    noise_sigma: float = 0.1,
    seed: int = 0,
    compute_v_star: bool = True,
) -> TVDenoiseProblem:
    """Phantom (or image file / array) plus Gaussian noise, smoothed-TV model.

    The regulariser applies |v|_eps = sqrt(|v|^2 + eps) per pixel to the
    forward-difference gradient with Neumann boundary.  The printed CD step
    1/(2 lam sqrt(eps) + 1) is exposed by the harness; the curvature-based
    safe step is 1/L_i with L_i = 1 + 4 lam / sqrt(eps).
    """
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    if image is None:
        truth = synthetic_phantom(size)
    elif isinstance(image, (str, bytes)) or hasattr(image, "__fspath__"):
        truth = load_image(image)
    else:
        truth = np.asarray(image, dtype=float)
    rng = np.random.default_rng(seed)
    noisy = truth + noise_sigma * rng.normal(size=truth.shape)
    rows, cols = noisy.shape
    n = rows * cols

    def value(x):
        u = np.asarray(x, dtype=float).reshape(rows, cols)
        dx, dy = _tv_gradients(u)
        return 0.5 * float(np.sum((u - noisy) ** 2)) + lam * float(
            np.sum(np.sqrt(dx ** 2 + dy ** 2 + epsilon))
        )

    def gradient(x):
        u = np.asarray(x, dtype=float).reshape(rows, cols)
        dx, dy = _tv_gradients(u)
        W = np.sqrt(dx ** 2 + dy ** 2 + epsilon)
        P = dx / W
        Q = dy / W
        g = u - noisy
        g -= lam * (P + Q)
        g[:, 1:] += lam * P[:, :-1]
        g[1:, :] += lam * Q[:-1, :]
        return g.reshape(-1)

    L = 1.0 + 8.0 * lam / math.sqrt(epsilon)
    L_i = 1.0 + 4.0 * lam / math.sqrt(epsilon)
    L_dir = np.full(n, L_i)
    L_coord = np.full(n, math.sqrt(L * L_i))

    obj = Objective(
        dim=n,
        value=value,
        gradient=gradient,
        coordinate_context=lambda o, x: _TVContext(o, x, noisy, lam, epsilon),
        name="tv_denoise",
    )
    V_star = None
    if compute_v_star:
        res = minimize(value, noisy.reshape(-1), jac=gradient, method="L-BFGS-B",
                       options={"maxiter": 100000, "gtol": 1e-9, "ftol": 1e-16, "maxcor": 30})
        V_star = float(res.fun)
    info = SmoothnessInfo(
        L=L,
        L_coord=L_coord,
        L_sum=float(np.linalg.norm(L_coord)),
        L_max_dir=L_i,
        mu=1.0,
        pl_mu=1.0,
        V_star=V_star,
        L_dir_coord=L_dir,
        convex=True,
    )
    return TVDenoiseProblem(truth, noisy, lam, epsilon, obj, info, V_star)


def cd_step_default(lam: float, epsilon: float) -> float:
    """Default CD step 1/(2 lam sqrt(eps) + 1) for the TV model.

    Note this grows as eps shrinks while the curvature bound 1 + 4 lam /
    sqrt(eps) shrinks the stable range, so it destabilises CD at small eps;
    the safe alternative is 1/L_i from the smoothness metadata.
    """
    return 1.0 / (2.0 * lam * math.sqrt(epsilon) + 1.0)
