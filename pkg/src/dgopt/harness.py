"""Experiment harness: JSON specs in, deterministic trace CSVs out.

A spec names a problem, a list of (method, step policy, inner solver)
entries, an iteration budget and seeds.  ``run`` writes one CSV per
(method, seed), an aggregate CSV per method with percentile bands and the
theoretical overlay, and a ``summary.json`` with the achieved constants.
Re-running a spec with the same seeds reproduces the CSVs byte for byte
(timing columns excluded).
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import rates
from .core import ConfigError, DirectionDistribution, Objective, SmoothnessInfo
from .discrete_gradients import DiscreteGradientKind, QuadratureConfig
from .optimizer import (
    StoppingRule,
    TimeStepPolicy,
    Trace,
    armijo_line_search,
    cyclic_cd,
    dg_iterate,
    gradient_descent,
    randomized_cd,
)
from .problems import (
    cd_step_default,
    make_linear_system,
    make_logistic,
    make_sin_squared,
    make_tv_denoise,
    save_image,
)
from .solvers import InnerMethod, InnerSolverConfig

TRACE_COLUMNS = ["k", "objective", "rel_objective", "grad_norm", "step_norm", "inner_iters", "cpu_seconds"]
AGG_COLUMNS = ["k", "mean_rel_objective", "p05", "p95", "theory_bound"]
TIMING_COLUMNS = {"cpu_seconds"}

DG_METHODS = {
    "gonzalez": DiscreteGradientKind.GONZALEZ,
    "mean_value": DiscreteGradientKind.MEAN_VALUE,
    "itoh_abe": DiscreteGradientKind.ITOH_ABE,
    "randomized_itoh_abe": DiscreteGradientKind.RANDOMIZED_ITOH_ABE,
}


def scipy_root_solver(T, x, y0, tol, max_iter):
    """External inner solver: a ladder of scipy root finders.

    Powell hybrid (dense Jacobian, fast at small n) and Newton-Krylov
    (Jacobian-free, the scalable and often more robust fallback) are tried
    from the Euler warm start and from the base point; acceptance is decided
    by the actual fixed-point defect, not the solver's status flag, which
    can report lack of progress at an already-excellent solution.
    """
    from scipy.optimize import root

    def residual(y):
        return y - T(y)

    def defect(y):
        if not np.all(np.isfinite(y)):
            return math.inf
        return float(np.max(np.abs(residual(y)) / np.maximum(np.abs(y), 1.0)))

    ladder = [("hybr", y0), ("hybr", x), ("krylov", x), ("krylov", y0)]
    if len(x) >= 120:  # dense Jacobians dominate at scale: Krylov first
        ladder = [("krylov", y0), ("krylov", x), ("hybr", y0), ("hybr", x)]
    best_sol, best_defect, nfev_total = y0, math.inf, 0
    for method, start in ladder:
        if not np.all(np.isfinite(start)):
            continue
        try:
            res = root(residual, start, method=method, tol=min(tol, 1e-13))
        except Exception:
            continue
        nfev_total += int(getattr(res, "nfev", 0))
        d = defect(res.x)
        if d < tol:
            return res.x, True, nfev_total
        if d < best_defect:
            best_sol, best_defect = res.x, d
    return best_sol, False, nfev_total


def build_problem(cfg: dict):
    """Construct a problem bundle from its JSON description."""
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind == "linear_system":
        return make_linear_system(**cfg)
    if kind == "logistic":
        return make_logistic(**cfg)
    if kind == "sin_squared":
        return make_sin_squared(**cfg)
    if kind == "tv_denoise":
        return make_tv_denoise(**cfg)
    raise ConfigError(f"unknown problem kind {kind!r}")


def list_problems() -> list:
    """The canonical experiment instances, as (name, config) pairs."""
    return [
        ("linear_k100", {"kind": "linear_system", "n": 500, "kappa": 1e2, "seed": 10}),
        ("linear_k1e8", {"kind": "linear_system", "n": 500, "kappa": 1e8, "seed": 10}),
        ("linear_kernel", {"kind": "linear_system", "n": 800, "m": 400, "kappa": 1e2, "seed": 11}),
        ("linear_uniform", {"kind": "linear_system", "n": 200, "kappa": None, "seed": 12,
                            "uniform_entries": True}),
        ("logistic", {"kind": "logistic", "n": 100, "m": 200, "C": 1.0, "seed": 13}),
        ("sin_squared", {"kind": "sin_squared", "n": 50, "kappa": 1e2, "seed": 14}),
        ("tv_denoise", {"kind": "tv_denoise", "size": 64, "lam": 0.1, "epsilon": 1e-4,
                        "noise_sigma": 0.1, "seed": 15}),
    ]


def _resolve_steps(steps_cfg: dict, method: str, problem, dist=None) -> TimeStepPolicy:
    info: SmoothnessInfo = problem.smoothness
    kind = steps_cfg.get("kind", "optimal")
    bounds = tuple(steps_cfg.get("bounds", (1e-12, 1e12)))
    if kind == "fixed":
        return TimeStepPolicy.fixed(float(steps_cfg["tau"]), bounds)
    if kind == "fixed_over_L":
        return TimeStepPolicy.fixed(float(steps_cfg["factor"]) / info.L, bounds)
    if kind == "optimal":
        return TimeStepPolicy.optimal(bounds)
    if kind == "per_coordinate":
        if "taus" in steps_cfg:
            return TimeStepPolicy.per_coordinate(np.asarray(steps_cfg["taus"], dtype=float), bounds)
        source = steps_cfg.get("source", "heuristic")
        if source == "heuristic":  # tau_i = 2 / L_i
            return TimeStepPolicy.per_coordinate(info.coordinate_steps(2.0), bounds)
        if source == "proven":  # tau_i = 2 / (L_i sqrt(n))
            return TimeStepPolicy.per_coordinate(info.coordinate_steps(2.0 / math.sqrt(info.dim)), bounds)
        if source == "cd_default" and hasattr(problem, "lam"):
            return TimeStepPolicy.per_coordinate(
                np.full(info.dim, cd_step_default(problem.lam, problem.epsilon)), bounds)
        if source == "safe":  # tau_i = 1 / L_i
            return TimeStepPolicy.per_coordinate(info.coordinate_steps(1.0), bounds)
        raise ConfigError(f"unknown per-coordinate source {source!r}")
    raise ConfigError(f"unknown steps kind {kind!r}")


def _resolve_inner(inner_cfg: Optional[dict]) -> InnerSolverConfig:
    if not inner_cfg:
        return InnerSolverConfig()
    cfg = dict(inner_cfg)
    method = InnerMethod(cfg.pop("method", "R"))
    external = scipy_root_solver if method is InnerMethod.EXTERNAL else None
    return InnerSolverConfig(method=method, external=external, **cfg)


@dataclass
class MethodEntry:
    method: str
    steps: dict = field(default_factory=lambda: {"kind": "optimal"})
    inner: Optional[dict] = None
    label: Optional[str] = None
    direction: str = "uniform_coordinates"
    quad_order: int = 20
    params: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.label or self.method


@dataclass
class ExperimentSpec:
    name: str
    problem: dict
    methods: list
    iterations: int = 100
    seeds: list = field(default_factory=lambda: [0])
    x0: dict = field(default_factory=lambda: {"kind": "default"})

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("spec needs at least one method")
        if not self.seeds:
            raise ConfigError("spec needs at least one seed")
        self.methods = [m if isinstance(m, MethodEntry) else MethodEntry(**m) for m in self.methods]

    @staticmethod
    def from_json(path) -> "ExperimentSpec":
        with open(path) as fh:
            return ExperimentSpec(**json.load(fh))


def _make_x0(cfg: dict, problem, seed: int):
    kind = cfg.get("kind", "default")
    n = problem.objective.dim
    if kind == "default":
        if hasattr(problem, "default_x0"):
            try:
                return problem.default_x0()
            except TypeError:
                return problem.default_x0(seed)
        return np.zeros(n)
    if kind == "zeros":
        return np.zeros(n)
    if kind == "gaussian":
        scale = float(cfg.get("scale", 1.0))
        return scale * np.random.default_rng(cfg.get("seed", seed)).normal(size=n)
    raise ConfigError(f"unknown x0 kind {kind!r}")


def run_method(problem, entry: MethodEntry, iterations: int, seed: int, x0) -> Trace:
    """One (method, seed) run; the dispatch point for all methods."""
    obj: Objective = problem.objective
    info: SmoothnessInfo = problem.smoothness
    stop = StoppingRule(max_iters=iterations)
    name = entry.method
    if name in DG_METHODS:
        dg_kind = DG_METHODS[name]
        dist = None
        if dg_kind is DiscreteGradientKind.RANDOMIZED_ITOH_ABE:
            factory = getattr(DirectionDistribution, entry.direction)
            dist = factory(obj.dim)
        policy = _resolve_steps(entry.steps, name, problem, dist)
        inner = _resolve_inner(entry.inner)
        trace = dg_iterate(obj, dg_kind, x0, policy, inner, stop, seed=seed, dist=dist,
                           info=info, quad=QuadratureConfig(entry.quad_order))
    elif name == "gradient_descent":
        tau = _resolve_steps(entry.steps, name, problem).scalar_step(
            DiscreteGradientKind.MEAN_VALUE, info)
        trace = gradient_descent(obj, x0, tau, stop)
    elif name == "cyclic_cd":
        policy = _resolve_steps(entry.steps, name, problem)
        taus = policy.coordinate_steps(DiscreteGradientKind.ITOH_ABE, obj.dim, info)
        trace = cyclic_cd(obj, x0, taus, stop)
    elif name == "randomized_cd":
        policy = _resolve_steps(entry.steps, name, problem)
        taus = policy.coordinate_steps(DiscreteGradientKind.RANDOMIZED_ITOH_ABE, obj.dim, info)
        trace = randomized_cd(obj, x0, taus, seed=seed, stop=stop)
    elif name == "armijo":
        trace = armijo_line_search(obj, x0, c1=entry.params.get("c1", 0.5),
                                   shrink=entry.params.get("shrink", 0.5), stop=stop,
                                   initial_step=entry.params.get("initial_step", 1.0))
    else:
        raise ConfigError(f"unknown method {name!r}")
    trace.extras["method_label"] = entry.name
    return trace


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return format(float(v), ".17g")


def write_trace_csv(path, trace: Trace, v_star: Optional[float]) -> None:
    v0 = trace.records[0].objective
    gap0 = (v0 - v_star) if v_star is not None else None
    lines = [",".join(TRACE_COLUMNS)]
    for r in trace.records:
        rel = (r.objective - v_star) / gap0 if (gap0 is not None and gap0 > 0) else float("nan")
        lines.append(",".join([
            _fmt(r.k), _fmt(r.objective), _fmt(rel), _fmt(r.grad_norm),
            _fmt(r.step_norm), _fmt(r.inner_iters), _fmt(r.cpu_seconds),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> dict:
    text = Path(path).read_text().strip().splitlines()
    header = text[0].split(",")
    cols = {h: [] for h in header}
    for line in text[1:]:
        for h, v in zip(header, line.split(",")):
            cols[h].append(float(v))
    return {h: np.asarray(v) for h, v in cols.items()}


def csv_without_timing(path) -> str:
    """CSV content with timing columns stripped, for byte-level comparisons."""
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    keep = [i for i, h in enumerate(header) if h not in TIMING_COLUMNS]
    out = []
    for line in lines:
        parts = line.split(",")
        out.append(",".join(parts[i] for i in keep))
    return "\n".join(out)


def _theory_overlay(problem, entry: MethodEntry, ks: np.ndarray, v0_gap: float) -> np.ndarray:
    """Linear-rate overlay at the method's actual step; randomised methods
    count n scalar updates per recorded iteration."""
    info = problem.smoothness
    name = entry.method
    if name not in DG_METHODS or info.pl_mu <= 0:
        return np.full(len(ks), np.nan)
    dg_kind = DG_METHODS[name]
    dist = DirectionDistribution.uniform_coordinates(info.dim)
    try:
        policy = _resolve_steps(entry.steps, name, problem, dist)
        tau = policy.scalar_step(dg_kind, info, dist)
        inputs = rates.RateInputs.from_problem(dg_kind, tau, info, dist)
        b = rates.beta(dg_kind, tau, inputs)
    except ConfigError:
        return np.full(len(ks), np.nan)
    per_record = info.dim if dg_kind is DiscreteGradientKind.RANDOMIZED_ITOH_ABE else 1
    factor = max(1.0 - 2.0 * info.pl_mu / b, 0.0)
    return np.power(factor, ks * per_record)


@dataclass
class RunResult:
    out_dir: Path
    trace_paths: dict
    aggregate_paths: dict
    summary_path: Path
    failures: dict

    @property
    def failure_fraction(self) -> float:
        total = sum(len(v) for v in self.trace_paths.values()) + sum(len(v) for v in self.failures.values())
        failed = sum(len(v) for v in self.failures.values())
        return failed / total if total else 0.0


def run(spec: ExperimentSpec, out_dir, threads: int = 1) -> RunResult:
    """Execute a spec: one trace CSV per (method, seed), aggregates, summary.

    Failed runs (inner-solver breakdowns) are excluded from aggregates; the
    summary reports the failure fraction per method, and a method with more
    than 10% failures is marked inapplicable.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(spec.problem)
    v_star = problem.smoothness.V_star
    trace_paths: dict = {}
    agg_paths: dict = {}
    failures: dict = {}
    summary: dict = {
        "spec": spec.name,
        "problem": spec.problem,
        "constants": {
            "L": problem.smoothness.L,
            "L_sum": problem.smoothness.L_sum,
            "L_max": problem.smoothness.L_max_dir,
            "mu": problem.smoothness.mu,
            "pl_mu": problem.smoothness.pl_mu,
            "V_star": v_star,
            "kappa": (problem.smoothness.L / problem.smoothness.pl_mu
                      if problem.smoothness.pl_mu > 0 else None),
        },
        "methods": {},
    }

    def one(entry, seed):
        x0 = _make_x0(spec.x0, problem, seed)
        return run_method(problem, entry, spec.iterations, seed, x0)

    for entry in spec.methods:
        label = entry.name
        traces = []
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                traces = list(pool.map(lambda s: one(entry, s), spec.seeds))
        else:
            traces = [one(entry, s) for s in spec.seeds]
        trace_paths[label] = []
        failures[label] = []
        good = []
        for seed, trace in zip(spec.seeds, traces):
            path = out / f"{spec.name}__{label}__seed{seed}.csv"
            write_trace_csv(path, trace, v_star)
            if hasattr(problem, "to_image") and trace.x_final is not None:
                save_image(problem.to_image(trace.x_final),
                           out / f"{spec.name}__{label}__seed{seed}__reconstruction.pgm")
            if trace.status == "ok":
                good.append((seed, trace))
                trace_paths[label].append(path)
            else:
                failures[label].append({"seed": seed, "status": trace.status})
        frac = len(failures[label]) / len(spec.seeds)
        method_summary = {
            "failure_fraction": frac,
            "applicable": frac <= 0.10,
            "seeds": list(spec.seeds),
        }
        if good and v_star is not None:
            gap0s = [t.records[0].objective - v_star for _, t in good]
            if min(gap0s) > 0:
                ks = np.arange(min(len(t.records) for _, t in good))
                rel = np.stack([
                    (np.array([r.objective for r in t.records])[: len(ks)] - v_star) / g0
                    for (_, t), g0 in zip(good, gap0s)
                ])
                # mean convergence rate = geometric mean over seeds, the
                # natural location estimate on the log scale (and below the
                # arithmetic mean, so rate bounds transfer)
                mean = np.exp(np.mean(np.log(np.maximum(rel, 1e-300)), axis=0))
                p05 = np.percentile(rel, 5, axis=0)
                p95 = np.percentile(rel, 95, axis=0)
                theory = _theory_overlay(problem, entry, ks, float(np.mean(gap0s)))
                agg_path = out / f"{spec.name}__{label}__aggregate.csv"
                lines = [",".join(AGG_COLUMNS)]
                for j in range(len(ks)):
                    lines.append(",".join(_fmt(v) for v in
                                          [ks[j], mean[j], p05[j], p95[j], theory[j]]))
                agg_path.write_text("\n".join(lines) + "\n")
                agg_paths[label] = agg_path
        if entry.method in DG_METHODS:
            dg_kind = DG_METHODS[entry.method]
            dist = DirectionDistribution.uniform_coordinates(problem.objective.dim)
            try:
                policy = _resolve_steps(entry.steps, entry.method, problem, dist)
                tau = policy.scalar_step(dg_kind, problem.smoothness, dist)
                inputs = rates.RateInputs.from_problem(dg_kind, tau, problem.smoothness, dist)
                method_summary["tau"] = tau
                method_summary["beta"] = rates.beta(dg_kind, tau, inputs)
                method_summary["tau_star"] = rates.tau_star(dg_kind, inputs)
                method_summary["beta_star"] = rates.beta_star(dg_kind, inputs)
            except ConfigError:
                pass
        summary["methods"][label] = method_summary
    summary_path = out / f"{spec.name}__summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, default=float) + "\n")

    if hasattr(problem, "to_image"):
        save_image(problem.noisy, out / f"{spec.name}__noisy.pgm")
    return RunResult(out, trace_paths, agg_paths, summary_path, failures)


@dataclass
class ShootoutRow:
    problem: str
    inner_method: str
    tolerance: float
    mean_cpu_seconds: Optional[float]
    failure_fraction: float
    applicable: bool

    def cpu_display(self) -> str:
        return "N/A" if not self.applicable else f"{self.mean_cpu_seconds:.4g}"


def solver_shootout(
    problems: list,
    dg_kind: DiscreteGradientKind,
    tau: Optional[float] = None,
    tolerances: list = (1e-6, 1e-12),
    iters: int = 50,
    inner_methods: tuple = ("F", "R", "F+R", "external"),
    max_iter: int = 500,
    quad_order: int = 20,
    tau_over_l: float = 4.0,
) -> list:
    """Compare inner solvers over `iters` outer iterations per problem.

    The time step is either ``tau`` (absolute, shared by all problems) or
    ``tau_over_l`` in units of each problem's 1/L (default 4/L, a stress
    setting).  Each inner solve runs to its tolerance or the iteration cap;
    a method failing on more than 10% of the outer iterations is
    inapplicable for that problem.  Mean CPU time per solve is reported but
    machine dependent; the stable reproduction target is the applicability
    pattern.
    """
    if dg_kind not in (DiscreteGradientKind.GONZALEZ, DiscreteGradientKind.MEAN_VALUE):
        raise ConfigError("the shootout compares fixed-point solvers")
    rows = []
    for name, problem in problems:
        info = problem.smoothness
        tau_p = tau if tau is not None else tau_over_l / info.L
        for tol in tolerances:
            for method_name in inner_methods:
                if method_name == "external":
                    cfg = InnerSolverConfig(method=InnerMethod.EXTERNAL, tol=max(tol, 1e-10),
                                            max_iter=max_iter, external=scipy_root_solver)
                else:
                    cfg = InnerSolverConfig(method=InnerMethod(method_name), tol=tol, max_iter=max_iter)
                trace, elapsed, fails = _shootout_run(problem, dg_kind, tau_p, cfg, iters, quad_order)
                frac = fails / max(len(trace), 1)
                rows.append(ShootoutRow(name, method_name, tol,
                                        elapsed / max(len(trace), 1) if trace else None,
                                        frac, frac <= 0.10))
    return rows


def _shootout_run(problem, dg_kind, tau, cfg, iters, quad_order):
    from .solvers import solve_fixed_point

    obj = problem.objective
    info = problem.smoothness
    L_dg = mu_dg = None
    if info.convex:
        L_dg, mu_dg = info.L / 2.0, info.mu / 2.0
    x = _make_x0({"kind": "default"}, problem, 0)
    times = []
    fails = 0
    quad = QuadratureConfig(quad_order)
    for _ in range(iters):
        t0 = time.perf_counter()
        result = solve_fixed_point(obj, dg_kind, x, tau, cfg, L_dg=L_dg, mu_dg=mu_dg, quad=quad)
        times.append(time.perf_counter() - t0)
        if result.converged:
            x = result.y
        else:
            fails += 1  # stay at x: the failed solve contributes no step
    return times, float(np.sum(times)), fails


def format_shootout(rows: list) -> str:
    head = f"{'problem':<16} {'tol':>8} " + " ".join(f"{m:>10}" for m in ("F", "R", "F+R", "external"))
    lines = [head, "-" * len(head)]
    keys = sorted({(r.problem, r.tolerance) for r in rows}, key=str)
    for prob, tol in keys:
        cells = {r.inner_method: r.cpu_display() for r in rows
                 if r.problem == prob and r.tolerance == tol}
        lines.append(f"{prob:<16} {tol:>8.0e} " + " ".join(
            f"{cells.get(m, '-'):>10}" for m in ("F", "R", "F+R", "external")))
    return "\n".join(lines)


def tau_sweep(problem, entry: MethodEntry, taus: list, iterations: int, out_dir=None,
              seed: int = 0) -> list:
    """One trace per tau; the stability-versus-step-size experiment."""
    results = []
    for tau in taus:
        e = MethodEntry(entry.method, {"kind": "fixed", "tau": float(tau)},
                        entry.inner, f"{entry.name}_tau{tau:g}", entry.direction,
                        entry.quad_order, entry.params)
        x0 = _make_x0({"kind": "default"}, problem, seed)
        trace = run_method(problem, e, iterations, seed, x0)
        objs = trace.objectives()
        results.append({
            "tau": float(tau),
            "trace": trace,
            "monotone": bool(np.all(np.diff(objs) <= 1e-12 * np.maximum(np.abs(objs[:-1]), 1.0))),
            "final_objective": float(objs[-1]),
            "max_dissipation_rel_err": trace.extras.get("max_dissipation_rel_err"),
        })
        if out_dir is not None:
            write_trace_csv(Path(out_dir) / f"sweep__{e.label}__seed{seed}.csv",
                            trace, problem.smoothness.V_star)
    return results
