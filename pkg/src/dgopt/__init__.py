"""Discrete gradient methods for smooth optimisation.

Structure-preserving iterations x_{k+1} = x_k - tau DG(x_k, x_{k+1}) that
decrease the objective monotonically for every positive time step, with
fixed-point and scalar-root inner solvers, theoretical rate calculators,
classical baselines and a reproducible experiment harness.
"""

from .core import (
    ConfigError,
    CoordinateContext,
    DirectionDistribution,
    DirectionKind,
    EvaluationError,
    LineRestriction,
    MetadataError,
    Objective,
    SmoothnessInfo,
    finite_difference_gradient,
    validate_smoothness,
)
from .discrete_gradients import (
    DGEvaluation,
    DiscreteGradientKind,
    QuadratureConfig,
    check_boundedness_constant,
    check_dg_axioms,
    evaluate_dg,
    gonzalez_dg,
    itoh_abe_dg,
    mean_value_dg,
)
from .optimizer import (
    IterateRecord,
    StepKind,
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
    LinearSystemProblem,
    LogisticProblem,
    SinSquaredProblem,
    TVDenoiseProblem,
    make_linear_system,
    make_logistic,
    make_sin_squared,
    make_tv_denoise,
    synthetic_phantom,
)
from .rates import (
    RateInputs,
    beta,
    beta_star,
    cd_beta_appendix,
    estimate_initial_radius,
    linear_bound,
    quadratic_initial_radius,
    sublinear_bound,
    tau_star,
)
from .solvers import (
    InnerMethod,
    InnerSolveResult,
    InnerSolverConfig,
    ScalarRootResult,
    contraction_factor,
    solve_fixed_point,
    solve_itoh_abe_scalar,
    solve_scalar_dg_equation,
    theta_star,
)

__version__ = "0.1.0"
