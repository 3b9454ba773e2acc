"""Two-patch, two-species neutral metacommunity laboratory.

A discrete exchange + Wright-Fisher chain on {0..N1} x {0..N2}, its exact
dense kernel and hitting-time solver, the limiting degenerate diffusion
solved by a monotone finite-difference scheme, and numerical verification
of the comparison bounds that relate them.
"""

from .model import (
    AnalyticBounds,
    ExchangeMatrix,
    Field,
    GridState,
    ModelParams,
    analytic_bounds,
    apply_exchange,
    bernstein_moments,
    build_exchange_matrix,
    entropy_H,
    generator_apply,
    generator_test_functions,
    step,
    tau_lower,
    wf_sample,
)
from .exact import (
    HittingTimeTable,
    LinearSolveError,
    StateSpaceError,
    TransitionMatrix,
    build_transition_matrix,
    conditional_means,
    iterate_semigroup,
    solve_hitting_times,
    square_displacement,
)
from .montecarlo import (
    McConfig,
    McResult,
    MomentRow,
    estimate_extinction_time,
    moment_check,
    simulate_trajectory,
)
from .pde import (
    DiscreteOperator,
    EllipticSolveError,
    MMatrixError,
    ParabolicResult,
    PdeGrid,
    discretize_Ld,
    solve_elliptic,
    solve_parabolic,
    solve_single_patch,
)
from .analysis import (
    DEFAULT_SLACK_SAFETY,
    INTERIOR_MARGIN,
    ComparisonReport,
    ConvergenceRow,
    DLimitRow,
    KappaRow,
    SlackCalibration,
    calibrate_slack,
    compare_fields,
    convergence_study,
    d_limit_check,
    kappa_sweep,
    restrict_to_chain_nodes,
    semigroup_pde_gap,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticBounds",
    "ComparisonReport",
    "ConvergenceRow",
    "DEFAULT_SLACK_SAFETY",
    "DLimitRow",
    "DiscreteOperator",
    "EllipticSolveError",
    "ExchangeMatrix",
    "Field",
    "GridState",
    "HittingTimeTable",
    "INTERIOR_MARGIN",
    "KappaRow",
    "LinearSolveError",
    "MMatrixError",
    "McConfig",
    "McResult",
    "ModelParams",
    "MomentRow",
    "ParabolicResult",
    "PdeGrid",
    "SlackCalibration",
    "StateSpaceError",
    "TransitionMatrix",
    "analytic_bounds",
    "apply_exchange",
    "bernstein_moments",
    "build_exchange_matrix",
    "build_transition_matrix",
    "calibrate_slack",
    "compare_fields",
    "conditional_means",
    "convergence_study",
    "d_limit_check",
    "discretize_Ld",
    "entropy_H",
    "estimate_extinction_time",
    "generator_apply",
    "generator_test_functions",
    "iterate_semigroup",
    "kappa_sweep",
    "moment_check",
    "restrict_to_chain_nodes",
    "semigroup_pde_gap",
    "simulate_trajectory",
    "solve_elliptic",
    "solve_hitting_times",
    "solve_parabolic",
    "solve_single_patch",
    "square_displacement",
    "step",
    "tau_lower",
    "wf_sample",
]
