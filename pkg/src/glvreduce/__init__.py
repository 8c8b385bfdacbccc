"""Exact species elimination for generalized Lotka-Volterra systems."""
from .algebraic import (
    AlgebraicReduction2,
    DerivativeJet,
    algebraic_residual_2,
    analytic_jet,
    lorenz_jet,
    lorenz_residual_3rd,
)
from .errors import (
    ConvergenceError,
    GlvError,
    InfeasibleReductionError,
    IntegrationError,
    IntegrityError,
    ParseError,
    SearchBudgetError,
    SingularityError,
    UsageError,
    ValidationError,
)
from .integrate import Trajectory, integrate_fixed, logistic_exact, sample
from .memory import (
    ChiTerm,
    ReducedSystem,
    ReducedTrajectory,
    YTerm,
    build_reduced_system,
    evaluate_y,
    reconstruct_eliminated,
    reduce,
    solve_reduced,
)
from .model import GlvModel, load_model, rhs, save_model, validate
from .reducibility import (
    EliminationPlan,
    ReducibilityReport,
    build_plan_canonical,
    check_reducible,
    rho,
    rho_curve,
    rho_limit,
    zero_set,
)

__version__ = "0.1.0"
