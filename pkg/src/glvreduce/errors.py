"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GlvError(Exception):
    exit_code = 1


class UsageError(GlvError, ValueError):
    exit_code = 2


class ParseError(GlvError, ValueError):
    exit_code = 3


class ValidationError(GlvError, ValueError):
    exit_code = 4

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class InfeasibleReductionError(GlvError):
    exit_code = 5

    def __init__(self, message, violations=()):
        self.violations = list(violations)
        super().__init__(message)


class ConvergenceError(GlvError):
    """Per-node fixed point did not converge."""

    exit_code = 6

    def __init__(self, step, residual, iterations):
        self.step = step
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"fixed point failed at step {step} after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )


class IntegrationError(GlvError):
    """Positivity breach or non-finite value during time stepping."""

    exit_code = 8

    def __init__(self, message, time=None, species=None):
        self.time = time
        self.species = species
        super().__init__(message)


class SingularityError(IntegrationError):
    pass


class IntegrityError(GlvError):
    exit_code = 9


class SearchBudgetError(GlvError):
    exit_code = 10


EXIT_CODES = {
    0: "success / verification passed",
    1: "verification ran but failed its tolerances",
    2: "usage error",
    3: "parse error in an input file",
    4: "model validation error",
    5: "reduction infeasible (required zero or pivot violated)",
    6: "fixed-point convergence failure",
    7: "I/O error",
    8: "integration failure (positivity breach, singularity, non-finite value)",
    9: "integrity error in a reduced-system document",
    10: "search budget exceeded (use --heuristic)",
}
IO_EXIT_CODE = 7
