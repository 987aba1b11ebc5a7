"""Exception types raised across the package."""


class DomainError(ValueError):
    """Evaluation or shift outside a spline's domain."""


class DegenerateError(ValueError):
    """Spline with too few coefficients to define an interval."""


class ArgumentError(ValueError):
    """Invalid scalar argument (count, width, size)."""


class RankError(ValueError):
    """Rank-deficient least-squares design matrix."""


class LengthError(ValueError):
    """Field count or bit length does not match the expected layout."""


class IdError(ValueError):
    """Sender identifier outside the network."""


class ConfigError(ValueError):
    """Invalid simulation or MAC configuration."""


class SolveError(RuntimeError):
    """Singular or inaccurate KKT solve."""


class InfeasibleError(RuntimeError):
    """No feasible hyperparameter point found within the budget."""


class ParseError(ValueError):
    """Malformed input file."""
