"""Exception types shared across the package."""


class RhodecError(Exception):
    """Base class for all package-specific errors."""


class ImpossibleObservation(RhodecError):
    """Raised when a Bayes update is asked to condition on a zero-probability
    observation (normalizer 0). Callers typically prune such branches."""

    def __init__(self, action, observation, step=None):
        self.action = action
        self.observation = observation
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(
            f"observation {observation} has zero probability under action "
            f"{action}{where}"
        )


class CombinatorialLimit(RhodecError):
    """Raised when an enumeration would exceed its configured cap."""

    def __init__(self, count, cap):
        self.count = count
        self.cap = cap
        super().__init__(f"enumeration of {count} items exceeds cap {cap}")


class ResourceExhausted(RhodecError):
    """Raised when a solver hits its expansion cap. Carries the incumbent
    solution (may be None) and the remaining optimality gap."""

    def __init__(self, incumbent, bound_gap):
        self.incumbent = incumbent
        self.bound_gap = bound_gap
        super().__init__(
            f"expansion cap reached (incumbent "
            f"{'value %.6f' % incumbent.value if incumbent else 'missing'}, "
            f"bound gap {bound_gap})"
        )


class InsufficientData(RhodecError):
    """Raised when a statistic needs more samples than were provided."""


class NumericalFailure(RhodecError):
    """Raised when a numerical routine cannot recover a valid result
    (e.g. a covariance that cannot be repaired to positive definite)."""


class ModelFormatError(RhodecError):
    """Base class for model-file parsing problems."""


class ModelSyntaxError(ModelFormatError):
    """Malformed token or line structure. Carries line and column (1-based)."""

    def __init__(self, message, line, column=None):
        self.line = line
        self.column = column
        at = f"line {line}" + (f", column {column}" if column else "")
        super().__init__(f"{message} ({at})")


class DimensionError(ModelFormatError):
    """A directive or table row does not match the declared dimensions."""

    def __init__(self, message, directive=None, line=None):
        self.directive = directive
        self.line = line
        loc = []
        if directive:
            loc.append(f"directive '{directive}'")
        if line:
            loc.append(f"line {line}")
        suffix = f" ({', '.join(loc)})" if loc else ""
        super().__init__(f"{message}{suffix}")


class StochasticityError(ModelFormatError):
    """A probability row is too far from summing to one."""

    def __init__(self, row, residual, line=None):
        self.row = row
        self.residual = residual
        self.line = line
        at = f" (line {line})" if line else ""
        super().__init__(
            f"row {row} sums to 1{residual:+.3g}; residual exceeds 1e-6{at}"
        )
