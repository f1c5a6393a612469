"""Exception types shared across the package."""


class WeakdriveError(Exception):
    """Base class for all package errors."""


class DuplicatePositionError(WeakdriveError):
    """Two atoms occupy the same point; carries the offending index pair."""

    def __init__(self, i: int, j: int):
        self.indices = (i, j)
        super().__init__(f"atoms {i} and {j} have identical positions")


class CoincidentAtomsError(WeakdriveError):
    """Pair coupling requested at zero separation."""


class ResonantSingularityError(WeakdriveError):
    """The steady-state linear system is singular or near-singular."""

    def __init__(self, delta: float, cond: float):
        self.delta = delta
        self.cond = cond
        super().__init__(
            f"linear system ill-conditioned at detuning delta={delta} "
            f"(condition estimate {cond:.3e})"
        )


class SolverConvergenceError(WeakdriveError):
    """An iterative solve stopped above the residual target."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"iterative solver did not converge: residual {residual:.3e} "
            f"after {iterations} iterations"
        )


class ThresholdNotApplicableError(WeakdriveError):
    """Drive threshold undefined (non-negative quadratic or vanishing quartic term)."""


class IlluminatedAtomError(WeakdriveError):
    """A dark-atom formula was called on a laser-driven atom."""


class CapExceededError(WeakdriveError):
    """Exact-solver system size above the hard cap."""


class PropagationError(WeakdriveError):
    """Adaptive integrator hit the step-size floor."""


class PartitionError(WeakdriveError):
    """Invalid subgroup partition (overlap, empty group, or out of range)."""


class ConfigError(WeakdriveError):
    """Configuration rejected; carries the dotted field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
