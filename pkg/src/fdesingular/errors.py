"""Exception hierarchy shared by all modules."""


class FDEError(Exception):
    """Base class for every error raised by this package."""


class RangeError(FDEError, ValueError):
    """Parameters outside the admissible open set."""


class DomainError(FDEError, ValueError):
    """Evaluation point outside the domain of a solution."""


class ConfigError(FDEError, ValueError):
    """Malformed or inconsistent run configuration."""


class GridMismatch(FDEError, ValueError):
    """Two fields or trajectories that should share a grid do not."""


class EmptyOverlap(FDEError, ValueError):
    """A resampling window is not covered by the source domain."""


class NumericalFailure(FDEError, RuntimeError):
    """A numerical procedure failed to deliver a result."""


class NoContraction(NumericalFailure):
    pass


class BlowUp(NumericalFailure):
    pass


class Vanish(NumericalFailure):
    pass


class StepFailure(NumericalFailure):
    pass


class NoPlateau(NumericalFailure):
    pass


class PositivityLoss(NumericalFailure):
    pass


class StiffnessFailure(NumericalFailure):
    pass
