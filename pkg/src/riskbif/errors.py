"""Exception and warning types shared across the package."""


class RiskbifError(Exception):
    """Base class for all errors raised by riskbif."""


class DomainError(RiskbifError, ValueError):
    """The vector field was evaluated where it is undefined (N <= 0)."""


class ParameterError(RiskbifError, ValueError):
    """A parameter record cannot be constructed (missing, non-finite, T_total <= 0)."""


# equilibria
class DiscriminantError(RiskbifError):
    pass


class DegenerateError(RiskbifError):
    pass


class SingularJacobian(RiskbifError):
    pass


class NoConvergence(RiskbifError):
    pass


class NegativeCoordinate(RiskbifError):
    pass


# dynamics
class StepSizeUnderflow(RiskbifError):
    pass


class NoCrossing(RiskbifError):
    pass


class MaxReturnsExceeded(RiskbifError):
    pass


class ContinuationBroken(RiskbifError):
    pass


# bifurcation
class PairLost(RiskbifError):
    """The tracked complex pair became real inside a Hopf bracket."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


# normal form
class StructureError(RiskbifError):
    pass


class IllConditioned(RiskbifError):
    pass


class FitIllConditioned(RiskbifError):
    pass


class ParameterRangeWarning(UserWarning):
    """A parameter lies outside its biological range."""


class BoundaryWarning(UserWarning):
    """A computation was carried out on the boundary of the parameter box."""


class TangencyWarning(UserWarning):
    """The flow is nearly tangent to a Poincaré section at a crossing."""
