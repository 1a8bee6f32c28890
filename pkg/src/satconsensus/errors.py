"""Exception hierarchy shared by the library and the CLI."""


class ConsensusError(Exception):
    """Base class for every error raised by this package."""


class NotStronglyConnected(ConsensusError):
    pass


class NoSpanningTree(ConsensusError):
    pass


class NumericalRankFailure(ConsensusError):
    pass


class DimensionMismatch(ConsensusError):
    pass


class InfeasibleParams(ConsensusError):
    pass


class InfeasibleProblem(ConsensusError):
    """The alpha interval is empty: the plant is not controllable within u_max."""


class MissingFilterState(ConsensusError):
    pass


class NonpositiveMu(ConsensusError):
    """A settling-time bound has a nonpositive denominator."""


class BoundViolation(ConsensusError):
    """An uncertainty model leaves its declared bounds.

    Attributes:
        report: the BoundsReport that triggered the error.
    """

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class NonFiniteState(ConsensusError):
    pass


class AssumptionViolated(ConsensusError):
    pass


class ScenarioError(ConsensusError):
    """Invalid scenario content (shape, values, or initial conditions)."""
