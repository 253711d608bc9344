"""Exception types raised across the package."""


class CovertIsacError(Exception):
    """Base class for all package errors."""


class InvalidGeometry(CovertIsacError):
    """Channel geometry is unusable (e.g. a UE with no propagation paths)."""


class InvalidStats(CovertIsacError):
    """Hypothesis statistics violate kappa1 >= kappa0 > 0."""


class InvalidFilter(CovertIsacError):
    """Receive filter is zero or otherwise unusable."""


class SingularDenominator(CovertIsacError):
    """Denominator matrix of a generalized Rayleigh quotient is singular."""


class Infeasible(CovertIsacError):
    """A subproblem has an empty feasible set."""


class InfeasibleDesign(CovertIsacError):
    """The full beamforming design problem is infeasible at this configuration."""


class SensingInfeasible(InfeasibleDesign):
    """No beamformer meets the sensing SINR floor at the current receive filter."""


class ZeroMatrix(CovertIsacError):
    """Rank-1 extraction was handed an (effectively) zero matrix."""


class BracketError(CovertIsacError):
    """Root bracketing failed: no sign change on the given interval."""


class RankDeficient(CovertIsacError):
    """Channel matrix is rank deficient where full column rank is required."""


class DegenerateTest(CovertIsacError):
    """Monte-Carlo detector called with indistinguishable hypotheses (z = 1)."""
