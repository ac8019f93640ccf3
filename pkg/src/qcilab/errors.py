"""Exception taxonomy shared across the package.

Operations raise these instead of bare ValueError so callers (and the CLI
error router) can tell precondition violations apart from solver failures.
"""


class QciError(Exception):
    """Base class for all package errors."""


class PreconditionError(QciError):
    """An operation was called outside its stated preconditions."""


class OutOfChart(PreconditionError):
    """Base point lies outside the model's coordinate chart."""


class Unsupported(QciError):
    """Operation undefined for this model variant (e.g. p2 of a 1D system)."""


class NotRegularLevel(PreconditionError):
    """dp1 vanishes somewhere on the requested p1 level set."""


class EmptyShell(QciError):
    """The fiber energy shell over the base point is empty."""


class PoleSingularity(QciError):
    """Fiber-shell parametrization degenerates at a surface-of-revolution pole."""


class SolverDivergence(QciError):
    """An eigenvalue iteration failed to converge."""


class NoBracket(QciError):
    """Two-parameter matching found no sign change over the search interval."""


class LinearSolveFailure(QciError):
    """Sparse factorization or linear solve failed inside shift-invert."""


class NegativeIntegrand(QciError):
    """Action integrand dipped below tolerance (wrong side or wrong branch)."""


class QuadratureStall(QciError):
    """Adaptive quadrature hit its subdivision cap before reaching tolerance."""


class AllowedRegion(PreconditionError):
    """Requested point lies in the classically allowed region (no action there)."""


class InsufficientSamples(PreconditionError):
    """Not enough samples per decade for a log-log window fit."""


class EmptyRegion(PreconditionError):
    """Region predicate selects no grid point of the chart."""


class EmptySpectrum(QciError):
    """No eigenvalue fell inside the spectral window for this sweep row."""


class DegenerateFit(QciError):
    """Scaling fit impossible (all abscissae equal)."""


class UnderflowRegion(QciError):
    """|u| floors out on most of the requested region; increase h or shrink it."""


class Floor(QciError):
    """Fewer than three usable points above the underflow floor."""


class UnderResolved(PreconditionError):
    """Grid too coarse for the oscillation it is asked to represent."""


class ConfigError(QciError):
    """Run configuration rejected; carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
