"""Exception hierarchy shared across the package."""


class BandgapError(Exception):
    """Base class for all package errors."""


class ComputationError(BandgapError):
    """A numerical computation did not produce a trustworthy result."""


class DegenerateLattice(BandgapError, ValueError):
    pass


class SingularArgument(BandgapError, ValueError):
    pass


class InvalidSpectralParameter(BandgapError, ValueError):
    pass


class NearPole(ComputationError):
    pass


class NoConvergence(ComputationError):
    """Raised when an iterative procedure hits its cap; carries the best estimate."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class BracketFailure(ComputationError):
    pass


class InvalidScale(BandgapError, ValueError):
    pass


class NoGapToScale(ComputationError):
    pass


class Infeasible(ComputationError):
    pass


class BadBaseCoupling(BandgapError, ValueError):
    pass


class InvalidDesignInputs(BandgapError, ValueError):
    pass


class MeshTooCoarse(BandgapError, ValueError):
    pass


class SolverFailure(ComputationError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CertificateFailed(ComputationError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NotContractive(ComputationError):
    pass


class NearResonance(ComputationError):
    pass


class SingularQ(ComputationError):
    pass


class PreconditionError(BandgapError, ValueError):
    pass
