"""Exception hierarchy shared by all analyses."""


class FHNError(Exception):
    """Base class for domain errors raised by this package."""


class NoRealFolds(FHNError):
    pass


class MultipleEquilibria(FHNError):
    pass


class AllRealEigenvalues(FHNError):
    """The linearization at q has three real eigenvalues."""


class StepSizeUnderflow(FHNError):
    """The adaptive step fell below the admissible minimum (stiffness)."""


class HorizonReached(FHNError):
    pass


class OutOfRange(FHNError):
    pass


class FoldTooClose(FHNError):
    pass


class NewtonDivergence(FHNError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class NoIntersection(FHNError):
    pass


class EmptyTrace(FHNError):
    pass


class NoTurn(FHNError):
    pass


class NoSignChange(FHNError):
    pass


class Unbounded(FHNError):
    pass


class NoConvergence(FHNError):
    pass


class DomainViolation(FHNError):
    pass


class NoHomoclinic(FHNError):
    pass


class NoOscillations(FHNError):
    pass


class Inconclusive(FHNError):
    pass


class SignPattern(FHNError):
    """The spectrum at q is not a saddle-focus with one unstable real eigenvalue."""
