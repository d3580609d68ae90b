"""Exception hierarchy shared by every module of the package."""


class CvError(Exception):
    """Base class for all package errors."""


# numerics
class UnstableDrift(CvError):
    """A drift matrix has an eigenvalue with non-negative real part."""


class SingularSystem(CvError):
    pass


class NoConvergence(CvError):
    pass


class NotHermitian(CvError):
    pass


class ToleranceNotMet(CvError):
    """Adaptive quadrature ran out of subdivisions before reaching tolerance."""


class NoBracket(CvError):
    pass


# gaussian states and channels
class DimensionMismatch(CvError):
    pass


class NotPositiveDefinite(CvError):
    pass


class InvalidChannel(CvError):
    pass


class SingularResolvent(CvError):
    pass


class NegativeDiscriminant(CvError):
    """Raised when a two-mode CM yields a negative discriminant (unphysical input)."""


class NotSymmetric(CvError):
    pass


class SingularCM(CvError):
    pass


class Unphysical(CvError):
    pass


# teleportation
class NoRoot(CvError):
    pass


class NotEntangled(CvError):
    """The shared state is separable; the best achievable fidelity is the classical 1/2."""

    def __init__(self, nu, fidelity=0.5):
        super().__init__(f"state is not entangled (nu={nu:.6g}); classical fidelity {fidelity}")
        self.nu = nu
        self.fidelity = fidelity


class DomainError(CvError):
    pass


# optomechanics
class FixedPointDiverged(CvError):
    pass


class NonPositiveInput(CvError):
    pass


class NotOrthogonal(CvError):
    pass


class ConfigParse(CvError):
    pass
