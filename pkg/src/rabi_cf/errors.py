"""Exception hierarchy shared by the solver modules and the CLI."""


class RabiCFError(Exception):
    """Base class for all solver errors."""


class ParameterError(RabiCFError, ValueError):
    """Invalid model parameters or sector label."""


class CouplingZero(ParameterError):
    """Recurrence coefficients are undefined at g = 0."""


class BlockMismatch(ParameterError):
    """Sector label is not admissible for the model family."""


class NoCharacteristicEquation(RabiCFError):
    """The recurrence has no single characteristic quadratic (k = 1 or k >= 3)."""


class RegimeUnsupported(RabiCFError):
    """Parameters lie outside the regime where normalizable solutions exist."""


class MinimalSolutionUnavailable(RegimeUnsupported):
    """Both characteristic roots have equal modulus, so no minimal solution."""


class RegimeMismatch(RabiCFError):
    """A diagnostic was requested for the wrong regime."""


class NumericalFailure(RabiCFError):
    """Base class for numerical breakdowns."""


class NoConvergence(NumericalFailure):
    """An iteration cap was hit."""


class PoleArtifact(NumericalFailure):
    """A sign change of the spectral function came from a pole, not a zero."""


class TooFewTerms(RabiCFError, ValueError):
    """Not enough terms for a ratio-test verdict."""


class IllConditionedRoot(NumericalFailure):
    """A genuine root whose residuals exceed the confirmation tolerance.

    Raised when ``F`` is so steep at the root that even the nearest double
    leaves ``|F|`` above tolerance. ``floor`` is ``|F'(E)| * ulp(E) / 2``.
    """

    def __init__(self, message, energy=None, f_residual=None, pincherle_residual=None, floor=None):
        super().__init__(message)
        self.energy = energy
        self.f_residual = f_residual
        self.pincherle_residual = pincherle_residual
        self.floor = floor

    def as_dict(self) -> dict:
        return {
            "energy": self.energy,
            "f_residual": self.f_residual,
            "pincherle_residual": self.pincherle_residual,
            "floor": self.floor,
        }
