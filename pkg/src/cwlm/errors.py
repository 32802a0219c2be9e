"""Exception hierarchy shared by all cwlm modules."""


class CWLMError(Exception):
    """Base class for every error raised by the package."""


class NonFiniteParameter(CWLMError, ValueError):
    pass


class PhysicalityViolation(CWLMError, ValueError):
    """A Cauchy-Schwarz bound is violated and strict validation was requested."""


class NotNormalized(CWLMError, ValueError):
    pass


class NotOrthogonal(CWLMError, ValueError):
    pass


class ProbabilityOutOfRange(CWLMError, ValueError):
    pass


class InvalidState(CWLMError, ValueError):
    """Matrix is not Hermitian, not positive or not of unit trace."""


class ExpmFailure(CWLMError, ArithmeticError):
    pass


class DegenerateKernel(CWLMError, ArithmeticError):
    """The generator does not have a unique stationary state."""


class ZeroOverlapDenominator(CWLMError, ArithmeticError):
    """Post-selection probability underflows; add regularizing dynamics."""


class ZeroOverlap(CWLMError, ArithmeticError):
    """Analytic weights diverge at zero overlap; use the regularized form."""


class NonzeroOverlap(CWLMError, ValueError):
    pass


class InsufficientDecay(CWLMError, ArithmeticError):
    """Generating function has not decayed at the edge of the chi grid."""


class IllConditionedStencil(CWLMError, ArithmeticError):
    pass


class GridMismatch(CWLMError, ValueError):
    pass


class PoorFit(CWLMError, ArithmeticError):
    pass


class InvalidK(CWLMError, ValueError):
    pass


class StateBlowup(CWLMError, ArithmeticError):
    """Trajectory state lost trace or positivity beyond tolerance."""


class UnravelingInfeasible(CWLMError, ValueError):
    """The monitored channel demands more back-action than the generator has."""


class EmptyEnsemble(CWLMError, ValueError):
    pass


class ConfigError(CWLMError, ValueError):
    pass


class PhysicsWarning(UserWarning):
    """Advisory counterpart of PhysicalityViolation."""
