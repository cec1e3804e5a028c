"""Exception and warning types shared across the package."""


class EmlabError(Exception):
    """Base class for all package-specific errors."""


# -- spectral calculus --------------------------------------------------------

class NegativePowerOnNonzeroMean(EmlabError):
    """Negative fractional power applied to a field with non-negligible mean."""


class BlockOutOfRange(EmlabError):
    """Dyadic block index outside the family resolved on this grid."""


# -- model / initial data -----------------------------------------------------

class DensityNonpositive(EmlabError):
    """The transformed density leaves the admissible range 1 + mu*n > 0."""


class OutOfRange(EmlabError):
    """Argument outside the domain of the closure inverse."""


class AmplitudeTooLarge(EmlabError):
    """Requested perturbation amplitude violates pointwise positivity."""


# -- dynamics -----------------------------------------------------------------

class CflViolation(UserWarning):
    """Time step exceeds the advisory CFL bound (warning, not fatal)."""


class SimulationDiverged(EmlabError):
    """NaN or Inf detected in the evolved state."""


# -- linear analyzer ----------------------------------------------------------

class IllConditioned(EmlabError):
    """Eigenvector matrix too ill-conditioned for diagonalized propagation."""


class QuadratureNotConverged(EmlabError):
    """Doubling the quadrature nodes moved a reported value by too much."""


# -- energetics ---------------------------------------------------------------

class DerivativeOrderExceedsResolution(UserWarning):
    """High-order derivative weights are dominated by the top of the resolved band."""


class EquivalenceViolated(EmlabError):
    """An equivalence certificate failed; indicates an implementation bug."""


# -- analysis -----------------------------------------------------------------

class InsufficientSamples(EmlabError):
    """Too few samples inside the fit window."""


class NonpositiveValue(EmlabError):
    """Log-log fit requires strictly positive values."""


class RequiresBInftyZero(EmlabError):
    """Requested quantity is only defined for zero background magnetic field."""


class SOutOfRange(EmlabError):
    """Negative-regularity index outside the admissible range."""


class POutOfRange(EmlabError):
    """Lebesgue exponent outside [1, 2]."""


# -- inequality oracles -------------------------------------------------------

class ThetaOutOfRange(EmlabError):
    """Interpolation exponent implied by the index relation is inadmissible."""


class ExponentMismatch(EmlabError):
    """Embedding indices do not satisfy the required scaling relation."""


class ExactViolated(EmlabError):
    """A constant-free discrete inequality failed; indicates an implementation bug."""


# -- cli ----------------------------------------------------------------------

class ConfigError(EmlabError):
    """Invalid or unknown configuration content."""
