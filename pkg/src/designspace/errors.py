"""Exception and warning types shared across the toolkit."""


class DesignSpaceError(Exception):
    """Base class for all toolkit errors."""


# -- geometry ---------------------------------------------------------------

class DimensionMismatch(DesignSpaceError):
    """Point dimensions are inconsistent or unsupported."""


class DegenerateInput(DesignSpaceError):
    """Point cloud is coaffine (collinear in 2D, coplanar in 3D) or too small."""


class DegenerateSimplex(DesignSpaceError):
    """Simplex volume is below the degeneracy tolerance."""


class EmptyShape(DesignSpaceError):
    """No simplex survives the circumradius filter."""


# -- sampling / problem -----------------------------------------------------

class InvalidBounds(DesignSpaceError):
    """Bounds are non-finite, inverted, or outside the parent bounds."""


class MissingKpi(DesignSpaceError):
    """A constraint references a KPI the model does not produce."""


# -- identification ---------------------------------------------------------

class BracketInvalid(DesignSpaceError):
    """Bisection bracket could not be repaired to satisfy its preconditions."""


class NoUnifiedShape(DesignSpaceError):
    """No single-region shape found within the configured search limits."""


# -- analysis ---------------------------------------------------------------

class NopOutsideSpace(DesignSpaceError):
    """The nominal operating point lies outside the design space."""


class EmptyRegion(DesignSpaceError):
    """No samples fall inside the requested region."""


class EmptyInput(DesignSpaceError):
    """An operation received zero rows."""


# -- surrogate / process model ----------------------------------------------

class DivergedTraining(DesignSpaceError):
    """Training loss became non-finite."""


class IntegrationFailure(DesignSpaceError):
    """The ODE integrator failed (step-size collapse or solver error)."""


class MaxIterationsWarning(UserWarning):
    """An iterative search hit its iteration cap; the result is best-effort."""


class ExtrapolationWarning(UserWarning):
    """Inputs fall outside the range a model was fitted or validated on."""


class SaturationWarning(UserWarning):
    """Mass-transfer saturation clamp engaged (fractional coverage near 1)."""


class NonNegativityWarning(UserWarning):
    """State values dipped below zero beyond tolerance and were clipped."""
