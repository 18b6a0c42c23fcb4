"""Exception hierarchy shared by all horizon modules.

The CLI maps these onto exit codes: ConfigError -> 1, PreconditionError
(and analysis errors) -> 2, InconsistencyError -> 3.
"""


class HorizonError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HorizonError):
    """Malformed configuration, flags or field specification."""


class DslError(ConfigError):
    """Field expression could not be parsed or uses disallowed names."""


class PreconditionError(HorizonError):
    """An operation was called outside its stated domain of validity."""


class InteriorPointError(PreconditionError):
    """Evaluation requested inside the excluded inner disk."""


class NonFiniteError(HorizonError):
    """Field evaluation produced NaN or infinity."""


class VanishingGradientError(HorizonError):
    """Leaf tracing hit a point where the level-set gradient vanishes."""


class VanishingFieldError(HorizonError):
    """The tangent field vanishes on a curve where it must not."""


class DegenerateTangencyError(HorizonError):
    """Tangency where the local leaf crosses the curve (inflection contact)."""


class StepResolutionError(HorizonError):
    """Angle increment too large for reliable winding accumulation."""


class RegionConstructionError(HorizonError):
    """A quadrature region could not be built from the given arc."""


class OrderingError(PreconditionError):
    """Arc endpoints violate the projection ordering required by a check."""


class SearchFailureError(HorizonError):
    """A bounded search (translation vector, curve family) exhausted its budget."""


class BlendSeamError(HorizonError):
    """Global extension blend failed its seam regularity checks."""


class InconsistencyError(HorizonError):
    """Two independent computations of the same quantity disagree badly."""
