"""Error types raised by the measurement-simulation layer."""


class NotPositiveError(ValueError):
    """A POVM element has a negative eigenvalue (or is not Hermitian)."""


class NotCompleteError(ValueError):
    """The POVM elements do not sum to the identity."""


class IllConditionedError(ValueError):
    """A vanishing outcome probability has a non-vanishing derivative."""


class DegenerateLikelihoodError(RuntimeError):
    """The likelihood is flat along a direction; the estimate is not unique."""


class SearchFailedError(RuntimeError):
    """Every candidate in a POVM search was invalid or singular."""
