"""Exception types shared across the package."""


class PnrError(Exception):
    """Base class for all pnrres errors."""


class ParameterDomainError(PnrError, ValueError):
    """A parameter lies outside its mathematical domain (e.g. sigma < 0)."""


class PhotonNumberRangeError(PnrError, ValueError):
    """A photon number n lies outside the range modeled by a PnrModel."""


class NumericalFailureError(PnrError, RuntimeError):
    """A numerical routine failed (bracket, root finding, ...).

    Carries the bracket that was searched, when applicable.
    """

    def __init__(self, message: str, bracket: tuple[float, float] | None = None):
        super().__init__(message)
        self.bracket = bracket


class IllPosedFitError(PnrError, ValueError):
    """The fit problem is degenerate (e.g. all histogram mass in one bin)."""


class InsufficientDataError(PnrError, ValueError):
    """Not enough data to compute the requested statistic."""
