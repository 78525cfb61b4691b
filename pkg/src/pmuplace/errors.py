"""Exception types shared across the package."""


class PlacementError(Exception):
    """Base class for all errors raised by pmuplace."""


class ModelError(PlacementError):
    """Malformed system, case file or measurement data."""


class NumericalError(PlacementError):
    """A matrix that must be symmetric positive definite is not."""


class NotDetectable(NumericalError):
    """The information matrix of a Riccati step is rank deficient.

    ``deficiency`` is the number of state directions left without any
    information (dynamics or sensors).
    """

    def __init__(self, deficiency, message=None):
        self.deficiency = int(deficiency)
        super().__init__(message or f"information matrix rank deficient by {self.deficiency}")


class RefusedScale(PlacementError):
    """An enumeration was refused because the candidate count exceeds its guard."""
