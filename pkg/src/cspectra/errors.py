"""Exception types raised across the package."""


class CSpectraError(ValueError):
    """Base class for all domain errors."""


class BandLimitError(CSpectraError):
    """A field is not representable at the grid's analysis degree."""


class AliasingError(CSpectraError):
    """Too much energy landed in the top degrees after a nodewise operation."""


class ConvexityError(CSpectraError):
    """A support function failed the positive-definiteness certificate."""


class PositivityError(CSpectraError):
    """A field that must be strictly positive is not."""


class GridMismatchError(CSpectraError):
    """Fields, spectra or grids of incompatible shape were combined."""


class LowDegreeContentError(CSpectraError):
    """A resolvent right-hand side carries forbidden low-degree content."""


class SingularMultiplierError(CSpectraError):
    """A spectral multiplier vanishes where it has to be inverted."""


class TrajectoryTruncated(CSpectraError):
    """An iteration lost certification; ``records`` holds the steps completed so far."""

    def __init__(self, message: str, records, step: int):
        super().__init__(message)
        self.records = list(records)
        self.step = step
