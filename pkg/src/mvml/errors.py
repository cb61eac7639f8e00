"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    """An argument violates a documented precondition."""


class DegenerateModelError(ValueError):
    """The model or data makes a quantity undefined (singular covariance etc.)."""


class IdxFormatError(ValueError):
    """An IDX file is malformed."""
