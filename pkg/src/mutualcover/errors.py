"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (CLI exit code 2);
size-cap violations raise :class:`SizeCapExceeded` (CLI exit code 3).
"""


class MutualCoverError(Exception):
    """Base class for all package errors."""


class ValidationError(MutualCoverError, ValueError):
    """Input failed validation."""


class NegativeEntry(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class DuplicateLabel(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class UnsupportedOrder(ValidationError):
    pass


class DegenerateTilt(ValidationError):
    pass


class EpsilonTooLarge(ValidationError):
    pass


class PreconditionMN(ValidationError):
    """Codebook sizes below the threshold a bound requires."""


class ZeroVarentropy(ValidationError):
    pass


class RegimeError(ValidationError):
    """Rates outside the range where a formula applies."""


class InfeasibleFlow(MutualCoverError):
    """The flow network could not route all source mass.

    Raised when the overflow allowance was computed too small; callers retry
    with a larger allowance.
    """


class SizeCapExceeded(MutualCoverError):
    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what}: size {size} exceeds cap {cap} "
                         "(set MUTUALCOVER_CAP to override)")
        self.what = what
        self.size = size
        self.cap = cap
