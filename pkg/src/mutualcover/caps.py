"""Size caps for enumeration-heavy routines.

Setting the environment variable ``MUTUALCOVER_CAP`` replaces every default
cap with its value. Raising it is at your own risk: the guarded routines are
exponential in alphabet or codebook size.
"""
import os

from .errors import SizeCapExceeded

ENV_VAR = "MUTUALCOVER_CAP"

TENSOR_ENTRIES = 10**7
TYPE_COUNT = 10**7
MASK_CELLS = 20
REALIZATIONS = 10**5
SEQUENCE_CELLS = 10**6
COMPOSITIONS = 10**7


def cap(default: int) -> int:
    override = os.environ.get(ENV_VAR)
    if override:
        return int(float(override))
    return default


def check(what: str, size: int, default: int) -> None:
    limit = cap(default)
    if size > limit:
        raise SizeCapExceeded(what, size, limit)
