"""Small argument checks shared by the public functions and estimators."""
import numbers

import numpy as np

from .exceptions import InvalidArgumentError


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise InvalidArgumentError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_int(value, name, minimum):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise InvalidArgumentError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_vector(x, length, name="state"):
    """Return ``x`` as a contiguous float64 vector of the given length."""
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"{name} is not numeric") from exc
    if arr.ndim != 1 or arr.shape[0] != length:
        raise InvalidArgumentError(f"{name} must have shape ({length},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(arr)
