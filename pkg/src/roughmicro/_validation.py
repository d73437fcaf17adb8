"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

import math
import numbers

import numpy as np

from .errors import ConfigError, DomainError


def check_scalar(x, name, *, kind=numbers.Real, min_val=None, max_val=None,
                 include_min=True, include_max=True, error=DomainError):
    """Validate a scalar parameter and return it as ``float`` or ``int``.

    Raises ``error`` (default :class:`DomainError`) when ``x`` has the wrong
    type, is not finite, or violates the bounds.
    """
    if kind is int:
        kind = numbers.Integral
    if isinstance(x, bool) or not isinstance(x, kind):
        # numpy scalars register as numbers.Real / numbers.Integral already
        raise error(f"{name} must be {kind.__name__}, got {type(x).__name__}")
    if kind is numbers.Integral:
        x = int(x)
    else:
        x = float(x)
        if not math.isfinite(x):
            raise error(f"{name} must be finite, got {x}")
    if min_val is not None:
        if x < min_val or (x == min_val and not include_min):
            op = ">=" if include_min else ">"
            raise error(f"{name} must be {op} {min_val}, got {x}")
    if max_val is not None:
        if x > max_val or (x == max_val and not include_max):
            op = "<=" if include_max else "<"
            raise error(f"{name} must be {op} {max_val}, got {x}")
    return x


def check_hurst(hurst, *, allow_half=True):
    return check_scalar(hurst, "hurst", min_val=0.0, max_val=0.5,
                        include_min=False, include_max=allow_half)


def check_times(t, name="t"):
    """Return ``t`` as a float array; reject non-finite entries."""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``.

    ``None`` and integers create a fresh Philox generator; an existing
    ``Generator`` is passed through unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.Generator(np.random.Philox(seed))
    raise ConfigError(f"{seed!r} cannot be used to seed a Generator")


def check_increasing(values, name, *, strict=True):
    arr = np.asarray(values)
    diffs = np.diff(arr)
    ok = np.all(diffs > 0) if strict else np.all(diffs >= 0)
    if not ok:
        raise ConfigError(f"{name} must be {'strictly ' if strict else ''}increasing")
    return arr
