"""Vectorized composite Gauss rules for integrands with endpoint singularities.

The kernels in this package behave like ``d**(H - 1/2)`` near the origin (or
vary on a tiny scale ``n**-beta`` there), so all rules here are graded
geometrically towards the difficult endpoint.  Every builder is vectorized
over leading array dimensions: pass an array of interval lengths and get back
node/weight arrays with one extra trailing axis.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi(order, a, b=0.0):
    """Nodes/weights on [0, 1] for the weight ``(1 - x)**a * x**b``."""
    x, w = roots_jacobi(order, a, b)
    return 0.5 * (x + 1.0), w * 0.5 ** (1.0 + a + b)


def composite(breaks, order):
    """Composite Gauss-Legendre rule on panels given by ``breaks``.

    ``breaks`` has shape ``(..., P + 1)`` and must be sorted along the last
    axis; zero-width panels are allowed and contribute nothing.  Returns
    ``(nodes, weights)`` of shape ``(..., P * order)``.
    """
    breaks = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(order)
    lo = breaks[..., :-1, None]
    width = np.diff(breaks, axis=-1)[..., None]
    nodes = lo + width * x
    weights = width * w
    shape = breaks.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def _unit_breaks(levels, ratio=2.0):
    # 0, r^-levels, ..., r^-1, 1
    return np.concatenate(([0.0], ratio ** -np.arange(levels, -1, -1, dtype=float)))


def graded_rule(length, *, power=1.0, levels=30, order=10, extra=None):
    """Rule for ``int_0^length f(d) dd`` with trouble at ``d = 0``.

    The substitution ``d = length * u**power`` is applied and the ``u``-axis is
    cut into geometric panels ``2**-k``.  A power ``1 / (2H)`` turns a
    ``d**(2H - 1)`` singularity into a bounded integrand.  ``extra`` are
    additional breakpoints in ``d`` (for kinks); values outside
    ``[0, length]`` are clipped, producing empty panels.
    """
    length = np.asarray(length, dtype=float)
    base = _unit_breaks(levels)
    ub = np.broadcast_to(base, length.shape + base.shape)
    if extra is not None:
        extra = np.asarray(extra, dtype=float)
        extra = np.broadcast_to(extra, length.shape + extra.shape[-1:])
        safe_len = np.where(length > 0, length, 1.0)[..., None]
        frac = np.clip(extra / safe_len, 0.0, 1.0)
        ub = np.sort(np.concatenate([ub, frac ** (1.0 / power)], axis=-1), axis=-1)
    u, wu = composite(ub, order)
    d = length[..., None] * u ** power
    w = length[..., None] * power * u ** (power - 1.0) * wu
    return d, w


def two_sided_rule(length, *, power=1.0, levels=30, order=10, extra=None, right_power=1.0):
    """Like :func:`graded_rule` but graded towards both ends of ``[0, length]``.

    The left half uses the substitution with ``power``, the right half the one
    with ``right_power`` (measured from ``length``).
    """
    length = np.asarray(length, dtype=float)
    half = 0.5 * length
    left_extra = right_extra = None
    if extra is not None:
        extra = np.asarray(extra, dtype=float)
        left_extra = extra
        right_extra = length[..., None] - extra
    dl, wl = graded_rule(half, power=power, levels=levels, order=order, extra=left_extra)
    dr, wr = graded_rule(half, power=right_power, levels=levels, order=order,
                         extra=right_extra)
    return (np.concatenate([dl, length[..., None] - dr], axis=-1),
            np.concatenate([wl, wr], axis=-1))


def tail_rule(start, *, levels=20, order=10):
    """Rule for ``int_start^inf f(x) dx`` via ``x = start / y``.

    Suitable for algebraic decay faster than ``x**-1``; the ``y``-axis is
    graded geometrically towards ``y = 0``.
    """
    start = np.asarray(start, dtype=float)
    yb = np.broadcast_to(_unit_breaks(levels), start.shape + (levels + 2,))
    y, wy = composite(yb, order)
    x = start[..., None] / y
    w = start[..., None] / y ** 2 * wy
    return x, w
