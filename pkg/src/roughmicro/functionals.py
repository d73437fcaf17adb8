"""Kernel error functionals, the covariance ``C_n`` and rate fitting.

For a kernel ``phi_n`` and its limit ``phi_inf`` the weak error of the price
moments is controlled by

* ``star``     -- ``(1/n) int_0^T phi_n^4 + (1/n) int_{-inf}^0 (phi_n(T-s) - phi_n(-s))^4``
* ``diamond``  -- ``sup_t int_0^t phi_inf(t-s) |C_n(s,t) - C_inf(s,t)| ds``
* ``square``   -- ``sup_t int_0^t phi_n(t-s) |C_n(s,s) - C_inf(s,s)| ds``
* ``triangle`` -- ``||phi_n - phi_inf||_{L^1(0,T)}``

``C_n(t, s) = int_0^{s^t} phi_n(t-r) phi_n(s-r) dr`` plus, when the pre-zero
order flow is included, ``int_{-inf}^0 (phi_n(t-r) - phi_n(-r))(phi_n(s-r) -
phi_n(-r)) dr``.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from . import quadrature
from ._validation import check_scalar
from .errors import AccuracyError, DomainError
from .kernels import KernelSpec, _phi, c_hurst

# quadrature resolution used by the vectorized covariance
_LEVELS = 14
_ORDER = 10
_TAIL_FACTOR = 10.0


# --- covariance ------------------------------------------------------------------


def limit_covariance(hurst, t, s, pre_zero=True):
    """Closed form of ``C_inf``.

    Two-sided: ``c_H**2 (t^2H + s^2H - |t-s|^2H) / 2``.  Without the pre-zero
    part (Riemann-Liouville): ``s^(H+1/2) t^(H-1/2) / (H+1/2) *
    2F1(1/2-H, 1; H+3/2; s/t)`` for ``s <= t``.
    """
    h = hurst
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if pre_zero:
        return c_hurst(h) ** 2 * 0.5 * (t ** (2 * h) + s ** (2 * h) - np.abs(t - s) ** (2 * h))
    hi = np.maximum(t, s)
    lo = np.minimum(t, s)
    safe_hi = np.where(hi > 0, hi, 1.0)
    z = lo / safe_hi
    val = (lo ** (h + 0.5) * safe_hi ** (h - 0.5) / (h + 0.5)
           * special.hyp2f1(0.5 - h, 1.0, h + 1.5, z))
    return np.where(lo > 0, val, 0.0)


def _pre_zero_rule(t, s, kernel):
    """Nodes/weights in ``x = -r`` for the pre-zero covariance integral."""
    h = kernel.hurst
    big = np.maximum(np.maximum(t, s), 1e-300) * _TAIL_FACTOR
    eps = kernel.eps
    extra = np.stack(np.broadcast_arrays(eps, eps - t, eps - s), axis=-1) if eps > 0 else None
    x1, w1 = quadrature.graded_rule(big, power=1.0 / (2 * h), levels=_LEVELS,
                                    order=_ORDER, extra=extra)
    x2, w2 = quadrature.tail_rule(big, levels=_LEVELS, order=_ORDER)
    return np.concatenate([x1, x2], axis=-1), np.concatenate([w1, w2], axis=-1)


def covariance_matrix_values(kernel, t, s, pre_zero=True):
    """Vectorized ``C_n(t, s)`` by fixed graded Gauss rules (broadcasts t, s)."""
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("covariance arguments must be nonnegative")
    h = kernel.hurst
    hi = np.maximum(t, s)
    lo = np.minimum(t, s)
    gap = hi - lo
    eps = kernel.eps
    extra = np.stack(np.broadcast_arrays(eps, eps - gap), axis=-1) if eps > 0 else None
    d, w = quadrature.graded_rule(lo, power=1.0 / (2 * h), levels=_LEVELS,
                                  order=_ORDER, extra=extra)
    safe = d > 0
    f = np.where(safe, _phi(kernel, gap[..., None] + d) * _phi(kernel, np.where(safe, d, 1.0)), 0.0)
    out = np.sum(w * f, axis=-1)
    if pre_zero:
        x, wx = _pre_zero_rule(t, s, kernel)
        px = _phi(kernel, x)
        g = (_phi(kernel, t[..., None] + x) - px) * (_phi(kernel, s[..., None] + x) - px)
        out = out + np.sum(wx * g, axis=-1)
    return out


def covariance_Cn(kernel, t, s, pre_zero=True, *, tol=1e-9, limit=400):
    """Covariance ``C_n(t, s)`` of the kernel-driven Gaussian volatility.

    Scalar, adaptive (QUADPACK) evaluation with absolute tolerance ``tol``;
    breakpoints are placed at the kernel kinks, and the pre-zero tail beyond
    ``10 max(t, s)`` is mapped onto ``(0, 1]`` by ``x -> start / y``.

    Raises
    ------
    AccuracyError
        If the estimated quadrature error exceeds ``tol``.
    """
    t = check_scalar(t, "t", min_val=0.0)
    s = check_scalar(s, "s", min_val=0.0)
    lo, hi = min(t, s), max(t, s)
    if hi == 0.0:
        return 0.0
    phi = lambda x: _phi(kernel, np.float64(x))
    gap = hi - lo
    pts = [p for p in (kernel.eps, kernel.eps - gap) if 0 < p < lo] if kernel.eps else []
    total, err = 0.0, 0.0
    if lo > 0:
        # integrate in d = lo - r; the substitution d = u**(1/(2H)) tames d**(2H-1)
        q = 1.0 / (2 * kernel.hurst)
        upts = [p ** (1 / q) for p in pts]
        f = lambda u: phi(gap + u ** q) * phi(u ** q) * q * u ** (q - 1) if u > 0 else 0.0
        val, e = integrate.quad(f, 0.0, lo ** (1 / q), points=upts or None,
                                epsabs=tol / 4, epsrel=0.0, limit=limit)
        total += val
        err += e
    if pre_zero:
        big = _TAIL_FACTOR * hi
        q = 1.0 / (2 * kernel.hurst)

        def g(x):
            px = phi(x)
            return (phi(t + x) - px) * (phi(s + x) - px)

        zpts = [p ** (1 / q) for p in (kernel.eps, kernel.eps - t, kernel.eps - s)
                if kernel.eps and 0 < p < big]
        val, e = integrate.quad(lambda u: g(u ** q) * q * u ** (q - 1) if u > 0 else 0.0,
                                0.0, big ** (1 / q), points=sorted(zpts) or None,
                                epsabs=tol / 4, epsrel=0.0, limit=limit)
        total += val
        err += e
        val, e = integrate.quad(lambda y: g(big / y) * big / y ** 2 if y > 0 else 0.0,
                                0.0, 1.0, epsabs=tol / 4, epsrel=0.0, limit=limit)
        total += val
        err += e
    if err > tol:
        raise AccuracyError(f"covariance quadrature error {err:.2e} > {tol:.0e}", total, err)
    return float(total)


# --- error functionals ---------------------------------------------------------------


@dataclass
class ErrorFunctionals:
    star: float
    diamond: float
    square: float
    triangle: float
    n: int
    T: float
    kernel: KernelSpec

    @property
    def total(self):
        return self.star + self.diamond + self.square + self.triangle

    def as_row(self):
        return {"n": self.n, "star": self.star, "diamond": self.diamond,
                "square": self.square, "triangle": self.triangle, "sum": self.total}


def star_functional(kernel, T, pre_zero=True):
    h = kernel.hurst
    d, w = quadrature.graded_rule(T, power=1.0, levels=40, order=_ORDER,
                                  extra=np.array(kernel.kinks))
    val = np.sum(w * _phi(kernel, d) ** 4)
    if pre_zero:
        x, wx = _pre_zero_rule(np.float64(T), np.float64(T), kernel)
        val += np.sum(wx * (_phi(kernel, T + x) - _phi(kernel, x)) ** 4)
    return float(val) / kernel.n


def triangle_functional(kernel, T):
    lim = kernel.limit_kernel()
    d, w = quadrature.graded_rule(T, power=1.0 / (kernel.hurst + 0.5), levels=40,
                                  order=_ORDER, extra=np.array(kernel.kinks))
    return float(np.sum(w * np.abs(_phi(kernel, d) - _phi(lim, d))))


def _outer_rule(t, kernel, power):
    eps = kernel.eps
    return quadrature.two_sided_rule(t, power=power, levels=_LEVELS, order=_ORDER,
                                     extra=np.array([eps, t - eps]))


def _diamond_at(kernel, t, pre_zero):
    """``int_0^t phi_inf(t-s) |C_n(s,t) - C_inf(s,t)| ds``."""
    h = kernel.hurst
    e, w = _outer_rule(t, kernel, 1.0 / (h + 0.5))
    s = t - e
    diff = (covariance_matrix_values(kernel, s, t, pre_zero)
            - limit_covariance(h, s, t, pre_zero))
    weight = np.where(e > 0, w * np.where(e > 0, e, 1.0) ** (h - 0.5), 0.0)
    return float(np.sum(weight * np.abs(diff)))


def _square_at(kernel, t, diag):
    e, w = _outer_rule(t, kernel, 1.0)
    return float(np.sum(w * _phi(kernel, e) * np.abs(diag(t - e))))


def _sup(fun, T, grid_points=64, iters=24):
    """Max of ``fun`` on ``(0, T]``: grid search plus golden-section refinement."""
    grid = np.linspace(T / grid_points, T, grid_points)
    vals = np.array([fun(t) for t in grid])
    k = int(np.argmax(vals))
    a = grid[k - 1] if k > 0 else 0.5 * grid[0]
    b = grid[k + 1] if k + 1 < grid_points else T
    best_t, best = grid[k], vals[k]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    for tt, ff in ((c, fc), (d, fd)):
        if ff > best:
            best_t, best = tt, ff
    if k + 1 == grid_points:
        fT = fun(T)
        if fT > best:
            best_t, best = T, fT
    return best, best_t


def error_functionals(kernel, n=None, T=1.0, pre_zero=True, *, grid_points=64):
    """Evaluate ``star``, ``diamond``, ``square`` and ``triangle`` for ``kernel``.

    ``n`` overrides ``kernel.n`` when given.  Suprema over ``t`` use a
    ``grid_points`` grid on ``(0, T]`` refined by golden-section search.
    """
    if n is not None:
        kernel = kernel.with_n(n)
    if kernel.is_limit:
        raise DomainError("error functionals need a non-limit kernel")
    T = check_scalar(T, "T", min_val=0.0, include_min=False)
    h = kernel.hurst

    def diag(s):
        s = np.asarray(s, dtype=float)
        return covariance_matrix_values(kernel, s, s, pre_zero) - limit_covariance(h, s, s, pre_zero)

    star = star_functional(kernel, T, pre_zero)
    diamond, _ = _sup(lambda t: _diamond_at(kernel, t, pre_zero), T, grid_points)
    square, _ = _sup(lambda t: _square_at(kernel, t, diag), T, grid_points)
    triangle = triangle_functional(kernel, T)
    return ErrorFunctionals(star, diamond, square, triangle, kernel.n, T, kernel)


# --- rates -----------------------------------------------------------------------------


class RateFit(NamedTuple):
    slope: float
    intercept: float
    residual: float
    slope_stderr: float


def fit_rate(ns, values):
    """Least-squares fit of ``log(value) = intercept + slope * log(n)``.

    ``residual`` is the root-mean-square log residual.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape or ns.size < 3:
        raise DomainError("fit_rate needs at least 3 paired points")
    if np.any(values <= 0) or np.any(ns <= 0):
        raise DomainError("fit_rate needs positive n and values")
    x, y = np.log(ns), np.log(values)
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    r = y - (intercept + slope * x)
    rms = float(np.sqrt(np.mean(r ** 2)))
    dof = x.size - 2
    sxx = np.sum((x - x.mean()) ** 2)
    se = float(np.sqrt(np.sum(r ** 2) / dof / sxx)) if dof > 0 else float("nan")
    return RateFit(float(slope), float(intercept), rms, se)


def theoretical_exponent(hurst):
    """Decay exponent of the optimized error bound (positive number)."""
    if hurst < 0.25:
        return 1.0 / 3.0 + 4 * hurst / (3 - 6 * hurst)
    return 1.0


def lower_bound_scan(kernels, gamma, n_grid, *, resolution=1e-12, samples=2048):
    """``n**gamma * |{t <= n**-gamma : phi_n(t) >= phi_inf(t) / 2}|`` along ``n_grid``.

    ``kernels`` is a callable ``n -> KernelSpec`` (or a single spec, re-indexed
    by ``n``).  Sign changes of ``phi_n - phi_inf / 2`` are located on a grid
    and refined by bisection to ``resolution`` relative to the interval.
    """
    gamma = check_scalar(gamma, "gamma", min_val=0.0, include_min=False)
    if isinstance(kernels, KernelSpec):
        base = kernels
        kernels = (lambda n: base) if base.is_limit else base.with_n
    out = []
    for n in n_grid:
        k = kernels(int(n))
        lim = k.limit_kernel()
        L = float(n) ** -gamma

        def g(t):
            return _phi(k, t) - 0.5 * _phi(lim, t)

        # geometric grid resolves crossings close to the origin
        grid = np.concatenate([np.geomspace(L * 1e-14, L, samples)])
        gv = g(grid)
        inside = gv >= 0
        measure = 0.0
        start = 0.0 if inside[0] else None
        for i in range(1, grid.size):
            if inside[i] != inside[i - 1]:
                lo, hi = grid[i - 1], grid[i]
                while hi - lo > resolution * L:
                    mid = 0.5 * (lo + hi)
                    if (g(np.float64(mid)) >= 0) == inside[i - 1]:
                        lo = mid
                    else:
                        hi = mid
                x = 0.5 * (lo + hi)
                if inside[i]:
                    start = x
                else:
                    measure += x - start
                    start = None
        if start is not None:
            measure += L - start
        out.append(measure / L)
    return np.array(out)
