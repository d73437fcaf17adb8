"""Power-law impact kernels ``phi_n`` and their limit ``phi_inf(t) = t**(H - 1/2)``.

Four families are supported:

* ``benchmark``  -- ``(1/n + t)**(H - 1/2)``
* ``shift``      -- ``(n**-alpha + t)**(H - 1/2)``
* ``optimized``  -- ``sqrt(phi_inf(t + eps)**2 + c1 * (phi_inf(t + eps)**2
  - phi_inf(2 eps)**2)_+)`` with ``eps = n**-beta``
* ``limit``      -- ``t**(H - 1/2)``

All kernels vanish for negative arguments, so convolutions can be written
without branching on the sign of ``t - tau``.
"""

import math
import numbers
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from ._validation import check_hurst, check_scalar
from .errors import ConfigError, DomainError
from . import quadrature


class Variant(str, Enum):
    BENCHMARK = "benchmark"
    OPTIMIZED = "optimized"
    SHIFT = "shift"
    LIMIT = "limit"


def c1_constant(hurst):
    """Mass-correction constant of the optimized kernel.

    ``c1 = (2**(2H) - 1 - 2**(2H) * H)**-1``.  The denominator vanishes at
    ``H = 1/2`` and is negative beyond, so only ``0 < H < 1/2`` is accepted.
    """
    h = check_scalar(hurst, "hurst", min_val=0.0, max_val=1.0, include_min=False)
    denom = 2.0 ** (2 * h) - 1.0 - 2.0 ** (2 * h) * h
    if h >= 0.5 or denom <= 0.0:
        raise DomainError(f"c1 is undefined (pole or negative) at hurst={h}")
    return 1.0 / denom


def c_hurst(hurst):
    """Mandelbrot-van Ness normalization ``(Gamma(2H+1) sin(pi H))**-1/2 Gamma(H+1/2)``."""
    h = check_hurst(hurst)
    return math.gamma(h + 0.5) / math.sqrt(math.gamma(2 * h + 1) * math.sin(math.pi * h))


def optimal_beta(hurst):
    """Shift exponent ``2 / (3 - 6H)`` that balances the error functionals."""
    return 2.0 / (3.0 - 6.0 * hurst)


@dataclass(frozen=True)
class KernelSpec:
    """One member of a kernel family.

    Parameters
    ----------
    hurst : float
        Hurst index in ``(0, 1/2]``.
    variant : Variant or str
    n : int
        Scale index (ignored by ``limit``).
    beta : float, optional
        Shift exponent of ``optimized``; defaults to ``2 / (3 - 6H)``.
    alpha : float, optional
        Shift exponent of ``shift``; required for that variant.
    """

    hurst: float
    variant: Variant = Variant.BENCHMARK
    n: int = 1
    beta: float = None
    alpha: float = None
    c1: float = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        set_ = object.__setattr__
        try:
            set_(self, "variant", Variant(self.variant))
        except ValueError:
            raise ConfigError(f"unknown kernel variant {self.variant!r}") from None
        opt = self.variant is Variant.OPTIMIZED
        set_(self, "hurst", check_hurst(self.hurst, allow_half=not opt))
        set_(self, "n", check_scalar(self.n, "n", kind=numbers.Integral, min_val=1))
        if opt:
            beta = optimal_beta(self.hurst) if self.beta is None else self.beta
            set_(self, "beta", check_scalar(beta, "beta", min_val=0.0, include_min=False))
            set_(self, "c1", c1_constant(self.hurst))
        if self.variant is Variant.SHIFT:
            if self.alpha is None:
                raise ConfigError("shift kernel needs alpha")
            set_(self, "alpha", check_scalar(self.alpha, "alpha", min_val=0.0,
                                             include_min=False))

    # constructors ---------------------------------------------------------
    @classmethod
    def benchmark(cls, hurst, n):
        return cls(hurst, Variant.BENCHMARK, n)

    @classmethod
    def optimized(cls, hurst, n, beta=None):
        return cls(hurst, Variant.OPTIMIZED, n, beta=beta)

    @classmethod
    def shifted(cls, hurst, n, alpha):
        return cls(hurst, Variant.SHIFT, n, alpha=alpha)

    @classmethod
    def limit(cls, hurst):
        return cls(hurst, Variant.LIMIT, 1)

    def with_n(self, n):
        return replace(self, n=n)

    def limit_kernel(self):
        return KernelSpec.limit(self.hurst)

    @property
    def is_limit(self):
        return self.variant is Variant.LIMIT

    @property
    def eps(self):
        """Regularizing shift: ``1/n``, ``n**-alpha``, ``n**-beta`` or 0."""
        v = self.variant
        if v is Variant.BENCHMARK:
            return 1.0 / self.n
        if v is Variant.SHIFT:
            return float(self.n) ** -self.alpha
        if v is Variant.OPTIMIZED:
            return float(self.n) ** -self.beta
        return 0.0

    @property
    def kinks(self):
        """Points where the kernel is not differentiable (besides 0)."""
        return (self.eps,) if self.variant is Variant.OPTIMIZED else ()

    # evaluation -----------------------------------------------------------
    def __call__(self, t):
        return eval_kernel(self, t)

    def derivative(self, t):
        """Vectorized derivative (right limit at kinks); requires ``t > 0``."""
        t = np.asarray(t, dtype=float)
        if np.any(~np.isfinite(t)) or np.any(t <= 0):
            raise DomainError("kernel derivative needs finite t > 0")
        return _dphi(self, t)

    # config ---------------------------------------------------------------
    def to_config(self, prefix="kernel"):
        cfg = {f"{prefix}.variant": self.variant.value, f"{prefix}.hurst": self.hurst}
        if not self.is_limit:
            cfg[f"{prefix}.n"] = self.n
        if self.variant is Variant.OPTIMIZED:
            cfg[f"{prefix}.beta"] = self.beta
        if self.variant is Variant.SHIFT:
            cfg[f"{prefix}.alpha"] = self.alpha
        return cfg

    @classmethod
    def from_config(cls, cfg, prefix="kernel", n=None):
        def get(key, conv, default=None):
            raw = cfg.get(f"{prefix}.{key}", default)
            if raw is None:
                return None
            try:
                return conv(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {prefix}.{key}: {raw!r}") from None

        variant = get("variant", str, "benchmark")
        hurst = get("hurst", float)
        if hurst is None:
            raise ConfigError(f"{prefix}.hurst is required")
        n_val = n if n is not None else get("n", lambda s: int(float(s)), 1)
        return cls(hurst, variant, n_val, beta=get("beta", float), alpha=get("alpha", float))


def _phi(spec, t):
    """Kernel on an array of strictly positive (or, for non-limit, >= 0) t."""
    h = spec.hurst
    v = spec.variant
    if v is Variant.LIMIT:
        return t ** (h - 0.5)
    eps = spec.eps
    x = t + eps
    if v is not Variant.OPTIMIZED:
        return x ** (h - 0.5)
    sq = x ** (2 * h - 1)
    corr = spec.c1 * np.maximum(sq - (2 * eps) ** (2 * h - 1), 0.0)
    return np.sqrt(sq + corr)


def _dphi(spec, t):
    h = spec.hurst
    v = spec.variant
    if v is Variant.LIMIT:
        return (h - 0.5) * t ** (h - 1.5)
    eps = spec.eps
    x = t + eps
    if v is not Variant.OPTIMIZED:
        return (h - 0.5) * x ** (h - 1.5)
    inner = t < eps
    factor = np.where(inner, 1.0 + spec.c1, 1.0)
    return (2 * h - 1) * factor * x ** (2 * h - 2) / (2.0 * _phi(spec, t))


def eval_kernel(spec, t):
    """Evaluate ``phi`` at ``t`` (scalar or array); zero for ``t < 0``.

    Raises
    ------
    DomainError
        For non-finite ``t`` or ``t == 0`` with the limit kernel.
    """
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("kernel argument must be finite")
    pos = arr > 0
    if spec.is_limit and np.any(arr == 0):
        raise DomainError("limit kernel has a pole at t = 0")
    if not spec.is_limit:
        pos = arr >= 0
    out = np.zeros_like(arr)
    out[pos] = _phi(spec, arr[pos])
    return float(out) if out.ndim == 0 else out


class KernelDerivative(NamedTuple):
    value: float
    one_sided: bool  # True when evaluated at a kink (right-hand limit)


def eval_kernel_derivative(spec, t):
    """``d phi / dt`` at a scalar ``t > 0``; right limit at the optimized kink."""
    t = check_scalar(t, "t", min_val=0.0, include_min=False)
    at_kink = spec.variant is Variant.OPTIMIZED and t == spec.eps
    return KernelDerivative(float(_dphi(spec, np.float64(t))), bool(at_kink))


# --- assumption audit ---------------------------------------------------------


@dataclass
class AuditReport:
    """Numerical audit of the kernel regularity conditions.

    ``majorant_constant`` and ``derivative_constant`` are the smallest
    constants observed on the grid for items (i) and (ii).  Items (iii) and
    (iv) are reported along the ladder ``ns`` and must decrease.
    """

    spec: KernelSpec
    T: float
    theta: float
    majorant_constant: float
    derivative_constant: float
    ns: list
    continuity: list
    l2_distance: list
    passed: dict

    @property
    def ok(self):
        return all(self.passed.values())

    @property
    def violations(self):
        return [k for k, v in self.passed.items() if not v]


def _audit_grid(T, eps, size):
    fine = min(eps, T) * 1e-3 if eps > 0 else T * 1e-9
    g = np.geomspace(fine, T, size)
    return np.unique(np.concatenate(([0.0], g, [eps] if 0 < eps < T else [])))


def continuity_modulus(spec, T, h, *, levels=40, order=20):
    """``int_0^T |phi'(h + s) - phi'(s)| ds`` on a geometric grid near 0."""
    breaks = [0.0, T]
    for k in spec.kinks:
        breaks += [k, k - h]
    fine = min(h, spec.eps if spec.eps > 0 else h, T) / 64.0
    geo = np.geomspace(fine, T, levels)
    b = np.unique(np.clip(np.concatenate([breaks, geo]), 0.0, T))
    s, w = quadrature.composite(b, order)
    return float(np.sum(w * np.abs(_dphi(spec, s + h) - _dphi(spec, s))))


def l2_distance_to_limit(spec, T, *, order=12):
    """``int_0^T (phi_n(d) - phi_inf(d))**2 dd``."""
    lim = spec.limit_kernel()
    d, w = quadrature.graded_rule(T, power=1.0 / (2 * spec.hurst), order=order,
                                  levels=40, extra=np.array(spec.kinks))
    return float(np.sum(w * (_phi(spec, d) - _phi(lim, d)) ** 2))


def audit_kernel_assumptions(spec, T, theta, grid_size, *, ladder=4):
    """Check the four kernel regularity conditions numerically.

    Parameters
    ----------
    spec : KernelSpec
        A non-limit kernel.
    T : float
        Horizon.
    theta : float
        Continuity exponent, ``> 2``; shifts ``h`` range over ``(0, n**-theta]``.
    grid_size : int
        Points of the geometric audit grid (``>= 64``).
    ladder : int
        Items (iii)/(iv) are evaluated at ``n, 2n, ..., 2**(ladder-1) n``.
    """
    if spec.is_limit:
        raise DomainError("the limit kernel is not audited")
    T = check_scalar(T, "T", min_val=0.0, include_min=False)
    theta = check_scalar(theta, "theta", min_val=2.0, include_min=False)
    grid_size = check_scalar(grid_size, "grid_size", kind=numbers.Integral, min_val=64)
    h = spec.hurst
    t = _audit_grid(T, spec.eps, grid_size)
    phi = _phi(spec, t)
    ref = (1.0 / spec.n + t) ** (h - 0.5)
    tp = t[t > 0]
    dphi = _dphi(spec, tp)
    dref = (1.0 / spec.n + tp) ** (h - 1.5)
    maj = float(np.max(phi / ref))
    der = float(np.max(-dphi / dref))
    pos_ok = bool(np.all(phi >= 0) and np.all(np.diff(phi) <= 0))
    mono_ok = bool(np.all(dphi <= 0))

    ns = [spec.n * 2 ** k for k in range(ladder)]
    cont, l2 = [], []
    for n in ns:
        s = spec.with_n(n)
        hmax = float(n) ** -theta
        cont.append(max(continuity_modulus(s, T, hmax * f) for f in (1.0, 0.5, 0.25)))
        l2.append(l2_distance_to_limit(s, T))
    passed = {
        "majorant": pos_ok and math.isfinite(maj),
        "derivative": mono_ok and math.isfinite(der),
        "continuity": bool(np.all(np.diff(cont) < 0)),
        "l2_convergence": bool(np.all(np.diff(l2) < 0)),
    }
    return AuditReport(spec, T, theta, maj, der, ns, cont, l2, passed)
