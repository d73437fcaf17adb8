"""Reference simulation of the Gaussian (rough Bergomi type) models.

The log-volatility on an equidistant grid and the Brownian increments driving
the price are sampled jointly and exactly from their Gaussian law; only the
price integral is discretized (left-point Euler rule).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg

from . import quadrature
from ._validation import check_random_state, check_scalar
from .errors import ConfigError, FactorizationError
from .functionals import covariance_matrix_values, limit_covariance
from .kernels import KernelSpec, _phi
from .rng import block_ranges, stream

MAX_GRID = 4096
_JITTER_TRIES = 3


class GaussianVariant(str, Enum):
    TWO_SIDED = "two-sided"
    RIEMANN_LIOUVILLE = "rl"


@dataclass(frozen=True)
class GaussianModelSpec:
    """Gaussian log-volatility ``sigma_v int phi(t - r) dB_r`` and price driver ``W``.

    ``corr(dB, dW) = rho``.  ``kernel`` is the limit kernel for the true model
    and a regularized kernel for the approximate model.  The two-sided variant
    integrates ``phi(t - r) - phi(-r)`` over the whole past.
    """

    hurst: float
    sigma_p: float = 1.0
    sigma_v: float = 1.0
    rho: float = 0.0
    variant: GaussianVariant = GaussianVariant.TWO_SIDED
    kernel: KernelSpec = None
    grid_size: int = 1000
    T: float = 1.0

    def __post_init__(self):
        set_ = object.__setattr__
        try:
            set_(self, "variant", GaussianVariant(self.variant))
        except ValueError:
            raise ConfigError(f"unknown Gaussian variant {self.variant!r}") from None
        if self.kernel is None:
            set_(self, "kernel", KernelSpec.limit(self.hurst))
        if abs(self.kernel.hurst - self.hurst) > 0:
            raise ConfigError("kernel and model Hurst indices differ")
        set_(self, "grid_size", check_scalar(self.grid_size, "grid_size", kind=int, min_val=1,
                                             max_val=MAX_GRID, error=ConfigError))
        set_(self, "T", check_scalar(self.T, "T", min_val=0.0, include_min=False))
        set_(self, "rho", check_scalar(self.rho, "rho", min_val=-1.0, max_val=1.0))

    @property
    def pre_zero(self):
        return self.variant is GaussianVariant.TWO_SIDED

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.grid_size + 1)


def volatility_covariance(spec, t, s):
    """``Cov(V_t, V_s)`` (without the ``sigma_v**2`` factor)."""
    if spec.kernel.is_limit:
        return limit_covariance(spec.hurst, t, s, spec.pre_zero)
    return covariance_matrix_values(spec.kernel, t, s, spec.pre_zero)


def kernel_primitive(kernel, t, upper):
    """``int_0^upper phi(t - r) dr`` for ``0 <= upper <= t`` (vectorized)."""
    t, upper = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(upper, dtype=float))
    h = kernel.hurst
    if kernel.is_limit:
        return (t ** (h + 0.5) - (t - upper) ** (h + 0.5)) / (h + 0.5)
    # integrate phi over d in [t - upper, t]
    lo = t - upper
    d, w = quadrature.graded_rule(upper, power=1.0, levels=30, order=10,
                                  extra=np.array([kernel.eps]) - lo[..., None])
    return np.sum(w * _phi(kernel, lo[..., None] + d), axis=-1)


def build_joint_covariance(spec):
    """Covariance of ``(V_{t_1}, ..., V_{t_K}, dW_1, ..., dW_K)``.

    ``t_i = i T / K``; the value at ``t_0 = 0`` is identically zero and is
    left out.  ``dW_k = W_{t_k} - W_{t_{k-1}}``.
    """
    K = spec.grid_size
    t = spec.times[1:]
    cvv = spec.sigma_v ** 2 * volatility_covariance(spec, t[:, None], t[None, :])
    cvv = 0.5 * (cvv + cvv.T)
    # Cov(V_{t_i}, W_{t_j}) = rho sigma_v int_0^{min} phi(t_i - r) dr
    if spec.rho == 0 or spec.sigma_v == 0:
        cvw = np.zeros((K, K))
    else:
        edges = spec.times
        upper = np.minimum(t[:, None], edges[None, :])
        cw = spec.rho * spec.sigma_v * kernel_primitive(spec.kernel, t[:, None], upper)
        cvw = np.diff(cw, axis=1)
    dt = spec.T / K
    cov = np.empty((2 * K, 2 * K))
    cov[:K, :K] = cvv
    cov[:K, K:] = cvw
    cov[K:, :K] = cvw.T
    cov[K:, K:] = dt * np.eye(K)
    return cov


def factorize(cov):
    """Lower Cholesky factor, adding diagonal jitter ``1e-12 trace / K`` up to 3 times."""
    K = cov.shape[0]
    if not np.any(cov):
        # degenerate but valid: e.g. a volatility with sigma_v = 0
        return np.zeros_like(cov)
    jitter = 1e-12 * np.trace(cov) / K
    work = cov.copy()
    for attempt in range(_JITTER_TRIES + 1):
        try:
            return linalg.cholesky(work, lower=True)
        except linalg.LinAlgError:
            if attempt == _JITTER_TRIES:
                break
            work[np.diag_indices(K)] += jitter
    lam = float(linalg.eigvalsh(cov, subset_by_index=[0, 0])[0])
    raise FactorizationError(f"covariance is not positive definite (min eigenvalue {lam:.3e})",
                             lam)


@dataclass
class JointSampler:
    """Factorized joint law, conditioned on the Brownian increments.

    ``dW = sqrt(dt) z1`` and ``V = B z1 + L z2`` with ``B = Cov(V, dW) / sqrt(dt)``
    and ``L`` the Cholesky factor of the Schur complement ``Cov(V) - B B^T``.
    """

    spec: GaussianModelSpec
    cross: np.ndarray
    cond: np.ndarray

    @classmethod
    def from_spec(cls, spec):
        cov = build_joint_covariance(spec)
        K = spec.grid_size
        root_dt = math.sqrt(spec.T / K)
        cross = cov[:K, K:] / root_dt
        schur = cov[:K, :K] - cross @ cross.T
        return cls(spec, cross, factorize(0.5 * (schur + schur.T)))

    def sample(self, random_state, count, antithetic=False):
        """Return ``(vpaths, dW)``; ``vpaths`` includes the zero at ``t = 0``.

        With ``antithetic`` the second half of the ensemble is the negation of
        the first (``count`` must then be even).
        """
        return sample_joint_paths(self, random_state, count, antithetic)


def sample_joint_paths(sampler, random_state, count, antithetic=False):
    """Exact joint draws of volatility paths and Brownian increments."""
    if not isinstance(sampler, JointSampler):
        sampler = JointSampler.from_spec(sampler)
    count = check_scalar(count, "count", kind=int, min_val=1)
    rng = check_random_state(random_state)
    spec = sampler.spec
    K = spec.grid_size
    if antithetic:
        if count % 2:
            raise ConfigError("antithetic sampling needs an even count")
        z = rng.standard_normal((count // 2, 2 * K))
        z = np.concatenate([z, -z])
    else:
        z = rng.standard_normal((count, 2 * K))
    z1, z2 = z[:, :K], z[:, K:]
    v = z1 @ sampler.cross.T + z2 @ sampler.cond.T
    vpaths = np.concatenate([np.zeros((count, 1)), v], axis=1)
    return vpaths, math.sqrt(spec.T / K) * z1


def euler_price(vpath, dW, sigma_p):
    """Left-point rule ``sigma_p sum_k exp(V_{t_k}) dW_k`` (works on batches)."""
    vpath = np.asarray(vpath, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if vpath.shape[-1] == dW.shape[-1] + 1:
        vpath = vpath[..., :-1]
    if vpath.shape != dW.shape:
        raise ConfigError(f"path/increment shapes differ: {vpath.shape} vs {dW.shape}")
    return sigma_p * np.sum(np.exp(vpath) * dW, axis=-1)


def euler_terminal_prices(spec, master_seed, count, *, block=2000, tag=0):
    """``count`` Euler prices at ``T`` drawn block by block from seeded streams."""
    sampler = JointSampler.from_spec(spec)
    out = np.empty(count)
    for b, (lo, hi) in enumerate(block_ranges(count, block)):
        v, dw = sampler.sample(stream(master_seed, tag, b), hi - lo)
        out[lo:hi] = euler_price(v, dw, spec.sigma_p)
    return out
