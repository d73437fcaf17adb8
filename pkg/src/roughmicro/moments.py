"""Integer price moments via the I/J word expansion.

Applying Ito's formula to ``P^k F(V_t1, ..., V_tm)`` with ``F`` of exponential
form produces two kinds of terms.  The leverage term (letter ``I``) lowers the
power by one and contributes ``rho sigma_p sigma_v k e^{y} sum_j a_j
phi(t_j - s)``; the variance term (letter ``J``) lowers it by two and
contributes ``sigma_p^2 k (k-1) / 2 e^{2y}``.  Iterating down to power zero
gives

    E[P_T^N] = sum_{l(w) = N} sum_terms c * int_{T > t_1 > ... > t_m > 0}
               E[exp(sum_i a_i V_{t_i})] prod_{I-variables i} phi(t_{alpha(i)} - t_i) dt

The letters of a word are applied right to left, so variable ``i`` (the
``i``-th largest time) is created by letter ``w[m - i]``.
"""

import math
from functools import lru_cache
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import quadrature
from ._validation import check_scalar
from .errors import AccuracyError, ConfigError, ContractError, DomainError, SizeLimitError
from .functionals import limit_covariance
from .kernels import KernelSpec, _phi
from .microsim import prelimit_exp_functional_batch

MAX_WORD_LENGTH = 8
MAX_MOMENT = 6
_LETTER_LENGTH = {"I": 1, "J": 2}
# points per vectorized quadrature chunk
_CHUNK = 1 << 18


@dataclass(frozen=True)
class Word:
    letters: str

    def __post_init__(self):
        if set(self.letters) - set("IJ"):
            raise DomainError(f"words use letters I and J only, got {self.letters!r}")

    @property
    def length(self):
        """Inhomogeneous length: I counts 1, J counts 2."""
        return sum(_LETTER_LENGTH[c] for c in self.letters)

    @property
    def size(self):
        return len(self.letters)

    @property
    def vanishing(self):
        # the first operator applied is the last letter; I on a constant is 0
        return not self.letters or self.letters[-1] == "I"

    def __str__(self):
        return self.letters


@dataclass(frozen=True)
class MomentTerm:
    """``coefficient * E[exp(a . V)] * prod phi(t_alpha(i) - t_i)``.

    ``alpha[i]`` is the (1-based) target of variable ``i + 1``; 0 marks a
    variable created by ``J``, which carries no kernel factor.
    """

    coefficient: float
    exponents: tuple
    alpha: tuple
    word: Word

    @property
    def kernel_factors(self):
        return tuple((a, i + 1) for i, a in enumerate(self.alpha) if a > 0)


def _shortlex(words):
    return sorted(words, key=lambda w: (len(w), w))


def enumerate_words(N):
    """Non-vanishing words of inhomogeneous length ``N`` in shortlex order."""
    N = check_scalar(N, "N", kind=int, min_val=0)
    if N > MAX_WORD_LENGTH:
        raise SizeLimitError(f"N={N} exceeds the supported maximum {MAX_WORD_LENGTH}")
    found = []

    def grow(prefix, remaining):
        if remaining == 0:
            if prefix and prefix[-1] == "J":
                found.append(prefix)
            return
        for c in "IJ":
            if _LETTER_LENGTH[c] <= remaining:
                grow(prefix + c, remaining - _LETTER_LENGTH[c])

    grow("", N)
    return [Word(w) for w in _shortlex(found)]


def expand_word(w, N, sigmas):
    """Expand ``iota(w) 1`` into :class:`MomentTerm` objects.

    ``sigmas = (sigma_p, sigma_v, rho)``.  Raises :class:`ContractError` when
    the word length differs from ``N``.
    """
    if not isinstance(w, Word):
        w = Word(str(w))
    if w.length != N:
        raise ContractError(f"word {w} has length {w.length}, expected {N}")
    sigma_p, sigma_v, rho = sigmas
    lev = rho * sigma_p * sigma_v
    terms = [(1.0, (), ())]
    k = N
    for letter in reversed(w.letters):
        if letter == "J":
            f = sigma_p ** 2 * k * (k - 1) / 2.0
            terms = [(c * f, a + (2,), al + (0,)) for c, a, al in terms]
            k -= 2
        else:
            terms = [(c * lev * k * a[j], a + (1,), al + (j + 1,))
                     for c, a, al in terms for j in range(len(a))]
            k -= 1
    return [MomentTerm(c, a, al, w) for c, a, al in terms]


def gaussian_exp_moment(cov, a):
    """``E[exp(a . X)] = exp(a^T cov a / 2)`` for centered Gaussian ``X``.

    ``cov`` may carry leading batch dimensions.
    """
    cov = np.asarray(cov, dtype=float)
    a = np.asarray(a, dtype=float)
    if cov.shape[-2:] != (a.size, a.size):
        raise DomainError(f"covariance shape {cov.shape} does not match {a.size} exponents")
    q = np.einsum("...ij,i,j->...", cov, a, a)
    out = np.exp(0.5 * q)
    return float(out) if out.ndim == 0 else out


def hermite4(x):
    """Probabilists' Hermite polynomial ``x^4 - 6 x^2 + 3``."""
    x = np.asarray(x, dtype=float)
    out = x ** 4 - 6.0 * x ** 2 + 3.0
    return float(out) if out.ndim == 0 else out


# --- models ------------------------------------------------------------------------------


class ModelKind(str, Enum):
    LIMIT = "limit"
    APPROX = "approx"
    PRELIMIT = "prelimit"


@dataclass(frozen=True)
class MomentModel:
    """Which volatility drives the moment formula.

    ``limit``: ``phi_inf`` kernel, closed-form covariance.  ``approx``: Gaussian
    volatility with covariance ``C_n``.  ``prelimit``: Poisson volatility with
    Gaussian marks, pre-zero window of length ``pre_horizon``.  ``pre_zero``
    switches the impact of the infinite past on or off for all three.
    """

    kind: ModelKind
    kernel: KernelSpec
    pre_zero: bool = True
    pre_horizon: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.kind is ModelKind.LIMIT:
            object.__setattr__(self, "kernel", self.kernel.limit_kernel())
        elif self.kernel.is_limit:
            raise ConfigError(f"{self.kind.value} model needs a regularized kernel")

    @classmethod
    def limit(cls, hurst, pre_zero=True):
        return cls(ModelKind.LIMIT, KernelSpec.limit(hurst), pre_zero)

    @classmethod
    def approx(cls, kernel, pre_zero=True):
        return cls(ModelKind.APPROX, kernel, pre_zero)

    @classmethod
    def prelimit(cls, kernel, pre_zero=True, pre_horizon=math.inf):
        return cls(ModelKind.PRELIMIT, kernel, pre_zero, pre_horizon)


@dataclass
class MomentResult:
    value: float
    quadrature_error: float
    term_count: int
    N: int
    model: str

    def as_dict(self):
        return {"N": self.N, "model": self.model, "value": self.value,
                "quadrature_error": self.quadrature_error, "term_count": self.term_count}


# --- simplex quadrature ------------------------------------------------------------------


_ORDER = 4


def _rule_shape(nodes):
    # two-sided graded rule: 2 * (levels + 1) * order nodes per simplex level
    levels = max(nodes // (2 * _ORDER) - 1, 0)
    return levels, _ORDER


@lru_cache(maxsize=256)
def _unit_level_rule(hurst, nodes, singular):
    """Rule on the gap ``d in (0, 1)``, graded geometrically towards both ends.

    When the integrand carries ``phi_inf(d) = d**(H - 1/2)`` the upper-end half
    uses ``d = u**(1 / (H + 1/2))``, which turns that factor into a bounded
    one; otherwise no substitution is made (it would spoil smooth integrands).
    """
    levels, order = _rule_shape(nodes)
    power = 1.0 / (hurst + 0.5) if singular else 1.0
    return quadrature.two_sided_rule(1.0, power=power, levels=levels, order=order)


def _level_rule(length, hurst, nodes, singular):
    x, w = _unit_level_rule(float(hurst), int(nodes), bool(singular))
    length = np.asarray(length, dtype=float)[..., None]
    return length * x, length * w


def _signature(term):
    # levels whose kernel factor is singular at the upper end of their range
    return tuple(a > 0 and a == i for i, a in enumerate(term.alpha))


def _simplex_points(T, m, hurst, nodes, signature=None):
    """Yield chunks ``(times (P, m), weights (P,))`` of the nested simplex rule.

    Level ``i`` integrates ``t_i`` over ``(0, t_{i-1})`` with ``t_0 = T``.
    """
    signature = signature or (False,) * m

    def expand(t, w):
        level = t.shape[1] - 1
        d, wd = _level_rule(t[:, -1], hurst, nodes, signature[level])
        new_t = t[:, -1:] - d
        k = d.shape[-1]
        t2 = np.concatenate([np.repeat(t, k, axis=0), new_t.reshape(-1, 1)], axis=1)
        return t2, (w[:, None] * wd).ravel()

    def rec(t, w):
        if t.shape[1] == m + 1:
            yield t[:, 1:], w
            return
        if t.shape[0] * nodes > _CHUNK:
            step = max(_CHUNK // nodes, 1)
            for lo in range(0, t.shape[0], step):
                yield from rec(t[lo:lo + step], w[lo:lo + step])
            return
        yield from rec(*expand(t, w))

    yield from rec(np.full((1, 1), float(T)), np.ones(1))


def _exp_moment(model, a, t, sigma_v):
    if model.kind is ModelKind.LIMIT:
        # only the upper triangle is evaluated (the one-sided form is costly)
        h = model.kernel.hurst
        m = a.size
        q = np.zeros(t.shape[0])
        for i in range(m):
            q += a[i] ** 2 * limit_covariance(h, t[:, i], t[:, i], model.pre_zero)
            for j in range(i + 1, m):
                q += 2 * a[i] * a[j] * limit_covariance(h, t[:, i], t[:, j], model.pre_zero)
        return np.exp(0.5 * sigma_v ** 2 * q)
    S = (model.pre_horizon if model.kind is ModelKind.PRELIMIT else math.inf) \
        if model.pre_zero else 0.0
    return prelimit_exp_functional_batch(model.kernel, a, t, sigma_v, S,
                                         gaussian=model.kind is ModelKind.APPROX)


def _word_integral(terms, model, T, sigma_v, nodes):
    m = len(terms[0].exponents)
    a = np.array(terms[0].exponents, dtype=float)
    kernel = model.kernel
    groups = {}
    for term in terms:
        groups.setdefault(_signature(term), []).append(term)
    total = 0.0
    for signature, group in groups.items():
        for t, w in _simplex_points(T, m, kernel.hurst, nodes, signature):
            ew = _exp_moment(model, a, t, sigma_v)
            acc = np.zeros(t.shape[0])
            for term in group:
                prod = np.full(t.shape[0], term.coefficient)
                for tgt, i in term.kernel_factors:
                    prod *= _phi(kernel, t[:, tgt - 1] - t[:, i - 1])
                acc += prod
            total += float(np.sum(w * ew * acc))
    return total


def _moment_sum(N, model, sigma_p, sigma_v, rho, T, nodes):
    value, count = 0.0, 0
    for w in enumerate_words(N):
        terms = [t for t in expand_word(w, N, (sigma_p, sigma_v, rho)) if t.coefficient != 0]
        count += len(terms)
        if terms:
            value += _word_integral(terms, model, T, sigma_v, nodes)
    return value, count


def moment_value(N, model, sigma_p, sigma_v, rho, T=1.0, *, nodes=32, check_nodes=48,
                 tol=None):
    """``E[P_T^N]`` from the word expansion with nested simplex quadrature.

    The quadrature error indicator is the difference between the ``nodes``
    and ``check_nodes`` rules (per simplex level); the finer value is
    returned.  When ``tol`` is given and the indicator exceeds it, an
    :class:`AccuracyError` carrying the partial result is raised.
    """
    N = check_scalar(N, "N", kind=int, min_val=0)
    if N > MAX_MOMENT:
        raise SizeLimitError(f"moment order {N} exceeds {MAX_MOMENT}")
    T = check_scalar(T, "T", min_val=0.0)
    if N == 0:
        return MomentResult(1.0, 0.0, 0, 0, model.kind.value)
    coarse, count = _moment_sum(N, model, sigma_p, sigma_v, rho, T, nodes)
    fine, _ = _moment_sum(N, model, sigma_p, sigma_v, rho, T, check_nodes)
    err = abs(fine - coarse)
    if tol is not None and err > tol:
        raise AccuracyError(f"moment quadrature did not converge: {err:.2e} > {tol:.1e}",
                            partial=fine, error=err)
    return MomentResult(fine, err, count, N, model.kind.value)


def hermite4_expectation(model, sigma_p, sigma_v, rho, T=1.0, **kw):
    """``E[H4(P_T)] = E[P^4] - 6 E[P^2] + 3`` with a combined error indicator."""
    m4 = moment_value(4, model, sigma_p, sigma_v, rho, T, **kw)
    m2 = moment_value(2, model, sigma_p, sigma_v, rho, T, **kw)
    return (m4.value - 6.0 * m2.value + 3.0, m4.quadrature_error + 6.0 * m2.quadrature_error)
