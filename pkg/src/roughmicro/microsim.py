"""Event-driven simulation of the Poisson microstructure model.

Orders arrive at rate ``n``; order ``k`` carries marks ``(u_k, v_k)``.  The
rescaled log-volatility and log-price are

    V_t = sum_{0 < tau_k <= t} phi_n(t - tau_k) v_k / sqrt(n)
          + sum_{-S <= tau_k <= 0} (phi_n(t - tau_k) - phi_n(-tau_k)) v_k / sqrt(n)
    P_t = sum_{0 < tau_k <= t} exp(V_{tau_k-}) u_k / sqrt(n)

where the left limit ``V_{tau_k-}`` leaves out the order's own impact.  All
sums are evaluated exactly over events (O(K^2) for K arrivals) by the numba
kernels below.
"""

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate

from . import quadrature
from ._validation import check_random_state, check_scalar, check_times
from .errors import ConfigError, DomainError, UnsupportedLawError
from .kernels import KernelSpec, Variant, _phi
from .marklaws import Family, _draw_marks
from .rng import stream

_EMPTY = np.zeros(0)

# the bundled TBB is often too old; the portable layer avoids a noisy probe
numba.config.THREADING_LAYER = "workqueue"


@dataclass
class EventStream:
    """Poisson arrivals on ``(0, T]`` and, optionally, on ``[-S, 0]``.

    ``pre_arrivals`` are sorted in decreasing order (most recent first).
    """

    arrivals: np.ndarray
    u: np.ndarray
    v: np.ndarray
    rate: int
    horizon: float
    pre_arrivals: np.ndarray = field(default_factory=lambda: _EMPTY.copy())
    pre_u: np.ndarray = field(default_factory=lambda: _EMPTY.copy())
    pre_v: np.ndarray = field(default_factory=lambda: _EMPTY.copy())
    pre_horizon: float = 0.0

    @property
    def count(self):
        return self.arrivals.size

    def insert(self, tau, u, v):
        """Return a copy with one extra event (used to probe causality)."""
        if tau > 0:
            k = int(np.searchsorted(self.arrivals, tau))
            return EventStream(np.insert(self.arrivals, k, tau), np.insert(self.u, k, u),
                               np.insert(self.v, k, v), self.rate, self.horizon,
                               self.pre_arrivals, self.pre_u, self.pre_v, self.pre_horizon)
        k = int(np.searchsorted(-self.pre_arrivals, -tau))
        return EventStream(self.arrivals, self.u, self.v, self.rate, self.horizon,
                           np.insert(self.pre_arrivals, k, tau), np.insert(self.pre_u, k, u),
                           np.insert(self.pre_v, k, v), self.pre_horizon)


@dataclass
class PathGrid:
    times: np.ndarray
    log_vol: np.ndarray
    log_price: np.ndarray
    left_limits_at_jumps: np.ndarray


def simulate_events(n, T, S, law, random_state):
    """Draw an :class:`EventStream` with intensity ``n``.

    Arrival counts are Poisson(n T) and Poisson(n S); given the counts, times
    are i.i.d. uniform.  Draw order is fixed (count, times, marks; then the
    pre-zero window) so a stream is a deterministic function of the seed.
    """
    n = check_scalar(n, "n", kind=int, min_val=1)
    T = check_scalar(T, "T", min_val=0.0)
    S = check_scalar(S, "S", min_val=0.0)
    return _draw_events(check_random_state(random_state), n, T, S, law)


def _draw_events(rng, n, T, S, law):
    k = int(rng.poisson(n * T))
    # 1 - U lies in (0, 1], so arrivals land in (0, T]
    arrivals = np.sort(T * (1.0 - rng.random(k)))
    u, v = _draw_marks(law, rng, k)
    ev = EventStream(arrivals, u, v, n, T, pre_horizon=S)
    if S > 0:
        kp = int(rng.poisson(n * S))
        ev.pre_arrivals = -np.sort(S * rng.random(kp))
        ev.pre_u, ev.pre_v = _draw_marks(law, rng, kp)
    return ev


_CRN_CHUNK = 256


def _rescaled_times(rng, law, rate_horizon):
    # unit-rate arrivals with marks, drawn in fixed-size chunks so that the
    # k-th event is the same for every rate
    gaps, us, vs = [], [], []
    total = 0.0
    while total <= rate_horizon:
        g = rng.standard_exponential(_CRN_CHUNK)
        u, v = _draw_marks(law, rng, _CRN_CHUNK)
        gaps.append(g)
        us.append(u)
        vs.append(v)
        total += g.sum()
    cum = np.cumsum(np.concatenate(gaps))
    k = int(np.searchsorted(cum, rate_horizon, side="right"))
    return cum[:k], np.concatenate(us)[:k], np.concatenate(vs)[:k]


def draw_events_rescaled(post_rng, pre_rng, n, T, S, law):
    """Event stream of rate ``n`` from shared unit-rate streams.

    The k-th arrival after (before) zero is ``E_k / n`` (``-E'_k / n``) for
    cumulative unit exponentials ``E``, and carries the k-th mark, so
    streams for different ``n`` are coupled (common random numbers).
    """
    unit, u, v = _rescaled_times(post_rng, law, n * T)
    ev = EventStream(unit / n, u, v, n, T, pre_horizon=S)
    if S > 0:
        unit, pu, pv = _rescaled_times(pre_rng, law, n * S)
        ev.pre_arrivals, ev.pre_u, ev.pre_v = -unit / n, pu, pv
    return ev


# --- compiled kernels ----------------------------------------------------------------

_CODES = {Variant.BENCHMARK: 0, Variant.SHIFT: 0, Variant.OPTIMIZED: 1}


def _kernel_params(kernel):
    if kernel.is_limit:
        raise DomainError("the event model needs a regularized kernel (not limit)")
    code = _CODES[kernel.variant]
    eps = kernel.eps
    c1 = kernel.c1 if code == 1 else 0.0
    floor = (2 * eps) ** (2 * kernel.hurst - 1) if code == 1 else 0.0
    return np.array([kernel.hurst, code, eps, c1, floor])


def _check_rate(ev, kernel):
    if kernel.is_limit:
        raise DomainError("the event model needs a regularized kernel (not limit)")
    if kernel.n != ev.rate:
        raise ConfigError(f"kernel index n={kernel.n} does not match stream rate {ev.rate}")


@numba.njit(cache=True, fastmath=True)
def _phi1(x, p):
    if x < 0.0:
        return 0.0
    y = x + p[2]
    if p[1] == 0.0 or x >= p[2]:
        # beyond the shift the optimized kernel is the plain shifted power
        return y ** (p[0] - 0.5)
    sq = y ** (2.0 * p[0] - 1.0)
    d = sq - p[4]
    if d > 0.0:
        sq += p[3] * d
    return math.sqrt(sq)


@numba.njit(cache=True)
def _pre_sum(t, pre, pre_v, p):
    acc = 0.0
    for j in range(pre.size):
        acc += (_phi1(t - pre[j], p) - _phi1(-pre[j], p)) * pre_v[j]
    return acc


@numba.njit(cache=True)
def _logvol_grid(times, arr, v, pre, pre_v, p, scale):
    out = np.empty(times.size)
    for g in range(times.size):
        t = times[g]
        acc = 0.0
        for j in range(arr.size):
            if arr[j] > t:
                break
            acc += _phi1(t - arr[j], p) * v[j]
        out[g] = (acc + _pre_sum(t, pre, pre_v, p)) * scale
    return out


@numba.njit(cache=True)
def _left_limits(arr, v, pre, pre_v, p, scale):
    out = np.empty(arr.size)
    for k in range(arr.size):
        t = arr[k]
        acc = 0.0
        for j in range(k):
            acc += _phi1(t - arr[j], p) * v[j]
        out[k] = (acc + _pre_sum(t, pre, pre_v, p)) * scale
    return out


@numba.njit(cache=True, parallel=True, fastmath=True)
def _terminal_batch(offs, arr, u, v, poffs, pre, pre_v, p, scale, out_p, out_v, T,
                    with_price):
    # one replication per slot; events of replication r live in offs[r]:offs[r+1]
    for r in numba.prange(offs.size - 1):
        a, b = offs[r], offs[r + 1]
        pa, pb = poffs[r], poffs[r + 1]
        price = 0.0
        for k in range(a, b if with_price else a):
            t = arr[k]
            acc = 0.0
            for j in range(a, k):
                acc += _phi1(t - arr[j], p) * v[j]
            for j in range(pa, pb):
                acc += (_phi1(t - pre[j], p) - _phi1(-pre[j], p)) * pre_v[j]
            price += math.exp(acc * scale) * u[k]
        out_p[r] = price * scale
        acc = 0.0
        for j in range(a, b):
            acc += _phi1(T - arr[j], p) * v[j]
        for j in range(pa, pb):
            acc += (_phi1(T - pre[j], p) - _phi1(-pre[j], p)) * pre_v[j]
        out_v[r] = acc * scale


# --- public evaluation ------------------------------------------------------------------


def eval_logvol(ev, kernel, times):
    """Right-continuous log-volatility at ``times`` (an event at ``t`` counts)."""
    _check_rate(ev, kernel)
    times = check_times(times, "times")
    flat = np.ascontiguousarray(times.ravel())
    vals = _logvol_grid(flat, ev.arrivals, ev.v, ev.pre_arrivals, ev.pre_v,
                        _kernel_params(kernel), 1.0 / math.sqrt(ev.rate))
    return vals.reshape(times.shape)


def left_limits(ev, kernel):
    """``V_{tau_k-}`` at every arrival: own impact excluded, pre-zero included."""
    _check_rate(ev, kernel)
    return _left_limits(ev.arrivals, ev.v, ev.pre_arrivals, ev.pre_v,
                        _kernel_params(kernel), 1.0 / math.sqrt(ev.rate))


def simulate_price_path(ev, kernel, grid):
    """Sample ``(V, P)`` on ``grid``; the price is exact between arrivals."""
    grid = check_times(grid, "grid")
    left = left_limits(ev, kernel)
    jumps = np.exp(left) * ev.u / math.sqrt(ev.rate)
    cum = np.concatenate(([0.0], np.cumsum(jumps)))
    idx = np.searchsorted(ev.arrivals, grid, side="right")
    return PathGrid(grid, eval_logvol(ev, kernel, grid), cum[idx], left)


def terminal_values(kernel, law, T, S, master_seed, indices, *tags, with_price=True,
                    common=False):
    """Terminal ``(P_T, V_T)`` for the replications in ``indices``.

    Replication ``i`` uses the stream addressed by ``(master_seed, *tags, i)``,
    so the result for a given index does not depend on batching.  The price
    costs ``O(K**2)`` per path with ``K`` arrivals; ``with_price=False`` skips
    it (zeros are returned) and keeps only the ``O(K)`` log-volatility.
    With ``common`` the events come from :func:`draw_events_rescaled`, so a
    replication index sees the same marks for every ``n``.
    """
    n = kernel.n
    T = check_scalar(T, "T", min_val=0.0)
    S = check_scalar(S, "S", min_val=0.0)
    arr, us, vs, pre, pus, pvs = [], [], [], [], [], []
    for i in indices:
        if common:
            ev = draw_events_rescaled(stream(master_seed, *tags, i, 0),
                                      stream(master_seed, *tags, i, 1), n, T, S, law)
        else:
            ev = _draw_events(stream(master_seed, *tags, i), n, T, S, law)
        arr.append(ev.arrivals)
        us.append(ev.u)
        vs.append(ev.v)
        pre.append(ev.pre_arrivals)
        pus.append(ev.pre_u)
        pvs.append(ev.pre_v)
    count = len(arr)
    offs = np.zeros(count + 1, dtype=np.int64)
    offs[1:] = np.cumsum([a.size for a in arr])
    poffs = np.zeros(count + 1, dtype=np.int64)
    poffs[1:] = np.cumsum([a.size for a in pre])
    cat = lambda xs: np.concatenate(xs) if xs else _EMPTY
    out_p = np.empty(count)
    out_v = np.empty(count)
    _terminal_batch(offs, cat(arr), cat(us), cat(vs), poffs, cat(pre), cat(pvs),
                    _kernel_params(kernel), 1.0 / math.sqrt(n), out_p, out_v, float(T),
                    bool(with_price))
    return out_p, out_v


# --- exponential functional --------------------------------------------------------------


def _require_gaussian(law):
    if law.family is not Family.GAUSSIAN:
        raise UnsupportedLawError("closed-form mark integral needs Gaussian marks")


def _prepare(kernel, coeffs, times):
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    t = np.atleast_1d(check_times(times, "times"))
    if c.shape != t.shape:
        raise DomainError("coeffs and times must have the same length")
    if np.any(np.diff(t) > 0) or np.any(t < 0):
        raise DomainError("times must be nonnegative and sorted in descending order")
    if kernel.is_limit:
        raise DomainError("the event model needs a regularized kernel (not limit)")
    return c, t


def prelimit_exp_functional(kernel, coeffs, times, law, pre_horizon=0.0, *, tol=1e-10):
    """``E[exp(sum_j c_j V_{t_j})]`` under the Poisson model, by adaptive quadrature.

    With Gaussian volatility marks the mark integral is explicit, leaving
    ``exp(int n (exp(sigma_v^2 A(s)^2 / (2n)) - 1) ds)`` over the post- and
    pre-zero windows.  ``pre_horizon`` may be ``inf``.
    """
    _require_gaussian(law)
    c, t = _prepare(kernel, coeffs, times)
    S = check_scalar(pre_horizon, "pre_horizon", min_val=0.0) if math.isfinite(
        pre_horizon) else math.inf
    n, sv2 = kernel.n, law.sigma_v ** 2
    phi = lambda x: _phi(kernel, np.maximum(x, 0.0)) * (x >= 0)

    def post(s):
        a = float(np.dot(c, phi(t - s)))
        return n * math.expm1(sv2 * a * a / (2 * n))

    def pre(x):
        b = float(np.dot(c, phi(t + x) - phi(np.float64(x))))
        return n * math.expm1(sv2 * b * b / (2 * n))

    total = 0.0
    if t[0] > 0:
        pts = sorted({p for p in np.concatenate([t, t - kernel.eps]) if 0 < p < t[0]})
        total += integrate.quad(post, 0.0, t[0], points=pts or None, epsabs=tol,
                                epsrel=1e-12, limit=500)[0]
    if S > 0 and t[0] > 0:
        cut = min(S, 10.0 * t[0])
        pts = [p for p in (kernel.eps,) if 0 < p < cut]
        total += integrate.quad(pre, 0.0, cut, points=pts or None, epsabs=tol,
                                epsrel=1e-12, limit=500)[0]
        if S > cut:
            total += integrate.quad(pre, cut, S, epsabs=tol, epsrel=1e-12, limit=500)[0]
    return math.exp(total)


def _finite_tail_rule(start, stop, levels=12, order=8):
    # x = start / y with y in [start/stop, 1], geometric panels toward small y
    ymin = start / stop
    yb = np.geomspace(max(ymin, 1e-300), 1.0, levels + 1) if ymin > 0 else np.concatenate(
        ([0.0], np.geomspace(2.0 ** -levels, 1.0, levels)))
    y, wy = quadrature.composite(yb, order)
    return start / y, start / y ** 2 * wy


def prelimit_exp_functional_batch(kernel, coeffs, times, sigma_v, pre_horizon=0.0, *,
                                  gaussian=False, levels=12, order=8):
    """Vectorized variant over many time tuples (``times`` has shape ``(P, m)``).

    Uses fixed graded Gauss rules on each panel between consecutive times;
    accurate to roughly 1e-9 relative for the kernels in this package.  With
    ``gaussian=True`` the Poisson exponent ``n (exp(x / n) - 1)`` is replaced
    by its limit ``x``, which gives ``exp(sigma_v^2 a^T C_n a / 2)`` for the
    Gaussian model driven by the same kernel.
    """
    c = np.asarray(coeffs, dtype=float)
    t = np.asarray(times, dtype=float)
    if kernel.is_limit and not gaussian:
        raise DomainError("the event model needs a regularized kernel (not limit)")
    n, sv2, h = kernel.n, sigma_v ** 2, kernel.hurst
    m = c.size
    P = t.shape[0]
    eps = kernel.eps

    def f(a):
        x = sv2 * a * a / 2
        return x if gaussian else n * np.expm1(x / n)

    def phi(x):
        # zero-width panels put nodes exactly at the limit kernel's pole
        ok = x > 0 if kernel.is_limit else x >= 0
        return np.where(ok, _phi(kernel, np.where(ok, x, 1.0)), 0.0)

    total = np.zeros(P)
    lower = np.concatenate([t[:, 1:], np.zeros((P, 1))], axis=1)
    for j in range(m):
        # panel (t_{j+1}, t_j); all kernels with index <= j are active
        length = np.maximum(t[:, j] - lower[:, j], 0.0)
        d, w = quadrature.two_sided_rule(length, power=1.0 / (2 * h), levels=levels,
                                         order=order, extra=np.array([eps]))
        s = t[:, j, None] - d
        a = np.zeros_like(s)
        for i in range(j + 1):
            a += c[i] * phi(t[:, i, None] - s)
        total += np.sum(w * f(a), axis=-1)
    S = pre_horizon
    if S > 0:
        big = 10.0 * np.max(t[:, 0]) if np.max(t[:, 0]) > 0 else 1.0
        cut = min(S, big)
        x, w = quadrature.graded_rule(np.full(P, cut), power=1.0 / (2 * h), levels=levels,
                                      order=order, extra=np.array([eps]))
        parts = [(x, w)]
        if S > cut:
            if math.isinf(S):
                xt, wt = quadrature.tail_rule(np.full(P, cut), levels=levels, order=order)
            else:
                xt, wt = _finite_tail_rule(cut, S, levels, order)
                xt, wt = np.broadcast_to(xt, (P, xt.size)), np.broadcast_to(wt, (P, wt.size))
            parts.append((xt, wt))
        for x, w in parts:
            b = np.zeros_like(x)
            px = phi(x)
            for i in range(m):
                b += c[i] * (phi(t[:, i, None] + x) - px)
            total += np.sum(w * f(b), axis=-1)
    return np.exp(total)
