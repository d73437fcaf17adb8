import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from roughmicro import (DomainError, KernelSpec, c_hurst, covariance_Cn, error_functionals,
                        fit_rate, limit_covariance, lower_bound_scan, theoretical_exponent)
from roughmicro.functionals import covariance_matrix_values, star_functional, triangle_functional


@given(st.floats(0.05, 0.45), st.floats(0.05, 2.0), st.floats(0.05, 2.0))
def test_limit_covariance_rl_against_quadrature(h, t, s):
    lo, hi = min(t, s), max(t, s)
    q = 1 / (2 * h)
    # d = lo - r with d = u**q removes the endpoint singularity
    f = lambda u: (hi - lo + u ** q) ** (h - 0.5) * u ** (q * (h - 0.5)) * q * u ** (q - 1)
    ref, _ = integrate.quad(f, 0, lo ** (1 / q), epsabs=1e-13, epsrel=1e-11, limit=200)
    assert limit_covariance(h, t, s, pre_zero=False) == pytest.approx(ref, rel=1e-8)


def test_limit_covariance_diagonals():
    h = 0.15
    t = np.array([0.2, 1.0, 3.0])
    np.testing.assert_allclose(limit_covariance(h, t, t, True), c_hurst(h) ** 2 * t ** (2 * h))
    np.testing.assert_allclose(limit_covariance(h, t, t, False), t ** (2 * h) / (2 * h),
                               rtol=1e-12)


@pytest.mark.parametrize("kernel", [KernelSpec.benchmark(0.15, 50),
                                    KernelSpec.optimized(0.15, 50),
                                    KernelSpec.shifted(0.3, 20, 2.0)])
@pytest.mark.parametrize("pre_zero", [False, True])
def test_vectorized_covariance_matches_adaptive(kernel, pre_zero):
    pts = [(1.0, 1.0), (0.7, 0.3), (0.5, 0.49), (0.02, 1.0)]
    for t, s in pts:
        ref = covariance_Cn(kernel, t, s, pre_zero)
        got = float(covariance_matrix_values(kernel, t, s, pre_zero))
        assert got == pytest.approx(ref, rel=1e-7, abs=1e-10)


@pytest.mark.parametrize("kernel", [KernelSpec.benchmark(0.1, 16), KernelSpec.optimized(0.1, 16)])
def test_gram_matrix_is_psd(kernel):
    t = np.linspace(0.125, 1.0, 8)
    gram = covariance_matrix_values(kernel, t[:, None], t[None, :], True)
    assert np.linalg.eigvalsh(0.5 * (gram + gram.T)).min() >= -1e-8


def test_covariance_converges_to_limit():
    h = 0.2
    gaps = [abs(covariance_Cn(KernelSpec.optimized(h, n), 1.0, 0.6)
                - float(limit_covariance(h, 1.0, 0.6))) for n in (16, 256, 4096)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_star_and_triangle_closed_forms_for_benchmark():
    h, n, T = 0.2, 64, 1.0
    k = KernelSpec.benchmark(h, n)
    e = 1.0 / n
    star = ((T + e) ** (4 * h - 1) - e ** (4 * h - 1)) / (4 * h - 1) / n
    assert star_functional(k, T, pre_zero=False) == pytest.approx(star, rel=1e-9)
    tri = (T ** (h + 0.5) - (T + e) ** (h + 0.5) + e ** (h + 0.5)) / (h + 0.5)
    assert triangle_functional(k, T) == pytest.approx(tri, rel=1e-9)


def test_error_functionals_positive_and_decreasing():
    k = KernelSpec.optimized(0.15, 16)
    a = error_functionals(k)
    b = error_functionals(k, n=256)
    for name in ("star", "diamond", "square", "triangle"):
        assert getattr(a, name) > getattr(b, name) > 0
    assert a.as_row()["sum"] == pytest.approx(a.total)
    with pytest.raises(DomainError):
        error_functionals(KernelSpec.limit(0.2))


def test_fit_rate_recovers_power_law():
    ns = np.array([16, 32, 64, 128])
    fit = fit_rate(ns, 3.0 * ns ** -0.7)
    assert fit.slope == pytest.approx(-0.7)
    assert fit.intercept == pytest.approx(math.log(3.0))
    assert fit.residual < 1e-12
    with pytest.raises(DomainError):
        fit_rate([1, 2], [1, 2])
    with pytest.raises(DomainError):
        fit_rate([1, 2, 3], [1, -2, 3])


def test_theoretical_exponent_cases():
    assert theoretical_exponent(0.15) == pytest.approx(0.6190476, abs=1e-6)
    assert theoretical_exponent(0.25) == 1.0
    assert theoretical_exponent(0.3) == 1.0
    # the two branches meet at H = 1/4
    assert theoretical_exponent(0.25 - 1e-12) == pytest.approx(1.0)


def test_lower_bound_scan_limit_kernel_is_full_measure():
    vals = lower_bound_scan(KernelSpec.limit(0.2), 0.9, [16, 64])
    np.testing.assert_allclose(vals, 1.0, atol=1e-9)
    vals = lower_bound_scan(KernelSpec.benchmark(0.2, 1), 0.9, [16, 256, 4096])
    assert np.all((np.array(vals) >= 0) & (np.array(vals) <= 1))


def test_l2_gap_along_n():
    from roughmicro.kernels import l2_distance_to_limit

    for make in (KernelSpec.benchmark, KernelSpec.optimized):
        d = [l2_distance_to_limit(make(0.15, n), 1.0) for n in (16, 128, 1024)]
        assert d[0] > d[1] > d[2]


@pytest.mark.slow
@pytest.mark.parametrize("kernel", [KernelSpec.benchmark(0.15, 1),
                                    KernelSpec.shifted(0.15, 1, 0.5),
                                    KernelSpec.shifted(0.15, 1, 1.0),
                                    KernelSpec.shifted(0.15, 1, 2.0),
                                    KernelSpec.optimized(0.15, 1)])
def test_no_family_beats_the_lower_bound(kernel):
    ns = [2 ** k for k in range(4, 11)]
    vals = []
    for n in ns:
        f = error_functionals(kernel, n=n)
        vals.append(f.star + f.diamond)
    slope = fit_rate(ns, vals).slope
    assert slope >= -theoretical_exponent(0.15) - 0.05
