import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from roughmicro import ConfigError, DomainError, KernelSpec, c1_constant, c_hurst
from roughmicro.kernels import audit_kernel_assumptions, eval_kernel_derivative, l2_distance_to_limit

hursts = st.floats(0.02, 0.48)
ns = st.integers(1, 10_000)


def test_c1_at_quarter():
    expected = 1.0 / (math.sqrt(2) - 1 - math.sqrt(2) / 4)
    assert c1_constant(0.25) == pytest.approx(expected, rel=1e-14)
    assert c1_constant(0.25) == pytest.approx(16.4853, abs=1e-3)


@pytest.mark.parametrize("h", [0.5, 0.7, 0.0, -0.1])
def test_c1_outside_domain(h):
    with pytest.raises(DomainError):
        c1_constant(h)


def test_c_hurst_brownian():
    assert c_hurst(0.5) == pytest.approx(1.0)


def test_benchmark_value_and_derivative():
    k = KernelSpec.benchmark(0.15, 10)
    assert k(0.1) == pytest.approx(0.2 ** -0.35, rel=1e-14)
    d = eval_kernel_derivative(k, 0.1)
    # -0.35 * 0.2**-1.35, recomputed by hand
    assert d.value == pytest.approx(-3.07376, abs=1e-4)
    assert not d.one_sided


def test_negative_arguments_vanish():
    for k in (KernelSpec.benchmark(0.2, 5), KernelSpec.optimized(0.2, 5),
              KernelSpec.shifted(0.2, 5, 2.0)):
        assert np.all(k(np.array([-1.0, -1e-9])) == 0.0)


def test_limit_pole_and_nonfinite():
    with pytest.raises(DomainError):
        KernelSpec.limit(0.2)(0.0)
    with pytest.raises(DomainError):
        KernelSpec.benchmark(0.2, 3)(np.nan)


def test_construction_errors():
    with pytest.raises(ConfigError):
        KernelSpec(0.2, "shift", 4)
    with pytest.raises(ConfigError):
        KernelSpec(0.2, "nonsense", 4)
    with pytest.raises(DomainError):
        KernelSpec.optimized(0.5, 4)


def test_optimized_kink_is_one_sided():
    k = KernelSpec.optimized(0.2, 16)
    assert eval_kernel_derivative(k, k.eps).one_sided


@given(hursts, ns, st.floats(0.0, 3.0))
def test_optimized_matches_shifted_power_beyond_eps(h, n, x):
    k = KernelSpec.optimized(h, n)
    t = k.eps * (1.0 + x)
    assert k(t) == pytest.approx((t + k.eps) ** (h - 0.5), rel=1e-12)


@given(hursts, ns)
def test_optimized_continuous_and_decreasing(h, n):
    k = KernelSpec.optimized(h, n)
    e = k.eps
    assert k(e * (1 - 1e-10)) == pytest.approx(k(e), rel=1e-8)
    t = np.linspace(0.0, 4 * e, 400)
    v = k(t)
    assert np.all(v > 0)
    assert np.all(np.diff(v) <= 1e-12 * v[:-1])


@given(st.sampled_from(["benchmark", "optimized", "shift"]), hursts, ns,
       st.floats(1e-3, 2.0))
def test_derivative_matches_finite_differences(variant, h, n, t):
    k = KernelSpec(h, variant, n, alpha=1.5 if variant == "shift" else None)
    if variant == "optimized" and abs(t - k.eps) < 1e-4 * t:
        t *= 1.01
    step = 1e-6 * t
    if variant == "optimized" and (t - step) < k.eps < (t + step):
        return
    fd = (k(t + step) - k(t - step)) / (2 * step)
    assert k.derivative(t) == pytest.approx(fd, rel=1e-5)


def test_optimized_square_integral_identity():
    rng = np.random.default_rng(11)
    for _ in range(10):
        h = rng.uniform(0.05, 0.45)
        k = KernelSpec.optimized(h, int(rng.integers(2, 5000)))
        t = k.eps * (1 + rng.uniform(0, 200))
        val, _ = integrate.quad(lambda x: k(x) ** 2, 0.0, t, points=[k.eps],
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        assert val == pytest.approx((t + k.eps) ** (2 * h) / (2 * h), rel=1e-9)


def test_config_round_trip():
    for k in (KernelSpec.benchmark(0.1, 7), KernelSpec.optimized(0.3, 9, beta=1.5),
              KernelSpec.shifted(0.2, 5, 0.5), KernelSpec.limit(0.4)):
        cfg = {key: str(val) for key, val in k.to_config().items()}
        assert KernelSpec.from_config(cfg) == k


def test_config_requires_hurst():
    with pytest.raises(ConfigError):
        KernelSpec.from_config({"kernel.variant": "benchmark"})


@pytest.mark.parametrize("variant", ["benchmark", "optimized"])
def test_audit_passes_admissible_kernels(variant):
    rep = audit_kernel_assumptions(KernelSpec(0.15, variant, 16), 1.0, 2.5, 256)
    assert rep.ok, rep.violations
    assert all(np.diff(rep.l2_distance) < 0)


def test_audit_rejects_bad_input():
    with pytest.raises(DomainError):
        audit_kernel_assumptions(KernelSpec.limit(0.2), 1.0, 2.5, 256)
    with pytest.raises(DomainError):
        audit_kernel_assumptions(KernelSpec.benchmark(0.2, 4), 1.0, 1.5, 256)


def test_l2_distance_benchmark_closed_form_order():
    # the L2 gap of the benchmark kernel decays like n**-2H
    h = 0.2
    d = [l2_distance_to_limit(KernelSpec.benchmark(h, n), 1.0) for n in (1000, 8000)]
    slope = math.log(d[1] / d[0]) / math.log(8)
    assert slope == pytest.approx(-2 * h, abs=0.03)
