import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughmicro import (ConfigError, FactorizationError, GaussianModelSpec, JointSampler,
                        KernelSpec, build_joint_covariance, c_hurst, euler_price,
                        sample_joint_paths)
from roughmicro.refsim import factorize, kernel_primitive


def test_joint_covariance_symmetric_psd():
    spec = GaussianModelSpec(0.1, 1.0, 0.5, -0.7, "two-sided", grid_size=64)
    cov = build_joint_covariance(spec)
    np.testing.assert_allclose(cov, cov.T, atol=1e-14)
    assert np.linalg.eigvalsh(cov).min() > -1e-10


@pytest.mark.parametrize("variant", ["two-sided", "rl"])
def test_variance_closed_forms(variant):
    h, sv = 0.15, 0.5
    spec = GaussianModelSpec(h, 1.0, sv, 0.3, variant, grid_size=8)
    var = np.diag(build_joint_covariance(spec))[:8]
    t = spec.times[1:]
    expected = sv ** 2 * (c_hurst(h) ** 2 * t ** (2 * h) if variant == "two-sided"
                          else t ** (2 * h) / (2 * h))
    np.testing.assert_allclose(var, expected, rtol=1e-10)


def test_zero_correlation_has_no_cross_block():
    spec = GaussianModelSpec(0.2, 1.0, 0.5, 0.0, grid_size=16)
    cov = build_joint_covariance(spec)
    assert np.all(cov[:16, 16:] == 0.0)


def test_cross_covariance_limit_closed_form():
    h = 0.2
    spec = GaussianModelSpec(h, 1.0, 1.0, 1.0, grid_size=4)
    cov = build_joint_covariance(spec)
    # Cov(V_1, W_1) is the sum over the increment columns of the last row
    assert cov[3, 4:].sum() == pytest.approx(1.0 / (h + 0.5), rel=1e-12)


def test_primitive_quadrature_matches_closed_form_for_small_eps():
    h = 0.3
    t = np.array([0.5, 1.0])
    up = np.array([0.25, 1.0])
    lim = kernel_primitive(KernelSpec.limit(h), t, up)
    approx = kernel_primitive(KernelSpec.benchmark(h, 10 ** 8), t, up)
    np.testing.assert_allclose(approx, lim, rtol=1e-4)


def test_sample_covariance_of_terminal_volatility():
    spec = GaussianModelSpec(0.15, 1.0, 0.5, -0.7, "rl", grid_size=50)
    v, dw = sample_joint_paths(spec, 3, 100_000)
    vt = v[:, -1]
    target = 0.25 / 0.3
    se = math.sqrt(2.0 / vt.size) * target
    assert abs(vt.var() - target) < 4 * se
    # Cov(V_T, W_T) = rho sigma_v T**(H+1/2) / (H+1/2)
    cross = np.mean(vt * dw.sum(axis=1))
    exp_cross = -0.7 * 0.5 / 0.65
    assert abs(cross - exp_cross) < 4 * math.sqrt(target / vt.size)


def test_flat_volatility_and_antithetic():
    spec = GaussianModelSpec(0.2, 1.0, 0.0, 0.0, grid_size=20)
    v, dw = JointSampler.from_spec(spec).sample(1, 10, antithetic=True)
    assert np.all(v == 0.0)
    assert np.allclose(dw[:5] + dw[5:], 0.0)
    spec = GaussianModelSpec(0.2, 1.0, 0.5, 0.4, grid_size=20)
    v, dw = JointSampler.from_spec(spec).sample(2, 100, antithetic=True)
    assert abs(v.mean()) < 1e-15 and abs(dw.mean()) < 1e-15
    with pytest.raises(ConfigError):
        JointSampler.from_spec(spec).sample(2, 3, antithetic=True)


@given(st.floats(-2, 2), st.floats(0.1, 3.0), st.integers(0, 1000))
def test_euler_with_constant_volatility_is_exact(c, sp, seed):
    rng = np.random.default_rng(seed)
    dw = rng.normal(0, 0.1, 100)
    vpath = np.full(101, c)
    assert euler_price(vpath, dw, sp) == pytest.approx(sp * math.exp(c) * dw.sum(), rel=1e-12,
                                                       abs=1e-12)


def test_euler_shape_mismatch():
    with pytest.raises(ConfigError):
        euler_price(np.zeros(5), np.zeros(3), 1.0)


def test_grid_limit_and_factorization_failure():
    with pytest.raises(ConfigError):
        GaussianModelSpec(0.2, grid_size=5000)
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(FactorizationError) as info:
        factorize(bad)
    assert info.value.min_eigenvalue == pytest.approx(-1.0)


def test_same_seed_same_paths():
    spec = GaussianModelSpec(0.1, 1.0, 0.5, -0.7, grid_size=32)
    a = sample_joint_paths(spec, 5, 10)
    b = sample_joint_paths(spec, 5, 10)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_approximate_model_variance_approaches_limit():
    h = 0.2
    gaps = []
    for n in (16, 256, 4096):
        spec = GaussianModelSpec(h, 1.0, 1.0, 0.0, "two-sided", KernelSpec.benchmark(h, n),
                                 grid_size=4)
        gaps.append(abs(build_joint_covariance(spec)[3, 3] - c_hurst(h) ** 2))
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.slow
def test_grid_refinement_changes_hermite_estimate_below_noise():
    from roughmicro.moments import hermite4
    from roughmicro.refsim import euler_terminal_prices

    est = []
    for K in (500, 1000):
        spec = GaussianModelSpec(0.15, 1.0, 0.05, -1.0, "rl", grid_size=K)
        p = euler_terminal_prices(spec, 21, 100_000)
        f = hermite4(p)
        est.append((f.mean(), f.std() / math.sqrt(f.size)))
    assert abs(est[0][0] - est[1][0]) < max(est[0][1], est[1][1]) * 2
