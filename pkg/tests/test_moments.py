import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from roughmicro import (AccuracyError, ContractError, DomainError, KernelSpec, MomentModel,
                        SizeLimitError, Word, enumerate_words, expand_word, hermite4_expectation,
                        limit_covariance, moment_value)
from roughmicro.functionals import star_functional
from roughmicro.moments import gaussian_exp_moment, hermite4

LETTER = {"I": 1, "J": 2}


def brute_force_words(N):
    out = []
    for m in range(1, N + 1):
        for letters in itertools.product("IJ", repeat=m):
            w = "".join(letters)
            if sum(LETTER[c] for c in w) == N and w[-1] == "J":
                out.append(w)
    return sorted(out, key=lambda w: (len(w), w))


@pytest.mark.parametrize("N", range(0, 9))
def test_words_match_brute_force(N):
    assert [w.letters for w in enumerate_words(N)] == brute_force_words(N)


def test_word_limits_and_contracts():
    with pytest.raises(SizeLimitError):
        enumerate_words(9)
    with pytest.raises(ContractError):
        expand_word("IJ", 4, (1, 1, 1))
    with pytest.raises(DomainError):
        Word("IK")
    assert Word("JI").vanishing and not Word("IJ").vanishing
    assert Word("IIJ").length == 4 and Word("IIJ").size == 3


def check_term_structure(w, sigmas):
    sp, sv, rho = sigmas
    m = len(w)
    terms = expand_word(w, Word(w).length, sigmas)
    n_i = w.count("I")
    n_j = w.count("J")
    # variable i (0-based) is created by letter w[m - 1 - i]
    creators = [w[m - 1 - i] for i in range(m)]
    expected_count = math.prod(i for i, c in enumerate(creators) if c == "I")
    assert len(terms) == expected_count
    seen = set()
    for term in terms:
        assert len(term.exponents) == m and len(term.alpha) == m
        for i, c in enumerate(creators):
            assert term.exponents[i] == (2 if c == "J" else 1)
            if c == "J":
                assert term.alpha[i] == 0
            else:
                assert 1 <= term.alpha[i] <= i
        seen.add(term.alpha)
        # coefficient = powers of sigmas * falling factorial * product of a_alpha
        k, fall = Word(w).length, 1.0
        for c in reversed(w):
            if c == "J":
                fall *= k * (k - 1) / 2
                k -= 2
            else:
                fall *= k
                k -= 1
        prod_a = math.prod(term.exponents[a - 1] for a in term.alpha if a > 0)
        scale = (rho * sp * sv) ** n_i * sp ** (2 * n_j) * fall
        assert term.coefficient == pytest.approx(scale * prod_a, rel=1e-12)
    assert len(seen) == len(terms)


@pytest.mark.parametrize("w", [w for m in range(1, 6) for w in map("".join,
                                                                   itertools.product("IJ", repeat=m))
                               if w[-1] == "J"])
def test_term_structure_small_words(w):
    check_term_structure(w, (1.3, 0.7, -0.4))


@given(st.text("IJ", min_size=1, max_size=6).filter(lambda w: w.endswith("J")),
       st.floats(0.1, 3), st.floats(0.01, 2), st.floats(-1, 1))
def test_term_structure_property(w, sp, sv, rho):
    check_term_structure(w, (sp, sv, rho))


def test_hermite_polynomial_is_orthogonal():
    x, w = np.polynomial.hermite_e.hermegauss(20)
    w = w / w.sum()
    assert np.sum(w * hermite4(x)) == pytest.approx(0.0, abs=1e-12)
    assert np.sum(w * hermite4(x) ** 2) == pytest.approx(24.0)


def test_gaussian_exp_moment():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    a = np.array([1.0, -1.0])
    assert gaussian_exp_moment(cov, a) == pytest.approx(math.exp(0.5 * a @ cov @ a))
    with pytest.raises(DomainError):
        gaussian_exp_moment(cov, np.ones(3))


@pytest.mark.parametrize("pre_zero", [False, True])
def test_second_moment_one_dimensional_oracle(pre_zero):
    h, sp, sv = 0.15, 1.3, 0.5
    var = lambda s: float(limit_covariance(h, s, s, pre_zero))
    ref, _ = integrate.quad(lambda s: math.exp(2 * sv ** 2 * var(s)), 0, 1, epsabs=1e-13)
    res = moment_value(2, MomentModel.limit(h, pre_zero), sp, sv, -0.7)
    # the reported indicator must bound the true quadrature error
    assert abs(res.value - sp ** 2 * ref) <= res.quadrature_error
    assert res.quadrature_error < 1e-4 * res.value
    assert res.term_count == 1


def test_third_moment_double_integral_oracle():
    # E[P^3] = 6 rho sp^3 sv int_{T>t>s>0} phi(t-s) E[exp(2V_t + V_s)]
    h, sp, sv, rho = 0.3, 1.0, 0.6, -0.5
    C = lambda t, s: float(limit_covariance(h, t, s, False))

    def inner(t):
        q = 1.0 / (h + 0.5)
        # d = t - s = u**q absorbs the kernel singularity
        def f(u):
            d = u ** q
            s = t - d
            e = 0.5 * sv ** 2 * (4 * C(t, t) + C(s, s) + 4 * C(t, s))
            return q * math.exp(e)
        return integrate.quad(f, 0, t ** (1 / q), epsabs=1e-12)[0]

    ref = 6 * rho * sp ** 3 * sv * integrate.quad(inner, 0, 1, epsabs=1e-11)[0]
    res = moment_value(3, MomentModel.limit(h, False), sp, sv, rho)
    assert abs(res.value - ref) <= max(res.quadrature_error, 1e-9)
    assert res.quadrature_error < 1e-4 * abs(res.value)


def test_flat_volatility_moments():
    sp = 1.7
    for model in (MomentModel.limit(0.2), MomentModel.approx(KernelSpec.benchmark(0.2, 8)),
                  MomentModel.prelimit(KernelSpec.optimized(0.2, 8), pre_zero=False)):
        assert moment_value(4, model, sp, 0.0, 0.3, 2.0).value == pytest.approx(
            3 * sp ** 4 * 4.0, rel=1e-10)
        assert moment_value(6, model, sp, 0.0, 0.3).value == pytest.approx(15 * sp ** 6, rel=1e-10)
    value, err = hermite4_expectation(MomentModel.limit(0.2), 1.0, 0.0, 0.0)
    assert abs(value) < 1e-10


@pytest.mark.parametrize("N", [1, 3, 5])
def test_odd_moments_vanish_without_leverage(N):
    assert moment_value(N, MomentModel.limit(0.2), 1.0, 0.5, 0.0).value == 0.0


def test_moment_errors():
    with pytest.raises(SizeLimitError):
        moment_value(7, MomentModel.limit(0.2), 1, 1, 0)
    with pytest.raises(AccuracyError) as info:
        moment_value(4, MomentModel.limit(0.1), 1, 1.0, -0.7, tol=1e-14)
    assert info.value.partial is not None
    assert moment_value(0, MomentModel.limit(0.2), 1, 1, 0).value == 1.0


def test_result_payload():
    res = moment_value(4, MomentModel.limit(0.15, False), 1, 0.05, -1)
    d = res.as_dict()
    assert set(d) >= {"value", "quadrature_error", "term_count"}
    assert res.term_count == sum(len(expand_word(w, 4, (1, 1, 1))) for w in enumerate_words(4))
    assert res.quadrature_error < 1e-4


@pytest.mark.slow
def test_fourth_moment_against_euler_monte_carlo():
    from roughmicro import GaussianModelSpec
    from roughmicro.refsim import euler_terminal_prices

    h, sv, rho = 0.3, 0.4, -0.7
    res = moment_value(4, MomentModel.limit(h, True), 1.0, sv, rho)
    spec = GaussianModelSpec(h, 1.0, sv, rho, "two-sided", grid_size=500)
    p4 = euler_terminal_prices(spec, 5, 200_000) ** 4
    se = p4.std() / math.sqrt(p4.size)
    assert abs(p4.mean() - res.value) < 4 * se


@pytest.mark.slow
def test_consistency_chain_prelimit_to_approx():
    # the prelimit formula approaches the approximate-model formula at the
    # rate of the star functional (the constant is not pinned)
    h, sv, rho = 0.15, 0.05, -1.0
    gaps, ratios = [], []
    for n in (16, 32, 64):
        k = KernelSpec.optimized(h, n)
        a = moment_value(4, MomentModel.approx(k, False), 1.0, sv, rho)
        p = moment_value(4, MomentModel.prelimit(k, False), 1.0, sv, rho)
        gap = abs(p.value - a.value)
        assert gap > 3 * (a.quadrature_error + p.quadrature_error)
        gaps.append(gap)
        ratios.append(gap / star_functional(k, 1.0, False))
    assert gaps[0] > gaps[1] > gaps[2]
    assert max(ratios[1:]) <= 1.5 * ratios[0]
