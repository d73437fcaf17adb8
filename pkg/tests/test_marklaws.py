import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughmicro import ConfigError, DomainError, MarkLaw, sample_marks, verify_mark_moments


@pytest.mark.parametrize("law", [
    MarkLaw.gaussian(1.0, 0.5, -0.7),
    MarkLaw.gaussian(2.0, 0.05, 0.3),
    MarkLaw.scaled_sign(1.0, 0.5, -0.7),
])
def test_declared_moments(law):
    rep = verify_mark_moments(law, 3, 200_000, 4.0)
    assert rep.passed, [c for c in rep.checks if not c.passed]


def test_perfect_negative_correlation_is_deterministic():
    u, v = sample_marks(MarkLaw.gaussian(1.0, 0.05, -1.0), 0, 1000)
    np.testing.assert_allclose(v, -0.05 * u, rtol=0, atol=1e-15)


def test_scaled_sign_values_and_arcsine_law():
    law = MarkLaw.scaled_sign(2.0, 0.3, 0.5)
    assert law.rho == pytest.approx(2 / math.pi * math.asin(0.5))
    u, v = sample_marks(law, 1, 5000)
    assert set(np.unique(u)) == {-2.0, 2.0}
    assert set(np.unique(v)) == {-0.3, 0.3}


def test_scaled_sign_rho_is_inverted():
    law = MarkLaw(1.0, 1.0, 0.4, "scaled_sign")
    assert law.rho == pytest.approx(0.4)


@given(st.integers(0, 2 ** 32), st.integers(0, 50))
def test_same_seed_same_marks(seed, count):
    law = MarkLaw.gaussian(1.0, 0.5, 0.2)
    a = sample_marks(law, seed, count)
    b = sample_marks(law, seed, count)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_validation():
    with pytest.raises(DomainError):
        MarkLaw.gaussian(1.0, 1.0, 1.5)
    with pytest.raises(DomainError):
        MarkLaw.gaussian(-1.0, 1.0)
    with pytest.raises(ConfigError):
        MarkLaw(1.0, 1.0, 0.0, "cauchy")
    with pytest.raises(ConfigError):
        MarkLaw.from_config({"marks.sigma_p": "abc"})
    with pytest.raises(DomainError):
        verify_mark_moments(MarkLaw.gaussian(1, 1), 0, 100, 4.0)


def test_config_round_trip():
    for law in (MarkLaw.gaussian(1.0, 0.5, -0.7), MarkLaw.scaled_sign(1.0, 0.2, 0.3)):
        cfg = {k: str(v) for k, v in law.to_config().items()}
        back = MarkLaw.from_config(cfg)
        assert back.family == law.family
        assert back.rho == pytest.approx(law.rho)
