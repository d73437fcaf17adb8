"""Joint laws of the price/volatility jump marks ``(u, v)``.

Both families are centered, skew-free (including mixed skew) and have
sub-Gaussian tails:

* ``gaussian``     -- centered bivariate normal with stds ``sigma_p``,
  ``sigma_v`` and correlation ``rho``.
* ``scaled_sign``  -- ``(sigma_p sign Z1, sigma_v sign Z2)`` for a latent
  normal pair with correlation ``gaussian_rho``; the marks then have
  correlation ``(2/pi) arcsin(gaussian_rho)``.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ._validation import check_random_state, check_scalar
from .errors import ConfigError, DomainError


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    SCALED_SIGN = "scaled_sign"


@dataclass(frozen=True)
class MarkLaw:
    sigma_p: float
    sigma_v: float
    rho: float = 0.0
    family: Family = Family.GAUSSIAN
    gaussian_rho: float = None

    def __post_init__(self):
        set_ = object.__setattr__
        try:
            set_(self, "family", Family(self.family))
        except ValueError:
            raise ConfigError(f"unknown mark family {self.family!r}") from None
        set_(self, "sigma_p", check_scalar(self.sigma_p, "sigma_p", min_val=0.0))
        set_(self, "sigma_v", check_scalar(self.sigma_v, "sigma_v", min_val=0.0))
        if self.family is Family.SCALED_SIGN:
            g = self.gaussian_rho
            if g is None:
                # invert the arcsine law so that rho is the effective correlation
                r = check_scalar(self.rho, "rho", min_val=-1.0, max_val=1.0)
                g = math.sin(0.5 * math.pi * r)
            g = check_scalar(g, "gaussian_rho", min_val=-1.0, max_val=1.0)
            set_(self, "gaussian_rho", g)
            set_(self, "rho", 2.0 / math.pi * math.asin(g))
        else:
            set_(self, "rho", check_scalar(self.rho, "rho", min_val=-1.0, max_val=1.0))

    @classmethod
    def gaussian(cls, sigma_p, sigma_v, rho=0.0):
        return cls(sigma_p, sigma_v, rho, Family.GAUSSIAN)

    @classmethod
    def scaled_sign(cls, sigma_p, sigma_v, gaussian_rho):
        return cls(sigma_p, sigma_v, family=Family.SCALED_SIGN, gaussian_rho=gaussian_rho)

    @property
    def covariance(self):
        c = self.rho * self.sigma_p * self.sigma_v
        return np.array([[self.sigma_p ** 2, c], [c, self.sigma_v ** 2]])

    def sample(self, count, random_state=None):
        return sample_marks(self, random_state, count)

    def to_config(self, prefix="marks"):
        cfg = {f"{prefix}.family": self.family.value, f"{prefix}.sigma_p": self.sigma_p,
               f"{prefix}.sigma_v": self.sigma_v}
        if self.family is Family.SCALED_SIGN:
            cfg[f"{prefix}.gaussian_rho"] = self.gaussian_rho
        else:
            cfg[f"{prefix}.rho"] = self.rho
        return cfg

    @classmethod
    def from_config(cls, cfg, prefix="marks"):
        def get(key, default=None):
            raw = cfg.get(f"{prefix}.{key}", default)
            if raw is None:
                return None
            try:
                return float(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value for {prefix}.{key}: {raw!r}") from None

        family = cfg.get(f"{prefix}.family", "gaussian")
        sp, sv = get("sigma_p", 1.0), get("sigma_v", 1.0)
        if family == Family.SCALED_SIGN.value:
            g = get("gaussian_rho")
            if g is None:
                return cls(sp, sv, get("rho", 0.0), family)
            return cls.scaled_sign(sp, sv, g)
        return cls(sp, sv, get("rho", 0.0), family)


def _latent_normals(rng, count, corr):
    z1 = rng.standard_normal(count)
    z2 = rng.standard_normal(count)
    return z1, corr * z1 + math.sqrt(max(1.0 - corr * corr, 0.0)) * z2


def sample_marks(law, random_state, count):
    """Draw ``count`` i.i.d. mark pairs; returns arrays ``(u, v)``."""
    count = check_scalar(count, "count", kind=int, min_val=0)
    return _draw_marks(law, check_random_state(random_state), count)


def _draw_marks(law, rng, count):
    if law.family is Family.GAUSSIAN:
        z1, z2 = _latent_normals(rng, count, law.rho)
        return law.sigma_p * z1, law.sigma_v * z2
    if abs(law.gaussian_rho) > 1:
        raise DomainError("gaussian_rho must lie in [-1, 1]")
    z1, z2 = _latent_normals(rng, count, law.gaussian_rho)
    # sign(0) would give a zero mark; ties have probability zero but keep |u| exact
    return (law.sigma_p * np.where(z1 >= 0, 1.0, -1.0),
            law.sigma_v * np.where(z2 >= 0, 1.0, -1.0))


@dataclass
class MomentCheck:
    name: str
    estimate: float
    expected: float
    stderr: float
    passed: bool


@dataclass
class MomentCheckReport:
    count: int
    z: float
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def verify_mark_moments(law, random_state, count, z):
    """Compare empirical mark moments with the values the law must have.

    Each statistic is the sample mean of a product ``u**i v**j``; it passes
    when it lies within ``z`` standard errors of its target.  Covered items:
    centering, second moments, pure and mixed skew, and the cross moment.
    """
    count = check_scalar(count, "count", kind=int, min_val=10_000)
    z = check_scalar(z, "z", min_val=0.0)
    u, v = sample_marks(law, random_state, count)
    sp, sv = law.sigma_p, law.sigma_v
    targets = {
        "mean_u": (u, 0.0), "mean_v": (v, 0.0),
        "var_u": (u * u, sp ** 2), "var_v": (v * v, sv ** 2),
        "skew_u": (u ** 3, 0.0), "skew_v": (v ** 3, 0.0),
        "mixed_uvv": (u * v * v, 0.0), "mixed_uuv": (u * u * v, 0.0),
        "cross_uv": (u * v, law.rho * sp * sv),
    }
    report = MomentCheckReport(count, z)
    for name, (x, target) in targets.items():
        est = float(np.mean(x))
        se = float(np.std(x, ddof=1) / math.sqrt(count))
        dev = abs(est - target)
        report.checks.append(MomentCheck(name, est, target, se, dev <= z * se))
    return report
