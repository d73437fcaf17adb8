"""Weak-error experiments: Monte Carlo over ``n`` against a limit-model benchmark.

For each ``n`` the harness simulates ``M`` independent terminal prices of the
Poisson model, averages a test functional (by default the Hermite polynomial
``H4``) and compares with the same expectation under the limit model.  The
benchmark comes from the moment engine (exact up to quadrature) or from the
Euler reference simulation.
"""

import configparser
import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from ._validation import check_increasing, check_scalar
from .errors import ConfigError
from .functionals import theoretical_exponent
from .kernels import KernelSpec, Variant
from .marklaws import MarkLaw
from .microsim import terminal_values
from .moments import MomentModel, hermite4, hermite4_expectation, moment_value
from .refsim import GaussianModelSpec, euler_terminal_prices
from .rng import block_ranges

FUNCTIONALS = ("hermite4", "moment1", "moment2", "moment3", "moment4")
BENCHMARKS = ("moments", "euler", "both")
# full-scale Monte Carlo sizes, kept as metadata only
FULL_SCALE = {"samples_per_n": 20_000_000, "benchmark_euler_samples": 32_000_000,
               "benchmark_euler_steps": 5000}


# --- configuration -----------------------------------------------------------------------


def read_config(path):
    """Parse a flat ``key = value`` file (``#`` comments) into a dict of strings."""
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        text = Path(path).read_text()
        parser.read_string("[top]\n" + text)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return dict(parser["top"])


def _get(cfg, key, conv, default):
    raw = cfg.get(key, default)
    if raw is None:
        return None
    try:
        return conv(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _int_list(raw):
    if isinstance(raw, str):
        return [int(float(x)) for x in raw.replace(",", " ").split()]
    return [int(x) for x in raw]


def _bool(raw):
    if isinstance(raw, bool):
        return raw
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


@dataclass
class ExperimentConfig:
    """Weak-error experiment settings.

    ``kernel`` gives the family and Hurst index (its ``n`` is replaced by each
    entry of ``ns``).  ``pre_horizon`` is the pre-zero window ``S`` of the
    Poisson model; the benchmark includes the infinite past iff ``S > 0``.
    """

    kernel: KernelSpec
    law: MarkLaw
    ns: list
    samples: int = 100_000
    T: float = 1.0
    pre_horizon: float = 0.0
    functional: str = "hermite4"
    benchmark: str = "moments"
    euler_grid: int = 1000
    euler_samples: int = 100_000
    seed: int = 0
    block: int = 10_000
    common_random_numbers: bool = False
    slope_window: tuple = None
    moment_nodes: int = 32
    moment_check_nodes: int = 48

    def __post_init__(self):
        if self.kernel.is_limit:
            raise ConfigError("the experiment needs a regularized kernel family")
        self.ns = [int(n) for n in self.ns]
        if not self.ns:
            raise ConfigError("n list is empty")
        check_increasing(self.ns, "n list")
        if self.ns[0] < 1:
            raise ConfigError("n values must be positive")
        self.samples = check_scalar(self.samples, "samples", kind=int, min_val=1000,
                                    error=ConfigError)
        self.T = check_scalar(self.T, "T", min_val=0.0, include_min=False, error=ConfigError)
        self.pre_horizon = check_scalar(self.pre_horizon, "pre_horizon", min_val=0.0,
                                        error=ConfigError)
        if self.functional not in FUNCTIONALS:
            raise ConfigError(f"functional must be one of {FUNCTIONALS}")
        if self.benchmark not in BENCHMARKS:
            raise ConfigError(f"benchmark must be one of {BENCHMARKS}")
        if self.benchmark != "euler" and self.law.family.value != "gaussian":
            raise ConfigError("the moment benchmark needs Gaussian marks")
        if self.slope_window is None:
            self.slope_window = default_slope_window(self.theoretical_rate)
        lo, hi = self.slope_window
        if not lo < hi:
            raise ConfigError("slope window must be (lower, upper) with lower < upper")
        self.slope_window = (float(lo), float(hi))

    @property
    def hurst(self):
        return self.kernel.hurst

    @property
    def theoretical_rate(self):
        return theoretical_rate(self.kernel)

    @classmethod
    def from_dict(cls, cfg):
        kernel = KernelSpec.from_config(cfg, n=1)
        law = MarkLaw.from_config(cfg)
        p = "experiment."
        window = _get(cfg, p + "slope_window", lambda s: tuple(float(x) for x in
                                                             str(s).replace(",", " ").split()),
                      None)
        return cls(
            kernel=kernel, law=law,
            ns=_get(cfg, p + "ns", _int_list, "16 32 64 128 256"),
            samples=_get(cfg, p + "samples", lambda s: int(float(s)), 100_000),
            T=_get(cfg, p + "T", float, 1.0),
            pre_horizon=_get(cfg, p + "pre_horizon", float, 0.0),
            functional=_get(cfg, p + "functional", str, "hermite4"),
            benchmark=_get(cfg, p + "benchmark", str, "moments"),
            euler_grid=_get(cfg, p + "euler_grid", lambda s: int(float(s)), 1000),
            euler_samples=_get(cfg, p + "euler_samples", lambda s: int(float(s)), 100_000),
            seed=_get(cfg, p + "seed", lambda s: int(float(s)), 0),
            block=_get(cfg, p + "block", lambda s: int(float(s)), 10_000),
            common_random_numbers=_get(cfg, p + "crn", _bool, False),
            slope_window=window,
            moment_nodes=_get(cfg, p + "moment_nodes", int, 32),
            moment_check_nodes=_get(cfg, p + "moment_check_nodes", int, 48),
        )

    def to_dict(self):
        cfg = {}
        cfg.update(self.kernel.to_config())
        cfg.pop("kernel.n", None)
        cfg.update(self.law.to_config())
        p = "experiment."
        cfg.update({p + "ns": " ".join(map(str, self.ns)), p + "samples": self.samples,
                    p + "T": self.T, p + "pre_horizon": self.pre_horizon,
                    p + "functional": self.functional, p + "benchmark": self.benchmark,
                    p + "euler_grid": self.euler_grid, p + "euler_samples": self.euler_samples,
                    p + "seed": self.seed, p + "block": self.block,
                    p + "crn": self.common_random_numbers,
                    p + "slope_window": " ".join(map(repr, self.slope_window)),
                    p + "moment_nodes": self.moment_nodes,
                    p + "moment_check_nodes": self.moment_check_nodes})
        return cfg


def theoretical_rate(kernel):
    """Decay exponent of the proven weak-error bound, or ``None`` if none applies.

    Optimized kernels follow the three-case table in ``H``; the benchmark
    kernel (and the shift family with ``alpha = 1``) only admits ``n**-2H``.
    """
    h = kernel.hurst
    if kernel.variant is Variant.OPTIMIZED:
        return theoretical_exponent(h)
    if kernel.variant is Variant.BENCHMARK or (kernel.variant is Variant.SHIFT
                                               and kernel.alpha == 1):
        return 2 * h
    return None


def default_slope_window(rate):
    # a weak error cannot decay faster than the n**-1 Poisson CLT term
    if rate is None:
        return (-1.15, 0.0)
    if rate >= 1.0:
        return (-rate - 0.15, -rate + 0.15)
    return (-1.0, -rate + 0.27)


# --- report ------------------------------------------------------------------------------


@dataclass
class PointEstimate:
    n: int
    estimate: float
    stderr: float
    abs_error: float
    error_stderr: float
    block_chi2_pvalue: float

    @property
    def above_noise(self):
        return self.abs_error > 3.0 * self.error_stderr


@dataclass
class SlopeFit:
    status: str  # consistent | inconclusive | contradicting
    slope: float = None
    slope_stderr: float = None
    ci_low: float = None
    ci_high: float = None
    ns_used: list = field(default_factory=list)


@dataclass
class ExperimentReport:
    points: list
    benchmark_value: float
    benchmark_stderr: float
    benchmark_method: str
    fit: SlopeFit
    theoretical_rate: float
    slope_window: tuple
    band_constant: float = None
    bands: dict = field(default_factory=dict)
    benchmark_crosscheck: dict = None
    config: dict = field(default_factory=dict)
    full_scale: dict = field(default_factory=lambda: dict(FULL_SCALE))

    def to_dict(self):
        d = asdict(self)
        d["bands"] = {str(k): v for k, v in self.bands.items()}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


# --- estimation --------------------------------------------------------------------------


def _apply(functional, p):
    if functional == "hermite4":
        return hermite4(p)
    return p ** int(functional[-1])


def _benchmark_moments(cfg):
    law = cfg.law
    model = MomentModel.limit(cfg.hurst, pre_zero=cfg.pre_horizon > 0)
    kw = dict(nodes=cfg.moment_nodes, check_nodes=cfg.moment_check_nodes)
    args = (law.sigma_p, law.sigma_v, law.rho, cfg.T)
    if cfg.functional == "hermite4":
        return hermite4_expectation(model, *args, **kw)
    r = moment_value(int(cfg.functional[-1]), model, *args, **kw)
    return r.value, r.quadrature_error


def _benchmark_euler(cfg):
    law = cfg.law
    spec = GaussianModelSpec(cfg.hurst, law.sigma_p, law.sigma_v, law.rho,
                             "two-sided" if cfg.pre_horizon > 0 else "rl",
                             grid_size=cfg.euler_grid, T=cfg.T)
    p = euler_terminal_prices(spec, cfg.seed, cfg.euler_samples, tag=1)
    f = _apply(cfg.functional, p)
    return float(np.mean(f)), float(np.std(f, ddof=1) / math.sqrt(f.size))


def benchmark(cfg):
    """Return ``(value, stderr, method, crosscheck)`` for the limit model."""
    cross = None
    if cfg.benchmark == "moments":
        v, e = _benchmark_moments(cfg)
        return v, e, "moments", None
    ve, se = _benchmark_euler(cfg)
    if cfg.benchmark == "euler":
        return ve, se, "euler", None
    vm, em = _benchmark_moments(cfg)
    combined = math.hypot(se, em)
    cross = {"moments": vm, "moments_error": em, "euler": ve, "euler_stderr": se,
             "agree_within_4se": bool(abs(vm - ve) <= 4 * combined)}
    return vm, em, "moments", cross


def block_chi2_pvalue(values, blocks=20):
    """Two-sided p-value of the block-mean dispersion against the pooled SE.

    Under unbiased i.i.d. sampling ``sum (m_b - m)^2 / (s^2 / size)`` is close
    to chi-square with ``blocks - 1`` degrees of freedom.
    """
    values = np.asarray(values, dtype=float)
    size = values.size // blocks
    if size < 2:
        return float("nan")
    x = values[: size * blocks].reshape(blocks, size)
    means = x.mean(axis=1)
    var = values.var(ddof=1)
    if var == 0:
        return 1.0
    stat = float(np.sum((means - means.mean()) ** 2) / (var / size))
    cdf = stats.chi2.cdf(stat, blocks - 1)
    return float(2 * min(cdf, 1 - cdf))


def simulate_functional(cfg, n):
    """``f(P_T)`` for all ``cfg.samples`` replications at scale ``n``."""
    kernel = cfg.kernel.with_n(n)
    # with common random numbers replication i reuses its marks for every n
    crn = cfg.common_random_numbers
    tags = (0,) if crn else (0, n)
    out = np.empty(cfg.samples)
    for lo, hi in block_ranges(cfg.samples, cfg.block):
        p, _ = terminal_values(kernel, cfg.law, cfg.T, cfg.pre_horizon, cfg.seed,
                               range(lo, hi), *tags, common=crn)
        out[lo:hi] = _apply(cfg.functional, p)
    return out


def fit_slope(points, window, min_points=3):
    """Weighted log-log fit over points whose error exceeds 3 SE.

    The log-error variance of each point is ``(SE / error)**2``.  The fit is
    ``contradicting`` when the whole ``slope +- 2 SE`` interval misses the
    window, ``consistent`` when the slope lies inside it, and ``inconclusive``
    otherwise or when fewer than ``min_points`` points clear the noise floor.
    """
    used = [p for p in points if p.above_noise]
    if len(used) < min_points:
        return SlopeFit("inconclusive", ns_used=[p.n for p in used])
    x = np.log([p.n for p in used])
    y = np.log([p.abs_error for p in used])
    w = np.array([(p.abs_error / p.error_stderr) ** 2 for p in used])
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    se = float(math.sqrt(1.0 / sxx))
    lo, hi = slope - 2 * se, slope + 2 * se
    wlo, whi = window
    if hi < wlo or lo > whi:
        status = "contradicting"
    elif wlo <= slope <= whi:
        status = "consistent"
    else:
        status = "inconclusive"
    return SlopeFit(status, slope, se, lo, hi, [p.n for p in used])


def confidence_bands(report, sigma_levels=(1, 2, 3), rate=None):
    """Bands ``C n**-rate +- k SE(n)`` with ``C`` fitted by weighted least squares.

    ``rate`` defaults to the report's theoretical rate (or the fitted slope
    when no theory applies).  Returns ``(C, {k: [inside flags]})`` and stores
    both on the report.
    """
    if rate is None:
        rate = report.theoretical_rate
    if rate is None:
        rate = -report.fit.slope if report.fit.slope is not None else 0.0
    ns = np.array([p.n for p in report.points], dtype=float)
    err = np.array([p.abs_error for p in report.points])
    se = np.array([p.error_stderr for p in report.points])
    x = ns ** -rate
    w = 1.0 / se ** 2
    C = float(np.sum(w * err * x) / np.sum(w * x * x))
    line = C * x
    bands = {int(k): [bool(abs(e - l) <= k * s) for e, l, s in zip(err, line, se)]
             for k in sigma_levels}
    report.band_constant = C
    report.bands = bands
    return C, bands


def run_weak_error(cfg, progress=None):
    """Run the experiment described by ``cfg`` and return an :class:`ExperimentReport`."""
    bench, bench_se, method, cross = benchmark(cfg)
    points = []
    for n in cfg.ns:
        vals = simulate_functional(cfg, n)
        est = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(vals.size))
        points.append(PointEstimate(n, est, se, abs(est - bench), math.hypot(se, bench_se),
                                    block_chi2_pvalue(vals)))
        if progress:
            progress(points[-1])
    fit = fit_slope(points, cfg.slope_window)
    report = ExperimentReport(points, bench, bench_se, method, fit, cfg.theoretical_rate,
                              cfg.slope_window, benchmark_crosscheck=cross,
                              config=cfg.to_dict())
    confidence_bands(report)
    return report


# --- outputs ---------------------------------------------------------------------------


def write_report(report, out_dir, stem="weak_error"):
    """Write JSON, CSV and SVG outputs; returns the list of paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.json", out / f"{stem}.csv", out / f"{stem}.svg"]
    paths[0].write_text(report.to_json())
    with open(paths[1], "w", newline="") as fh:
        wr = csv.writer(fh)
        levels = sorted(report.bands)
        wr.writerow(["n", "estimate", "stderr", "abs_error", "error_stderr"]
                    + [f"inside_{k}se" for k in levels])
        for i, p in enumerate(report.points):
            wr.writerow([p.n, repr(p.estimate), repr(p.stderr), repr(p.abs_error),
                         repr(p.error_stderr)] + [int(report.bands[k][i]) for k in levels])
    plot_weak_error(report, paths[2])
    return paths


def _svg_figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "roughmicro"
    return plt


def plot_weak_error(report, path):
    """Log-log weak error with the fitted theoretical line and 1/2/3 SE bands."""
    plt = _svg_figure()
    ns = np.array([p.n for p in report.points], dtype=float)
    err = np.array([p.abs_error for p in report.points])
    se = np.array([p.error_stderr for p in report.points])
    fig, ax = plt.subplots(figsize=(6, 4))
    if report.band_constant is not None:
        rate = report.theoretical_rate if report.theoretical_rate is not None else 0.0
        line = report.band_constant * ns ** -rate
        for k, alpha in ((3, 0.12), (2, 0.18), (1, 0.25)):
            ax.fill_between(ns, np.maximum(line - k * se, 1e-12), line + k * se,
                            color="grey", alpha=alpha, lw=0)
        ax.plot(ns, line, "k--", label=f"rate {rate:.4f}")
    ax.plot(ns, err, "o-", color="tab:blue", label="Poisson simulation")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("absolute weak error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_loglog(ns, series, path, *, xlabel="n", ylabel="value"):
    """Plain log-log plot of named series (used for kernel functionals)."""
    plt = _svg_figure()
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, ys in series.items():
        ax.plot(ns, ys, "o-", label=name)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_paths(paths, path):
    """Log-volatility (top) and log-price (bottom) of simulated paths."""
    plt = _svg_figure()
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for p in paths:
        a1.plot(p.times, p.log_vol, lw=0.8)
        a2.step(p.times, p.log_price, where="post", lw=0.8)
    a1.set_ylabel("log-volatility")
    a2.set_ylabel("log-price")
    a2.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
