"""Command-line entry point: ``roughmicro [global flags] <subcommand> [options]``.

Exit codes: 0 success, 2 configuration/domain error, 3 accuracy or
factorization failure (and a weak-error fit that contradicts the theory),
4 inconclusive weak-error fit.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .errors import (AccuracyError, ConfigError, ContractError, DomainError, FactorizationError,
                     SizeLimitError, UnsupportedLawError)
from .functionals import error_functionals, fit_rate, theoretical_exponent
from .kernels import KernelSpec, audit_kernel_assumptions
from .marklaws import MarkLaw
from .microsim import simulate_events, simulate_price_path
from .moments import MomentModel, moment_value
from .refsim import GaussianModelSpec, JointSampler, euler_price
from .rng import block_ranges, stream

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_INCONCLUSIVE = 0, 2, 3, 4

_CONFIG_ERRORS = (ConfigError, DomainError, ContractError, SizeLimitError, UnsupportedLawError)
_ACCURACY_ERRORS = (AccuracyError, FactorizationError)


# --- argument plumbing -----------------------------------------------------------------


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=default, help="master seed")
    parser.add_argument("--threads", type=int, default=default, help="worker threads")
    parser.add_argument("--out-dir", default=default, help="output directory (default .)")


def _kernel_flags(p, n=True):
    p.add_argument("--kernel", choices=["benchmark", "optimized", "shift", "limit"])
    p.add_argument("--hurst", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    if n:
        p.add_argument("--n", type=int)


def _mark_flags(p):
    p.add_argument("--family", choices=["gaussian", "scaled_sign"])
    p.add_argument("--sigma-p", type=float)
    p.add_argument("--sigma-v", type=float)
    p.add_argument("--rho", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="roughmicro",
                                     description="Poisson microstructure rough volatility tools")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    p = sub.add_parser("paths", parents=[common], help="simulate event-driven paths")
    _kernel_flags(p)
    _mark_flags(p)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--pre-horizon", type=float, default=0.0)
    p.add_argument("--grid", type=int, default=1000, help="grid intervals on [0, T]")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--plot", action="store_true", help="also write paths.svg")

    p = sub.add_parser("refsim", parents=[common], help="Gaussian reference simulation")
    _kernel_flags(p)
    _mark_flags(p)
    p.add_argument("--variant", choices=["two-sided", "rl"], default="two-sided")
    p.add_argument("--grid", type=int, default=1000)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--T", type=float, default=1.0)

    p = sub.add_parser("moments", parents=[common], help="moments from the word expansion")
    _kernel_flags(p)
    _mark_flags(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--model", choices=["limit", "approx", "prelimit"], default="limit")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--rl", action="store_true", help="drop the pre-zero component")
    p.add_argument("--pre-horizon", type=float, default=float("inf"),
                   help="pre-zero window of the prelimit model")
    p.add_argument("--nodes", type=int, default=32)
    p.add_argument("--check-nodes", type=int, default=48)
    p.add_argument("--tol", type=float, help="fail (exit 3) above this error indicator")

    p = sub.add_parser("functionals", parents=[common], help="kernel error functionals")
    _kernel_flags(p, n=False)
    p.add_argument("--n-min", type=int, default=16)
    p.add_argument("--n-max", type=int, default=4096)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--rl", action="store_true", help="drop the pre-zero component")

    p = sub.add_parser("weak-error", parents=[common], help="weak-error experiment")
    _kernel_flags(p, n=False)
    _mark_flags(p)
    p.add_argument("--ns", help="comma or space separated n list")
    p.add_argument("--samples", type=int)
    p.add_argument("--benchmark", choices=list(harness.BENCHMARKS))
    p.add_argument("--functional", choices=list(harness.FUNCTIONALS))

    p = sub.add_parser("kernel-audit", parents=[common], help="check kernel regularity")
    _kernel_flags(p)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=2.5)
    p.add_argument("--grid-size", type=int, default=512)
    p.add_argument("--ladder", type=int, default=4)
    return parser


def _load_config(args):
    cfg = harness.read_config(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "kernel.variant": getattr(args, "kernel", None),
        "kernel.hurst": getattr(args, "hurst", None),
        "kernel.beta": getattr(args, "beta", None),
        "kernel.alpha": getattr(args, "alpha", None),
        "kernel.n": getattr(args, "n", None),
        "marks.family": getattr(args, "family", None),
        "marks.sigma_p": getattr(args, "sigma_p", None),
        "marks.sigma_v": getattr(args, "sigma_v", None),
        "marks.rho": getattr(args, "rho", None),
        "experiment.seed": getattr(args, "seed", None),
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _out_dir(args):
    out = Path(getattr(args, "out_dir", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _hurst(cfg):
    raw = cfg.get("kernel.hurst")
    if raw is None:
        raise ConfigError("kernel.hurst is required")
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for kernel.hurst: {raw!r}") from None


def _seed(cfg):
    try:
        return int(float(cfg.get("experiment.seed", 0)))
    except ValueError:
        raise ConfigError("experiment.seed must be an integer") from None


def _set_threads(threads):
    if threads is None:
        return
    import numba

    if not 1 <= threads <= numba.config.NUMBA_NUM_THREADS:
        raise ConfigError(f"--threads must lie in [1, {numba.config.NUMBA_NUM_THREADS}]")
    numba.set_num_threads(threads)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=harness._jsonable))


# --- subcommands -----------------------------------------------------------------------


def cmd_paths(args, cfg, out):
    kernel = KernelSpec.from_config(cfg)
    law = MarkLaw.from_config(cfg)
    grid = np.linspace(0.0, args.T, args.grid + 1)
    paths = []
    for r in range(args.replications):
        ev = simulate_events(kernel.n, args.T, args.pre_horizon, law, stream(_seed(cfg), 0, r))
        path = simulate_price_path(ev, kernel, grid)
        paths.append(path)
        _write_csv(out / f"paths_{r:04d}.csv", ["t", "log_vol", "log_price"],
                   ([repr(float(t)), repr(float(v)), repr(float(p))] for t, v, p in
                    zip(path.times, path.log_vol, path.log_price)))
    if args.plot:
        harness.plot_paths(paths, out / "paths.svg")
    return EXIT_OK


def cmd_refsim(args, cfg, out):
    law = MarkLaw.from_config(cfg)
    hurst = _hurst(cfg)
    kernel = None
    if cfg.get("kernel.variant", "limit") != "limit":
        kernel = KernelSpec.from_config(cfg)
    spec = GaussianModelSpec(hurst, law.sigma_p, law.sigma_v, law.rho, args.variant,
                             kernel=kernel, grid_size=args.grid, T=args.T)
    sampler = JointSampler.from_spec(spec)
    rows = []
    for b, (lo, hi) in enumerate(block_ranges(args.samples, 2000)):
        v, dw = sampler.sample(stream(_seed(cfg), 0, b), hi - lo)
        p = euler_price(v, dw, spec.sigma_p)
        rows += [[i, repr(float(pi)), repr(float(vi))]
                 for i, pi, vi in zip(range(lo, hi), p, v[:, -1])]
    _write_csv(out / "refsim.csv", ["replication", "price_T", "log_vol_T"], rows)
    return EXIT_OK


def cmd_moments(args, cfg, out):
    law = MarkLaw.from_config(cfg)
    pre_zero = not args.rl
    if args.model == "limit":
        model = MomentModel.limit(_hurst(cfg), pre_zero)
    else:
        kernel = KernelSpec.from_config(cfg)
        if args.model == "approx":
            model = MomentModel.approx(kernel, pre_zero)
        else:
            model = MomentModel.prelimit(kernel, pre_zero, args.pre_horizon)
    res = moment_value(args.N, model, law.sigma_p, law.sigma_v, law.rho, args.T,
                       nodes=args.nodes, check_nodes=args.check_nodes, tol=args.tol)
    payload = {"value": res.value, "quadrature_error": res.quadrature_error,
               "term_count": res.term_count}
    _write_json(out / "moments.json", payload)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_functionals(args, cfg, out):
    if args.n_min < 1 or args.n_max < args.n_min:
        raise ConfigError("need 1 <= n-min <= n-max")
    kernel = KernelSpec.from_config(cfg, n=args.n_min)
    ns = []
    n = args.n_min
    while n <= args.n_max:
        ns.append(n)
        n *= 2
    rows = [error_functionals(kernel, m, args.T, not args.rl).as_row() for m in ns]
    header = ["n", "star", "diamond", "square", "triangle", "sum"]
    _write_csv(out / "functionals.csv", header,
               ([r["n"]] + [repr(r[k]) for k in header[1:]] for r in rows))
    sums = [r["sum"] for r in rows]
    summary = {"kernel": kernel.to_config(), "ns": ns}
    if len(ns) >= 3:
        fit = fit_rate(ns, sums)
        summary.update(slope=fit.slope, slope_stderr=fit.slope_stderr,
                       intercept=fit.intercept, rms_residual=fit.residual)
    rate = harness.theoretical_rate(kernel)
    summary["theoretical_slope"] = -rate if rate is not None else None
    if kernel.variant.value == "optimized":
        summary["optimized_exponent"] = theoretical_exponent(kernel.hurst)
    _write_json(out / "functionals_fit.json", summary)
    series = {k: [r[k] for r in rows] for k in header[1:]}
    harness.plot_loglog(ns, series, out / "functionals.svg", ylabel="error functional")
    return EXIT_OK


def cmd_weak_error(args, cfg, out):
    if args.ns:
        cfg["experiment.ns"] = args.ns
    if args.samples is not None:
        cfg["experiment.samples"] = args.samples
    if args.benchmark:
        cfg["experiment.benchmark"] = args.benchmark
    if args.functional:
        cfg["experiment.functional"] = args.functional
    exp = harness.ExperimentConfig.from_dict(cfg)
    report = harness.run_weak_error(exp)
    harness.write_report(report, out)
    fit = report.fit
    print(f"status={fit.status} slope={fit.slope} stderr={fit.slope_stderr}")
    if fit.status == "inconclusive":
        return EXIT_INCONCLUSIVE
    if fit.status == "contradicting":
        return EXIT_ACCURACY
    return EXIT_OK


def cmd_kernel_audit(args, cfg, out):
    kernel = KernelSpec.from_config(cfg)
    rep = audit_kernel_assumptions(kernel, args.T, args.theta, args.grid_size,
                                   ladder=args.ladder)
    payload = {"kernel": kernel.to_config(), "T": rep.T, "theta": rep.theta,
               "majorant_constant": rep.majorant_constant,
               "derivative_constant": rep.derivative_constant, "ns": rep.ns,
               "continuity": rep.continuity, "l2_distance": rep.l2_distance,
               "passed": rep.passed, "violations": rep.violations}
    _write_json(out / "kernel_audit.json", payload)
    print(json.dumps({"passed": rep.passed}, sort_keys=True))
    return EXIT_OK


COMMANDS = {"paths": cmd_paths, "refsim": cmd_refsim, "moments": cmd_moments,
            "functionals": cmd_functionals, "weak-error": cmd_weak_error,
            "kernel-audit": cmd_kernel_audit}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _set_threads(args.threads)
        cfg = _load_config(args)
        out = _out_dir(args)
        return COMMANDS[args.command](args, cfg, out)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _ACCURACY_ERRORS as exc:
        print(f"accuracy error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY


if __name__ == "__main__":
    sys.exit(main())
