"""Command-line interface: ``dyncomp {synth,fit,transform,pi,eval}``.

Every run writes ``<command>_config.json`` into ``--out-dir``. Passing that
file back through ``--config`` reproduces the run.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .baselines import cca, pca, sfa
from .core import mean_center
from .covariance import CrossCovSet, crosscov_from_data, estimate_crosscov, project_crosscov
from .errors import DyncompError, FitFailureError, InvalidArgumentError
from .evaluation import EvalSpec, lagged_regression_eval
from .optim import FitOptions, fit_dca
from .predinfo import gaussian_lagged_mi, mi_knn, pi_freq_domain, pi_time_domain
from .synth import KERNELS, LorenzParams, NoiseSpec, embed_noisy, gp_generate, lorenz_generate

logger = logging.getLogger("dyncomp")

FIT_METHODS = {
    "dca": "joint_time_domain",
    "dca-deflate": "deflation_time_domain",
    "dca-fft-deflate": "deflation_freq_domain",
    "pca": None,
    "sfa": None,
    "cca": None,
}
RESULT_COLUMNS = ("method", "d", "T", "lag", "fold", "r2")
# checked after --config is applied so a config file alone can supply them
REQUIRED = {
    "fit": ("input", "d"),
    "transform": ("input", "projection"),
    "eval": ("features", "targets"),
}


def _apply_thread_cap():
    cap = os.environ.get("DYNCOMP_THREADS")
    if not cap:
        return
    try:
        import numba
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))
    except ImportError:
        pass
    except ValueError:
        raise InvalidArgumentError(f"DYNCOMP_THREADS must be an integer, got {cap!r}") from None


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_synth(args, out):
    stem = Path(args.output).stem
    sidecar = {"generator": args.generator, "seed": args.seed, "steps": args.steps}
    if args.generator in ("lorenz", "lorenz-embed"):
        params = LorenzParams(args.sigma, args.beta, args.rho, args.dt, args.downsample)
        latent = lorenz_generate(params, args.steps, seed=args.seed, transient=args.transient)
        sidecar["lorenz"] = vars(params)
        if args.generator == "lorenz":
            series = latent
        else:
            noise = NoiseSpec(1.0, args.d_noise, args.seed)
            series, W = embed_noisy(latent, args.dim, noise, snr=args.snr, seed=args.seed)
            sidecar.update(dim=args.dim, snr=args.snr, d_noise=args.d_noise)
            io.write_projection(out / "embedding.csv", W)
            io.write_timeseries(out / f"{stem}_latent.csv", latent)
    else:
        series = gp_generate(args.kernel, args.tau, args.steps, seed=args.seed)
        sidecar.update(kernel=args.kernel, tau=args.tau)
    io.write_timeseries(out / args.output, series)
    sidecar["n_channels"] = series.n_channels
    sidecar["dt"] = series.dt
    io.write_json(out / f"{stem}.json", sidecar)
    print(f"wrote {out / args.output} ({series.n_steps} x {series.n_channels})")


def _baseline_report(method, X, d, T, lag):
    covs = estimate_crosscov(X, max(2 * T, lag + 1))
    C0, Cl = np.array(covs[0]), np.array(covs[lag])
    report = {"method": method, "d": d, "T": T, "lag": lag, "n": covs.n}
    if method == "cca":
        U, V = cca(C0, Cl, d)
        report["pi_nats"] = gaussian_lagged_mi(C0, Cl, U.matrix, V.matrix)
        report["pi_definition"] = f"I(U^T x_t; V^T x_(t+{lag}))"
        return U, report, V
    proj = pca(C0, d) if method == "pca" else sfa(C0, Cl, d)
    report["pi_nats"] = pi_time_domain(project_crosscov(covs, proj), T).value
    report["pi_definition"] = f"time-domain predictive information, T={T}"
    return proj, report, None


def cmd_fit(args, out):
    series = io.read_timeseries(args.input)
    X = mean_center(series)
    method = args.method
    if FIT_METHODS[method] is None:
        if args.T is not None:
            logger.warning("%s does not use T; it only sets the window of the reported pi_nats",
                           method)
        proj, report, future = _baseline_report(method, X, args.d, args.T or 1, args.lag)
        io.write_projection(out / "projection.csv", proj)
        if future is not None:
            io.write_projection(out / "projection_future.csv", future)
        io.write_json(out / "report.json", report)
        print(f"{method}: pi_nats = {report['pi_nats']:.10g}")
        return
    T = args.T or 1
    opts = FitOptions(T=T, d=args.d, n_restarts=args.restarts, penalty_lambda=args.penalty_lambda,
                      max_iter=args.max_iter, grad_tol=args.grad_tol, seed=args.seed,
                      method=FIT_METHODS[method], whiten=args.whiten)
    covs = estimate_crosscov(X, 2 * T)
    try:
        fit = fit_dca(covs, opts)
    except FitFailureError as exc:
        io.write_json(out / "report.json", {"method": method, "error": str(exc),
                                            "diagnostics": exc.diagnostics})
        raise
    io.write_projection(out / "projection.csv", fit.projection)
    report = fit.to_dict(include_traces=args.traces)
    report["cli_method"] = method
    io.write_json(out / "report.json", report)
    print(f"{method}: pi_nats = {fit.pi_nats:.10g}")


def cmd_transform(args, out):
    series = io.read_timeseries(args.input)
    proj = io.read_projection(args.projection)
    if proj.n != series.n_channels:
        raise InvalidArgumentError(
            f"projection has {proj.n} rows but the input has {series.n_channels} channels")
    io.write_csv(out / args.output, series.data @ proj.matrix)
    print(f"wrote {out / args.output} ({series.n_steps} x {proj.d})")


def _windows(data, T):
    """Stacked past/future windows of length T, each flattened over channels."""
    n = data.shape[1]
    w = np.lib.stride_tricks.sliding_window_view(data, 2 * T, axis=0)  # (N, n, 2T)
    past = w[:, :, :T].transpose(0, 2, 1).reshape(-1, T * n)
    future = w[:, :, T:].transpose(0, 2, 1).reshape(-1, T * n)
    return past, future


def cmd_pi(args, out):
    if (args.input is None) == (args.covs is None):
        raise InvalidArgumentError("give exactly one of --input or --covs")
    T = args.T
    if args.covs is not None:
        covs = CrossCovSet.load(args.covs)
        if args.method == "time":
            est = pi_time_domain(covs, T, regularize=args.regularize)
        elif args.method == "freq":
            if covs.n != 1:
                raise InvalidArgumentError(
                    f"frequency-domain estimate needs 1 channel, covariances have {covs.n}")
            est = pi_freq_domain(autocov=covs.lags[:, 0, 0], T=T, window_fn=args.window)
        else:
            raise InvalidArgumentError("the knn estimator needs samples (--input)")
    else:
        series = io.read_timeseries(args.input)
        if args.method == "time":
            est = pi_time_domain(crosscov_from_data(series, T), T, regularize=args.regularize)
        elif args.method == "freq":
            if series.n_channels != 1:
                raise InvalidArgumentError(
                    f"frequency-domain estimate needs 1 channel, input has {series.n_channels}")
            est = pi_freq_domain(series.data[:, 0], T=T, window_fn=args.window)
        else:
            past, future = _windows(mean_center(series).data, T)
            est = mi_knn(past, future, k=args.k)
    io.write_json(out / "pi.json", est.to_dict())
    print(f"{est.method}: {est.value:.10g} nats")


def _parse_lags(text):
    try:
        lags = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise InvalidArgumentError(f"--lags must be comma-separated integers, got {text!r}") from None
    if not lags:
        raise InvalidArgumentError("--lags is empty")
    return lags


def cmd_eval(args, out):
    feats = io.read_timeseries(args.features)
    targs = io.read_timeseries(args.targets)
    rows, summary = [], {"method": args.label, "d": feats.n_channels, "T": args.T,
                         "folds": args.folds, "history": args.history, "mean_r2": {}}
    for lag in _parse_lags(args.lags):
        spec = EvalSpec(n_folds=args.folds, history_bins=args.history, lag_bins=lag,
                        ridge_alpha=args.ridge, target=args.target,
                        segment_length=args.segment_length)
        res = lagged_regression_eval(feats, targs, spec)
        for k, r2 in enumerate(res.fold_r2):
            rows.append((args.label, feats.n_channels, "" if args.T is None else args.T,
                         lag, k, repr(float(r2))))
        summary["mean_r2"][str(lag)] = res.mean_r2
    with open(out / "results.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        w.writerows(rows)
    io.write_json(out / "summary.json", summary)
    for lag, r2 in summary["mean_r2"].items():
        print(f"lag {lag}: mean R^2 = {r2:.6f}")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out-dir", default=".", help="output directory (default .)")
    common.add_argument("--config", help="JSON file whose keys override command-line flags")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="dyncomp", description="Predictive-information subspaces of multivariate time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic data")
    p.add_argument("generator", choices=["lorenz", "lorenz-embed", "gp"])
    p.add_argument("--steps", type=int, default=10000)
    p.add_argument("--transient", type=int, default=1000)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--beta", type=float, default=8.0 / 3.0)
    p.add_argument("--rho", type=float, default=28.0)
    p.add_argument("--dt", type=float, default=5e-3)
    p.add_argument("--downsample", type=int, default=5)
    p.add_argument("--dim", type=int, default=30, help="ambient dimension for lorenz-embed")
    p.add_argument("--snr", type=float, default=1.0)
    p.add_argument("--d-noise", type=float, default=7.0)
    p.add_argument("--kernel", choices=KERNELS, default="squared_exponential")
    p.add_argument("--tau", type=float, default=4.0)
    p.add_argument("--output", default="data.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit", parents=[common], help="fit a projection")
    p.add_argument("--input")
    p.add_argument("--method", choices=list(FIT_METHODS), default="dca")
    p.add_argument("-d", type=int)
    p.add_argument("-T", type=int, default=None, help="window length (DCA; default 1)")
    p.add_argument("--lag", type=int, default=1, help="covariance lag for sfa/cca (default 1)")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--penalty-lambda", type=float, default=10.0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--whiten", action="store_true", help="optimize in C0-whitened coordinates")
    p.add_argument("--traces", action="store_true", help="include loss/PI traces in the report")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("transform", parents=[common], help="project data")
    p.add_argument("--input")
    p.add_argument("--projection")
    p.add_argument("--output", default="projected.csv")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("pi", parents=[common], help="estimate predictive information")
    p.add_argument("--input")
    p.add_argument("--covs", help="directory written by CrossCovSet.save")
    p.add_argument("--method", choices=["time", "freq", "knn"], default="time")
    p.add_argument("-T", type=int, default=1)
    p.add_argument("--window", choices=["hann", "none"], default="hann")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--regularize", action="store_true")
    p.set_defaults(func=cmd_pi)

    p = sub.add_parser("eval", parents=[common], help="cross-validated lagged decoding")
    p.add_argument("--features")
    p.add_argument("--targets")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--history", type=int, default=3)
    p.add_argument("--lags", default="0", help="comma-separated lags in bins")
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--target", choices=["auxiliary", "self_forecast"], default="auxiliary")
    p.add_argument("--segment-length", type=int, default=None)
    p.add_argument("--label", default="features", help="method name for the results table")
    p.add_argument("-T", type=int, default=None, help="window length recorded in the table")
    p.set_defaults(func=cmd_eval)
    return parser


def _resolve(parser, args):
    if not args.config:
        return args
    with open(args.config) as f:
        overrides = json.load(f)
    command = overrides.pop("command", args.command)
    if command != args.command:
        raise InvalidArgumentError(
            f"config is for '{command}' but the command is '{args.command}'")
    valid = set(vars(args))
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if attr not in valid or attr in ("func", "config"):
            raise InvalidArgumentError(f"unknown config key {key!r}")
        setattr(args, attr, value)
    return args


def _check_required(parser, args):
    missing = [name for name in REQUIRED.get(args.command, ()) if getattr(args, name) is None]
    if missing:
        flags = ", ".join("-d" if m == "d" else "--" + m for m in missing)
        parser.error(f"{args.command}: missing required option(s): {flags}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args = _resolve(parser, args)
        _check_required(parser, args)
        _apply_thread_cap()
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        resolved = {k: v for k, v in vars(args).items()
                    if k not in ("func", "config", "out_dir", "verbose")}
        io.write_json(out / f"{args.command}_config.json", resolved)
        args.func(args, out)
    except (DyncompError, OSError, ValueError) as exc:
        print(f"dyncomp {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
