"""Command line entry point ``ssc``.

Exit codes: 0 success, 2 when a run did not reach its target (DNF), 1 on
any error, including bad arguments.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import _accel
from .bench import (
    MixtureSpec,
    evaluate_pipelines,
    gen_mixture,
    grid_search,
    quantile_bandwidth_from,
    run_backend_bench,
    run_scaling_bench,
    run_speed_bench,
)
from .coding import code_all_lasso, code_all_mr
from .features import fisher_ratio, ratio_histogram
from .io import (
    ConfigError,
    MatrixFormatError,
    RunConfig,
    load_config,
    read_matrix,
    write_codes,
    write_config,
    write_matrix,
    write_table,
)
from .kernels import KernelSpec, kernel_l1_norm_estimate, pairwise_distances
from .theory import BoundParams, bound_report
from .trainer import TrainingError, build_weights, train

EXIT_OK, EXIT_ERROR, EXIT_DNF = 0, 1, 2

log = logging.getLogger("ssc")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for DNF here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# --------------------------------------------------------------------------
# shared helpers
# --------------------------------------------------------------------------


def _load(args, require) -> RunConfig:
    cfg = load_config(args.config, require=require)
    if args.seed is not None:
        cfg.values["seed"] = int(args.seed)
    return cfg


def _outdir(args, cfg: RunConfig | None = None) -> Path:
    out = Path(args.output_dir or (cfg["output_dir"] if cfg is not None else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mixture(cfg: RunConfig, seed: int) -> MixtureSpec:
    return MixtureSpec(int(cfg["bench.dim"]), float(cfg["bench.separation"]), int(cfg["bench.n_per_class"]), seed)


def _timestamps(cfg: RunConfig):
    p = cfg.resolve("timestamps")
    return None if p is None else read_matrix(p).ravel()


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _load(args, ("K", "lambda", "data"))
    X = read_matrix(cfg.resolve("data"))
    tc = cfg.train_config()
    res = train(X, None, tc, timestamps=_timestamps(cfg))
    out = _outdir(args, cfg)
    write_matrix(res.dictionary, out / "dictionary.csv")
    write_matrix(res.codes, out / "codes.csv")
    write_codes(res.codes, out / "codes.codes")
    res.history.to_csv(out / "history.csv")
    write_config(cfg, out / "config.toml")
    last = res.history.records[-1].rel_err if res.history.records else float("nan")
    print(f"status={res.history.status} iterations={len(res.history)} rel_err={last:.6g}")
    return EXIT_OK if res.history.status == "converged" else EXIT_DNF


def cmd_code(args) -> int:
    cfg = _load(args, ("K", "lambda", "data"))
    X = read_matrix(cfg.resolve("data"))
    D = read_matrix(args.dictionary)
    tc = cfg.train_config()
    if D.shape[0] != X.shape[0]:
        raise ValueError(f"dictionary has {D.shape[0]} rows, data has dimension {X.shape[0]}")
    W = build_weights(X, tc, _timestamps(cfg))
    status = EXIT_OK
    if tc.coder == "marginal":
        B = code_all_mr(X, D, W, tc.lam, hard_thresh=tc.hard_thresh)
    else:
        B, info = code_all_lasso(X, D, W, tc.lam, tol=tc.lasso_tol, max_iter=tc.lasso_max_iter)
        if not info.all_converged:
            print(f"lasso: {int((~info.converged).sum())} column(s) hit max_iter", file=sys.stderr)
            status = EXIT_DNF
    out = _outdir(args, cfg)
    write_matrix(B, out / "codes.csv")
    write_codes(B, out / "codes.codes")
    print(f"coded n={X.shape[1]} K={D.shape[1]} mean_nnz={np.count_nonzero(B) / B.shape[1]:.4g}")
    return status


def cmd_bound(args) -> int:
    kl1 = args.kernel_l1
    if kl1 is None:
        if args.data is None or args.h1 is None:
            raise ValueError("give --kernel-l1, or --data with --h1 to estimate it")
        kl1 = kernel_l1_norm_estimate(KernelSpec(args.family, args.h1), read_matrix(args.data))
    p = BoundParams(args.d, args.K, args.n, args.lam, args.gamma, kl1, args.t)
    rep = bound_report(p, args.eps, squared_loss=args.squared_loss)
    for msg in rep.pop("warnings"):
        print(f"warning: {msg}", file=sys.stderr)
    rep = {"kernel_l1": kl1, **rep}
    for k, v in rep.items():
        print(f"{k}={v!r}" if isinstance(v, float) else f"{k}={str(v).lower()}")
    write_table([{"quantity": k, "value": v} for k, v in rep.items()], _outdir(args) / "bound.csv")
    return EXIT_OK


def _pipeline_inputs(cfg: RunConfig, seed: int):
    if cfg.get("data") is not None:
        if cfg.get("labels") is None:
            raise ConfigError("'data' needs 'labels' for classification and Fisher scores")
        X = read_matrix(cfg.resolve("data"))
        y = read_matrix(cfg.resolve("labels")).ravel().astype(int)
        return X, y
    return gen_mixture(_mixture(cfg, seed))


def _pipeline(cfg: RunConfig, X, y, seed: int):
    tc = replace(cfg.train_config(), seed=seed)
    return evaluate_pipelines(
        X,
        y,
        tc,
        group_size=int(cfg["classifier.group_size"]),
        test_fraction=float(cfg["classifier.test_fraction"]),
        reg=float(cfg["classifier.reg"]),
        bandwidth_quantile=float(cfg["classifier.bandwidth_quantile"]),
        seed=seed,
    )


def cmd_fisher(args) -> int:
    cfg = _load(args, ("K", "lambda"))
    seed = int(cfg["seed"])
    X, y = _pipeline_inputs(cfg, seed)
    r = _pipeline(cfg, X, y, seed)
    fr = fisher_ratio(r.scores_ssc, r.scores_sc)
    out = _outdir(args, cfg)
    write_table(
        [
            {"dim": k, "score_sc": a, "score_ssc": b, "ratio": c}
            for k, (a, b, c) in enumerate(zip(r.scores_sc, r.scores_ssc, fr.ratio))
        ],
        out / "fisher_scores.csv",
    )
    ratio_histogram(fr.ratio, int(cfg["classifier.hist_bins"]), out / "fisher_ratio_hist.csv")
    med = float(np.nanmedian(fr.ratio)) if np.isfinite(fr.ratio).any() else float("nan")
    summary = {
        "accuracy_sc": r.accuracy_sc,
        "accuracy_ssc": r.accuracy_ssc,
        "median_ratio": med,
        "skipped": fr.skipped,
        "bandwidth": r.bandwidth,
    }
    write_table([summary], out / "fisher_summary.csv")
    print(" ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = _load(args, ("K", "lambda", "data"))
    X = read_matrix(cfg.resolve("data"))
    tc = cfg.train_config()
    lams = args.lambdas or [tc.lam]
    widths = args.bandwidths
    if args.bandwidth_quantiles:
        dist = pairwise_distances(X)
        widths = (widths or []) + [quantile_bandwidth_from(dist, q) for q in args.bandwidth_quantiles]
    widths = widths or [tc.kernel.h1]
    if tc.smoothing not in ("none", "feature"):
        raise ConfigError("grid search sweeps the feature-space bandwidth; use smoothing 'none' or 'feature'")
    rows = grid_search(X, tc, lams, widths)
    write_table(rows, _outdir(args, cfg) / "grid.csv")
    best = min(rows, key=lambda r: r["rel_err"])
    print(f"runs={len(rows)} best lambda={best['lambda']:g} h1={best['h1']:g} rel_err={best['rel_err']:.6g}")
    return EXIT_OK


def cmd_bench_speed(args) -> int:
    cfg = _load(args, ("K", "lambda"))
    tc = cfg.train_config()
    rep = run_speed_bench(
        _mixture(cfg, int(cfg["seed"])),
        K=tc.K,
        target_rel_err=float(cfg["bench.target_rel_err"]),
        repeats=int(cfg["bench.repeats"]),
        base=tc,
        bandwidth_quantile=float(cfg["bench.bandwidth_quantile"]),
    )
    rows = rep.rows()
    write_table(rows, _outdir(args, cfg) / "speed.csv")
    for r in rows:
        print(f"{r['method']:<10} mean={r['mean_time_s']:.4g}s std={r['std_time_s']:.3g}s "
              f"rel_err={r['rel_err']:.4g} dnf={r['dnf']}")
    return EXIT_DNF if rep.any_dnf else EXIT_OK


def cmd_bench_scaling(args) -> int:
    cfg = _load(args, ())
    res = run_scaling_bench(
        _mixture(cfg, int(cfg["seed"])),
        [int(k) for k in cfg["bench.K_values"]],
        lam=float(cfg["bench.scaling_lambda"]),
        lasso_tol=float(cfg["bench.scaling_lasso_tol"]),
        lasso_max_iter=int(cfg["bench.scaling_lasso_max_iter"]),
    )
    out = _outdir(args, cfg)
    write_table(res["rows"], out / "scaling.csv")
    write_table([{"mr_exponent": res["mr_exponent"], "lasso_exponent": res["lasso_exponent"]}], out / "exponents.csv")
    print(f"mr_exponent={res['mr_exponent']:.4f} lasso_exponent={res['lasso_exponent']:.4f}")
    capped = any(r["lasso_converged_frac"] < 1 for r in res["rows"])
    return EXIT_DNF if capped else EXIT_OK


def cmd_bench_accuracy(args) -> int:
    cfg = _load(args, ("K", "lambda"))
    base = int(cfg["seed"])
    n_seeds = 1 if cfg.get("data") is not None else int(cfg["bench.seeds"])
    rows = []
    for s in range(base, base + n_seeds):
        X, y = _pipeline_inputs(cfg, s)
        r = _pipeline(cfg, X, y, s)
        fr = r.ratio
        rows.append({
            "seed": s,
            "accuracy_sc": r.accuracy_sc,
            "accuracy_ssc": r.accuracy_ssc,
            "median_ratio": float(np.nanmedian(fr.ratio)),
            "skipped": fr.skipped,
        })
        log.info("seed %d: sc %.4f ssc %.4f", s, r.accuracy_sc, r.accuracy_ssc)
    med = {k: float(np.median([r[k] for r in rows])) for k in ("accuracy_sc", "accuracy_ssc", "median_ratio")}
    write_table(rows + [{"seed": "median", **med}], _outdir(args, cfg) / "accuracy.csv")
    print(" ".join(f"median_{k}={v:.4f}" for k, v in med.items()))
    return EXIT_OK


def cmd_bench_backends(args) -> int:
    rows = run_backend_bench(K=args.K, n=args.n, d=args.d, repeats=args.repeats, seed=args.seed or 0)
    write_table(rows, _outdir(args) / "backends.csv")
    for r in rows:
        print(f"{r['kernel']:<20} {r['backend']:<6} {r['time_s']:.4g}s")
    if not _accel.HAS_NUMBA:
        print("numba unavailable or disabled; numpy timings only", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=None, help="thread budget for numba and BLAS")
    common.add_argument("--output-dir", "-o", default=None, help="directory for CSV outputs")
    common.add_argument("--verbose", "-v", action="count", default=0)

    def with_config(p):
        p.add_argument("--config", "-c", required=True, help="TOML run config")
        return p

    parser = _Parser(prog="ssc", description="Smooth sparse coding tools")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = with_config(sub.add_parser("train", parents=[common], help="learn a dictionary and codes"))
    p.set_defaults(func=cmd_train)

    p = with_config(sub.add_parser("code", parents=[common], help="code data against a fixed dictionary"))
    p.add_argument("--dictionary", "-D", required=True, help="dictionary matrix (.csv or .bin)")
    p.set_defaults(func=cmd_code)

    p = sub.add_parser("bound", parents=[common], help="covering number and generalization gaps")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--kernel-l1", type=float, default=None)
    p.add_argument("--data", default=None, help="estimate the kernel L1 norm from this matrix")
    p.add_argument("--h1", type=float, default=None)
    p.add_argument("--family", default="tricube")
    p.add_argument("--squared-loss", action="store_true")
    p.set_defaults(func=cmd_bound)

    p = with_config(sub.add_parser("fisher", parents=[common], help="Fisher score ratios of SSC over SC"))
    p.set_defaults(func=cmd_fisher)

    p = with_config(sub.add_parser("grid", parents=[common], help="grid search over lambda and bandwidth"))
    p.add_argument("--lambdas", type=_floats, default=None, help="e.g. 1,5,20")
    p.add_argument("--bandwidths", type=_floats, default=None, help="absolute h1 values")
    p.add_argument("--bandwidth-quantiles", type=_floats, default=None, help="pairwise-distance quantiles")
    p.set_defaults(func=cmd_grid)

    bench = sub.add_parser("bench", help="synthetic benchmarks")
    bsub = bench.add_subparsers(dest="bench", required=True, parser_class=_Parser)
    for name, func, text in (
        ("speed", cmd_bench_speed, "coding time of the four coder/smoothing combinations"),
        ("scaling", cmd_bench_scaling, "coding-time exponents in K"),
        ("accuracy", cmd_bench_accuracy, "held-out accuracy of SC vs SSC over seeds"),
    ):
        with_config(bsub.add_parser(name, parents=[common], help=text)).set_defaults(func=func)
    p = bsub.add_parser("backends", parents=[common], help="numba vs numpy kernel timings")
    p.add_argument("--K", type=int, default=1024)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench_backends)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.verbose == 0:
        warnings.filterwarnings("ignore", module="numba")
    limits = contextlib.nullcontext()
    if args.threads is not None:
        if args.threads < 1:
            print("ssc: error: --threads must be >= 1", file=sys.stderr)
            return EXIT_ERROR
        _accel.set_num_threads(args.threads)
        limits = threadpool_limits(limits=args.threads)
    try:
        with limits:
            return args.func(args)
    except (ConfigError, MatrixFormatError, TrainingError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"ssc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
