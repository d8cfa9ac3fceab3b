"""
Varfit command line.

    varfit estimate --input FILE --response COL [--method tw|ms|rice|general] ...
    varfit simulate (--table1 | --cell "n,sigma2,g,estimator,rule") --reps R --seed S --out PATH
    varfit analyze --n N [--method tw|ms] [--optimal-L] [--identities] ...

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric precondition.
"""

import argparse
import logging
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from varfit.algorithms.analytics import (
    asymptotic_mse_ms,
    check_identities,
    efficiency_bound,
    optimal_L,
    optimal_mse_comparison,
    trend_J,
)
from varfit.algorithms.estimators import (
    attach_interval,
    estimate_gamma4,
    general_domain,
    muller_stadtmuller,
    pair_count_threshold,
    rescale_blocks,
    rice,
    select_bandwidth,
    tong_wang,
)
from varfit.algorithms.quadratic import (
    build_lag_matrix,
    build_ms_matrix,
    build_tw_matrix,
    chi_square_df,
    chi_square_interval,
    exact_mse,
)
from varfit.exceptions import DataError, PreconditionError, UsageError, VarfitError
from varfit.structures.banded import BandedSymmetric
from varfit.structures.records import NoiseMoments, RegressionMethod, Sample1D, VarianceEstimate
from varfit.utils.generators import MEAN_FUNCTIONS, get_mean_function
from varfit.utils.io import (
    dumps,
    load_dataset,
    write_estimates_csv,
    write_frame_csv,
    write_histogram_csv,
    write_matrix_csv,
    write_reports_json,
)
from varfit.utils.simulator import (
    SimConfig,
    compare_with_reference,
    format_reports,
    histogram_from_estimates,
    reports_frame,
    run_cell,
    run_table1,
    table1_wide,
)

logger = logging.getLogger("varfit")

EQUAL_SPACING_TOL = 1e-9
MINIMUM_BANDWIDTH = {"tw": 2, "ms": 3}


class VarfitArgumentParser(argparse.ArgumentParser):
    """Reports usage errors with exit code 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- estimate ---


def _is_equally_spaced(x: np.ndarray, tol: float = EQUAL_SPACING_TOL) -> bool:
    """True iff the sorted design is an arithmetic progression within tol * span."""
    span = float(x[-1] - x[0])
    if span <= 0:
        return False
    grid = x[0] + span * np.arange(len(x)) / (len(x) - 1)
    return bool(np.max(np.abs(x - grid)) <= tol * span)


def _lag_bandwidth(n: int, spec: str, minimum: int) -> int:
    rule = "sqrt" if spec == "auto" else spec
    if rule not in ("sqrt", "cbrt") and not rule.isdigit():
        raise UsageError(f"Invalid --bandwidth {spec!r}; expected auto, sqrt, cbrt or an integer")
    return select_bandwidth(n, rule, minimum=minimum)


def _general_bandwidth(points: np.ndarray, spec: str, as_lags: bool) -> float:
    """Squared-distance threshold; rules (and lag counts when as_lags) go through pair counts."""
    n = len(points)
    if spec in ("auto", "sqrt", "cbrt") or (as_lags and spec.isdigit()):
        return pair_count_threshold(points, _lag_bandwidth(n, spec, 2))
    try:
        value = float(spec)
    except ValueError:
        raise UsageError(f"Invalid --bandwidth {spec!r}") from None
    if not value > 0:
        raise UsageError(f"--bandwidth must be positive, got {spec}")
    return value


def _parse_blocks(spec: Optional[str], covariates: List[str]) -> Optional[List[List[int]]]:
    if spec is None:
        return None
    blocks = []
    for group in spec.split(";"):
        names = [name.strip() for name in group.split(",") if name.strip()]
        unknown = [name for name in names if name not in covariates]
        if unknown:
            raise UsageError(f"--blocks names unknown covariate(s) {unknown}")
        blocks.append([covariates.index(name) for name in names])
    return blocks


def _estimate_matrix(method: str, n: int, bandwidth: int) -> BandedSymmetric:
    if method == "tw":
        return build_tw_matrix(n, bandwidth)
    if method == "ms":
        return build_ms_matrix(n, bandwidth)
    return build_lag_matrix(n, 1)


def cmd_estimate(args: argparse.Namespace) -> int:
    covariates = [c.strip() for c in args.covariates.split(",")] if args.covariates else None
    data = load_dataset(args.input, args.response, covariates)
    method = args.method
    one_d = data.dimension == 1
    equal = one_d and _is_equally_spaced(data.points[:, 0])

    if method == "tw" and not equal:
        logger.warning("design is not an equally spaced line; using the general-domain estimator")
    if method in ("ms", "rice") and not one_d:
        raise DataError(f"--method {method} needs a single ordered covariate")
    if method == "ms" and not equal:
        raise DataError("--method ms needs an equally spaced design")
    if args.rescale and method != "general":
        logger.warning("--rescale only affects the general-domain estimator")

    matrix: Optional[BandedSymmetric] = None
    if method in ("tw", "ms") and equal:
        sample = Sample1D.equally_spaced(data.y)
        bandwidth = _lag_bandwidth(data.n, args.bandwidth, MINIMUM_BANDWIDTH[method])
        if method == "tw":
            est = tong_wang(sample, bandwidth, RegressionMethod(args.fit.upper()))
        else:
            est = muller_stadtmuller(sample, bandwidth)
        if args.dump_matrix or args.chi_square:
            matrix = _estimate_matrix(method, data.n, bandwidth)
    elif method == "rice":
        est = rice(data.y)
        if args.dump_matrix or args.chi_square:
            matrix = _estimate_matrix(method, data.n, 1)
    else:
        points = data.points
        if args.rescale:
            points = rescale_blocks(points, _parse_blocks(args.blocks, data.covariates))
        threshold = _general_bandwidth(points, args.bandwidth, as_lags=(method == "tw"))
        est = general_domain(points, data.y, threshold)
        if args.dump_matrix or args.chi_square:
            raise UsageError("--dump-matrix and --chi-square need a lag estimator (tw, ms, rice)")

    gamma4: Optional[float] = None
    if args.alpha is not None or args.gamma4 != "estimate":
        gamma4 = _resolve_gamma4(args.gamma4, data.y, est)
    if args.alpha is not None:
        est = attach_interval(est, gamma4, data.n, args.alpha)

    payload: Dict[str, Any] = {"n": data.n, "gamma4": gamma4, "estimate": est.to_dict()}
    if matrix is not None:
        if args.dump_matrix:
            write_matrix_csv(matrix, args.dump_matrix)
            logger.info("wrote matrix to %s", args.dump_matrix)
        if args.chi_square:
            est = replace(est, df=chi_square_df(matrix))
            payload["estimate"] = est.to_dict()
            payload["df"] = est.df
            if args.alpha is not None:
                payload["chi_square_interval"] = list(chi_square_interval(est, matrix, args.alpha))

    if args.json:
        print(dumps(payload))
    else:
        _print_estimate(est, payload)
    return 0


def _resolve_gamma4(spec: str, y: np.ndarray, est: VarianceEstimate) -> float:
    if spec == "estimate":
        return estimate_gamma4(y, est.value)
    try:
        value = float(spec)
    except ValueError:
        raise UsageError(f"--gamma4 must be a number or 'estimate', got {spec!r}") from None
    if not value > 1:
        raise UsageError(f"--gamma4 must exceed 1, got {value}")
    return value


def _print_estimate(est: VarianceEstimate, payload: Dict[str, Any]) -> None:
    print(f"method     : {est.method}")
    print(f"bandwidth  : {est.bandwidth:.6g}")
    print(f"sigma^2    : {est.value:.6g}" + (" (truncated)" if est.truncated else ""))
    print(f"raw value  : {est.raw_value:.6g}")
    if est.ci is not None:
        print(f"{100 * (1 - est.ci.alpha):g}% CI     : [{est.ci.lo:.6g}, {est.ci.hi:.6g}]")
    if "df" in payload:
        print(f"chi2 df    : {payload['df']:.6g}")
    if "chi_square_interval" in payload:
        lo, hi = payload["chi_square_interval"]
        print(f"chi2 CI    : [{lo:.6g}, {hi:.6g}]")


# --- simulate ---


def _parse_cell(spec: str, args: argparse.Namespace) -> SimConfig:
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 5:
        raise UsageError(f"--cell needs 'n,sigma2,g,estimator,rule', got {spec!r}")
    try:
        return SimConfig(
            n=int(parts[0]),
            sigma2=float(parts[1]),
            mean=parts[2],
            estimator=parts[3],
            bandwidth_rule=parts[4],
            reps=args.reps,
            master_seed=args.seed,
            alpha=args.alpha,
            keep_estimates=args.histogram,
            rounding=args.rounding,
        )
    except ValueError as exc:
        raise UsageError(f"Invalid --cell {spec!r}: {exc}") from exc


def _output_base(out: str) -> str:
    for suffix in (".csv", ".json"):
        if out.endswith(suffix):
            return out[: -len(suffix)]
    return out


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.reps < 1:
        raise UsageError(f"--reps must be positive, got {args.reps}")
    if args.seed < 0:
        raise UsageError(f"--seed must be nonnegative, got {args.seed}")
    base = _output_base(args.out)

    if args.table1:
        if args.reps < 100:
            raise UsageError("--table1 needs --reps >= 100")
        reports = run_table1(args.seed, args.reps)
        comparison = compare_with_reference(reports)
        write_frame_csv(reports_frame(reports), f"{base}.csv")
        write_frame_csv(table1_wide(reports), f"{base}_wide.csv")
        write_reports_json(
            reports, f"{base}.json", extra={"comparison": comparison.to_dict(orient="records")}
        )
        print(format_reports(reports))
        print(f"\n{int(comparison['within'].sum())}/{len(comparison)} cells within tolerance of the published values")
    else:
        config = _parse_cell(args.cell, args)
        report = run_cell(config)
        reports = [report]
        write_frame_csv(reports_frame(reports), f"{base}.csv")
        write_reports_json(reports, f"{base}.json")
        print(format_reports(reports))
        if args.histogram:
            hist = histogram_from_estimates(report.estimates, args.bins)
            write_histogram_csv(hist, f"{base}_histogram.csv")
            write_estimates_csv(report.estimates, f"{base}_estimates.csv")
            print(f"negative estimates: {hist.negative_count}/{config.reps}")
    logger.info("wrote reports with base %s", base)
    return 0


# --- analyze ---


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        noise = NoiseMoments(sigma2=args.sigma2, gamma3=args.gamma3, gamma4=args.gamma4)
    except ValueError as exc:
        raise UsageError(f"Invalid noise moments: {exc}") from exc
    n = args.n
    if n < 3:
        raise UsageError(f"--n must be at least 3, got {n}")
    method = args.method
    bandwidth = _lag_bandwidth(n, args.bandwidth, MINIMUM_BANDWIDTH[method])
    mean = get_mean_function(args.mean)
    g = mean.on_grid(n)

    result: Dict[str, Any] = {
        "n": n,
        "noise": {"sigma2": noise.sigma2, "gamma3": noise.gamma3, "gamma4": noise.gamma4, "rho": noise.rho},
        "mean": mean.name,
        "method": method,
        "bandwidth": bandwidth,
        "trend_J": trend_J(mean).J,
        "efficiency_bound": efficiency_bound(n, noise),
    }
    matrix = build_tw_matrix(n, bandwidth) if method == "tw" else build_ms_matrix(n, bandwidth)
    moments = exact_mse(matrix, g, noise)
    result["exact"] = {
        "bias": moments.bias,
        "variance": moments.variance,
        "mse": moments.mse,
        "rel_mse": n * moments.mse / (2.0 * noise.sigma2**2),
    }
    if method == "ms":
        result["asymptotic_mse"] = asymptotic_mse_ms(n, bandwidth, noise)
    if n >= 30:
        tw_opt, ms_opt, ratio = optimal_mse_comparison(n, noise)
        result["optimal_mse"] = {"tw": tw_opt, "ms": ms_opt, "second_order_ratio": ratio}
    if args.optimal_L:
        L = optimal_L(n, noise)
        result["optimal_L"] = L
        if 2 * L <= n:
            result["exact_mse_at_optimal_L"] = exact_mse(build_ms_matrix(n, L), g, noise).mse
    if args.chi_square:
        result["df"] = chi_square_df(matrix)
    if args.identities:
        m = bandwidth if method == "tw" else select_bandwidth(n, "sqrt", minimum=2)
        L = bandwidth if method == "ms" else None
        result["identities"] = check_identities(n, m, L).to_dict()

    print(dumps(result))
    return 0


# --- entry point ---


def build_parser() -> argparse.ArgumentParser:
    parser = VarfitArgumentParser(
        prog="varfit", description="Difference-based residual variance estimation."
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=VarfitArgumentParser)

    est = sub.add_parser("estimate", help="estimate sigma^2 from a CSV dataset")
    est.add_argument("--input", required=True)
    est.add_argument("--response", required=True)
    est.add_argument("--covariates", help="comma-separated covariate columns")
    est.add_argument("--method", choices=["tw", "ms", "rice", "general"], default="tw")
    est.add_argument("--bandwidth", default="auto", help="auto, sqrt, cbrt or a number")
    est.add_argument("--fit", choices=["wls", "ols", "gls"], default="wls", help="lag regression flavour")
    est.add_argument("--alpha", type=float)
    est.add_argument("--gamma4", default="3", help="3, 'estimate' or a value > 1")
    est.add_argument("--rescale", action="store_true", help="map covariate blocks to [0, 1]")
    est.add_argument("--blocks", help="covariate blocks for --rescale, e.g. 't1;lat,lon'")
    est.add_argument("--chi-square", action="store_true", help="report the scaled chi-square df")
    est.add_argument("--dump-matrix", metavar="PATH", help="write the estimator matrix as CSV")
    est.add_argument("--json", action="store_true")
    est.set_defaults(handler=cmd_estimate)

    sim = sub.add_parser("simulate", help="run Monte Carlo studies")
    target = sim.add_mutually_exclusive_group(required=True)
    target.add_argument("--table1", action="store_true", help="the 18 x 4 published study")
    target.add_argument("--cell", help="'n,sigma2,g,estimator,rule'")
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default="varfit_report")
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--histogram", action="store_true")
    sim.add_argument("--bins", type=int, default=20)
    sim.add_argument(
        "--rounding", choices=["half-up", "floor"], default="half-up",
        help="rounding of sqrt/cbrt bandwidths in --cell (--table1 always truncates)",
    )
    sim.set_defaults(handler=cmd_simulate)

    ana = sub.add_parser("analyze", help="exact and asymptotic diagnostics (JSON)")
    ana.add_argument("--n", type=int, required=True)
    ana.add_argument("--sigma2", type=float, default=1.0)
    ana.add_argument("--gamma3", type=float, default=0.0)
    ana.add_argument("--gamma4", type=float, default=3.0)
    ana.add_argument("--mean", choices=sorted(MEAN_FUNCTIONS), default="zero")
    ana.add_argument("--method", choices=["tw", "ms"], default="tw")
    ana.add_argument("--bandwidth", default="auto")
    ana.add_argument("--optimal-L", action="store_true")
    ana.add_argument("--identities", action="store_true")
    ana.add_argument("--chi-square", action="store_true")
    ana.set_defaults(handler=cmd_analyze)
    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, VarfitError):
        return exc.exit_code
    if isinstance(exc, FileNotFoundError):
        return DataError.exit_code
    return PreconditionError.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1

    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    try:
        return args.handler(args)
    except (VarfitError, FileNotFoundError, ValueError, ArithmeticError) as exc:
        print(f"varfit: error: {exc}", file=sys.stderr)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
