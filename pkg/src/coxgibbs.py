# coxgibbs.py

'''
python src/coxgibbs.py simulate --n 300 --beta 1.0,0.5,-1.5,3.0 --seed 7 --out runs/sim.csv
python src/coxgibbs.py fit --data runs/sim.csv --method gs4cox --out-prefix runs/sim_gs4cox
python src/coxgibbs.py calibrate --data lung.csv --method mh --bootstrap 100 --out-prefix runs/lung_gpc
python src/coxgibbs.py bench --scenarios scenarios/default.txt --out runs/bench.csv
'''

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

import artifacts
import random_streams
from chain import FitConfig, FitConfigError, PriorError, PriorSpec
from data_loader import load_csv, split_covariate_list, write_csv
from diagnostics import build_fit_report, summarize
from gpc import GpcConfig, calibrate, run_sampler
from model_constants import ModelConstants, SamplerMethod, TieMethod, thread_count
from partial_lik import PartialLikelihoodException, confidence_intervals, mple
from scenario_processor import BETA_PRESETS, BenchScenario, load_scenarios, parse_beta, scenarios_from_flags
from synth_gen import SynthConfig, SynthConfigError, generate


logger = logging.getLogger("coxgibbs")

BENCH_COLUMNS = ("scenario", "rep", "method", "n", "w", "ess", "esr", "mean_abs_err_vs_mple", "wall_seconds", "error")


class UsageError(Exception):
    '''bad flag values found after argparse; exit code 2'''


# ----------------------------
# Flag parsing
# ----------------------------

def parse_float_list(s: str) -> List[float]:
    try:
        return [float(p) for p in s.split(',') if p.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'expected a comma list of numbers, got "{s}"') from e


def parse_int_list(s: str) -> List[int]:
    try:
        return [int(p) for p in s.split(',') if p.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f'expected a comma list of integers, got "{s}"') from e


def parse_beta_flag(s: str) -> Tuple[float, ...]:
    try:
        return parse_beta(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def parse_tie_flag(s: str) -> TieMethod:
    try:
        return TieMethod.parse(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def parse_method_flag(s: str) -> SamplerMethod:
    try:
        return SamplerMethod.parse(s)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="CSV with a time column, a status column and covariates")
    p.add_argument("--time-col", default=ModelConstants.LUNG_TIME_COL)
    p.add_argument("--status-col", default=ModelConstants.LUNG_STATUS_COL)
    p.add_argument("--event-code", type=int, required=True, help="status value meaning an event (1 for files written by simulate, 2 for lung)")
    p.add_argument("--covariates", type=split_covariate_list, default=None,
                   help="comma list (default: the lung covariates when present, else every other column)")


def add_chain_flags(p: argparse.ArgumentParser, iters: int, burnin: int) -> None:
    p.add_argument("--method", type=parse_method_flag, default=SamplerMethod.GS4COX, help="gs4cox | mh")
    p.add_argument("--iters", type=int, default=iters, help="total iterations M")
    p.add_argument("--burnin", type=int, default=burnin, help="burn-in m*")
    p.add_argument("--prior-var", type=float, default=ModelConstants.PRIOR_VARIANCE, help="Sigma_0 = prior_var * I, mu_0 = 0")
    p.add_argument("--ties", type=parse_tie_flag, default=TieMethod.BRESLOW, help="breslow | efron")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--quiet", action="store_true", help="no progress bars")

    ap = argparse.ArgumentParser(prog="coxgibbs", description="Bayesian Cox regression by Polya-Gamma Gibbs sampling")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="write a synthetic survival dataset")
    sim.add_argument("--n", type=int, default=300)
    sim.add_argument("--beta", type=parse_beta_flag, default=BETA_PRESETS["default"],
                     help=f"comma list or preset ({', '.join(BETA_PRESETS)})")
    sim.add_argument("--rounding", type=float, default=0.0, help="round observed times to multiples of this")
    sim.add_argument("--censor-rate", type=float, default=1.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output CSV path")

    fit = sub.add_parser("fit", parents=[common], help="sample the posterior and write a report")
    add_data_flags(fit)
    add_chain_flags(fit, ModelConstants.ITERATIONS, ModelConstants.BURN_IN)
    fit.add_argument("--w", type=float, default=ModelConstants.LEARNING_RATE, help="learning rate")
    fit.add_argument("--no-correction", action="store_true", help="gs4cox only: skip the finite-sample correction")
    fit.add_argument("--scale", type=float, default=None, help="mh only: proposal scale s (default 2.38/sqrt(P))")
    fit.add_argument("--alpha", type=float, default=0.05, help="credible / confidence level is 1 - alpha")
    fit.add_argument("--acf-lags", type=int, default=0, help="also write <prefix>.acf.csv up to this lag")
    fit.add_argument("--out-prefix", required=True)

    cal = sub.add_parser("calibrate", parents=[common], help="choose w by generalized posterior calibration")
    add_data_flags(cal)
    add_chain_flags(cal, ModelConstants.GPC_INNER_ITERATIONS, ModelConstants.GPC_INNER_BURN_IN)
    cal.add_argument("--bootstrap", type=int, default=ModelConstants.GPC_BOOTSTRAP)
    cal.add_argument("--alpha", type=float, default=ModelConstants.GPC_ALPHA)
    cal.add_argument("--tol", type=float, default=ModelConstants.GPC_TOL)
    cal.add_argument("--max-rounds", type=int, default=ModelConstants.GPC_MAX_ROUNDS)
    cal.add_argument("--w0", type=float, default=ModelConstants.LEARNING_RATE, help="starting learning rate")
    cal.add_argument("--out-prefix", required=True)

    bench = sub.add_parser("bench", parents=[common], help="ESS / ESR table over a scenario grid")
    bench.add_argument("--scenarios", nargs="*", default=None, help="scenario files (see scenarios/)")
    bench.add_argument("--n", type=parse_int_list, default=None, help="comma list of sample sizes")
    bench.add_argument("--w", type=parse_float_list, default=None, help="comma list of learning rates")
    bench.add_argument("--beta-preset", nargs="*", default=None, help=f"presets ({', '.join(BETA_PRESETS)})")
    bench.add_argument("--rounding", type=parse_float_list, default=None, help="comma list of rounding parameters")
    bench.add_argument("--reps", type=int, default=1)
    bench.add_argument("--iters", type=int, default=ModelConstants.ITERATIONS)
    bench.add_argument("--burnin", type=int, default=ModelConstants.BURN_IN)
    bench.add_argument("--methods", type=lambda s: [parse_method_flag(p) for p in s.split(',') if p.strip()],
                       default=[SamplerMethod.GS4COX, SamplerMethod.MH], help="comma list, default gs4cox,mh")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", required=True, help="output CSV path")
    return ap


# ----------------------------
# Shared pieces
# ----------------------------

def setup_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format="%(message)s", stream=sys.stderr, force=True)


def show_progress(args: argparse.Namespace) -> bool:
    return not args.quiet and sys.stderr.isatty()


def fit_config_from_args(args: argparse.Namespace, P: int, w: float, threads: int) -> FitConfig:
    try:
        return FitConfig(
            prior=PriorSpec.isotropic(P, variance=args.prior_var),
            iterations=args.iters,
            burn_in=args.burnin,
            learning_rate=w,
            seed=args.seed,
            threads=threads,
        )
    except (FitConfigError, PriorError) as e:
        raise UsageError(str(e)) from e


def check_chain_flags(args: argparse.Namespace) -> None:
    '''the checks that do not need the data'''
    if args.iters < 1:
        raise UsageError(f"--iters must be >= 1, got {args.iters}")
    if not 0 <= args.burnin < args.iters:
        raise UsageError(f"--burnin must satisfy 0 <= burnin < iters, got {args.burnin} with --iters {args.iters}")
    if not args.prior_var > 0:
        raise UsageError(f"--prior-var must be > 0, got {args.prior_var}")
    if not 0 < args.alpha < 1:
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")


def load_data(args: argparse.Namespace):
    return load_csv(
        args.data,
        time_col=args.time_col,
        status_col=args.status_col,
        covariate_cols=args.covariates,
        status_event_code=args.event_code,
    )


def data_config(args: argparse.Namespace, data) -> Dict[str, Any]:
    return {
        "path": args.data,
        "time_col": args.time_col,
        "status_col": args.status_col,
        "event_code": args.event_code,
        "covariates": list(data.column_names),
        "n": data.n,
    }


# ----------------------------
# Subcommands
# ----------------------------

def cmd_simulate(args: argparse.Namespace) -> Dict[str, str]:
    try:
        cfg = SynthConfig(n=args.n, beta0=args.beta, rounding=args.rounding, censor_rate=args.censor_rate, seed=args.seed)
    except SynthConfigError as e:
        raise UsageError(str(e)) from e

    data = generate(cfg)
    write_csv(data, args.out)

    stem = args.out[:-4] if args.out.endswith(".csv") else args.out
    manifest = artifacts.RunManifest(
        subcommand="simulate", config=cfg.to_dict(), outputs={"data": args.out}, seed=cfg.seed,
    )
    manifest.write(f"{stem}.manifest.json")
    print(f"[SIM] wrote {args.out}: n={data.n}, P={data.P}, {int(data.events.sum())} events")
    return {"prefix": stem}


def cmd_fit(args: argparse.Namespace) -> Dict[str, str]:
    check_chain_flags(args)
    if args.acf_lags < 0:
        raise UsageError(f"--acf-lags must be >= 0, got {args.acf_lags}")
    if args.no_correction and args.method is not SamplerMethod.GS4COX:
        raise UsageError("--no-correction only applies to --method gs4cox")
    if args.scale is not None and args.method is not SamplerMethod.MH:
        raise UsageError("--scale only applies to --method mh")
    if not args.w > 0:
        raise UsageError(f"--w must be > 0, got {args.w}")

    paths = artifacts.artifact_paths(args.out_prefix)
    data = load_data(args)
    cfg = fit_config_from_args(args, data.P, args.w, thread_count())
    corrects = args.method.corrects and not args.no_correction

    raw, final = run_sampler(args.method, data, cfg, ties=args.ties, apply_correction=corrects, scale=args.scale)

    summary = summarize(final, alpha=args.alpha, acf_lags=args.acf_lags)
    precorrection = summarize(raw, alpha=args.alpha) if final is not raw else None

    #the frequentist fit is reported alongside; its failure does not fail the run
    try:
        beta_hat = mple(data, ties=args.ties)
        beta_ci = confidence_intervals(data, beta_hat, alpha=args.alpha, ties=args.ties)
    except PartialLikelihoodException as e:
        logger.warning("[FIT] MPLE unavailable: %s", e)
        beta_hat, beta_ci = None, None

    config = {
        "method": args.method.method_name,
        "ties": args.ties.method_name,
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "learning_rate": cfg.learning_rate,
        "prior_variance": args.prior_var,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "correction": corrects,
        "scale": args.scale,
        "alpha": args.alpha,
        "data": data_config(args, data),
    }
    outputs = {"report": paths["report"], "samples": paths["samples"], "sidecar": paths["sidecar"]}
    if args.acf_lags > 0:
        outputs["acf"] = paths["acf"]
    manifest = artifacts.RunManifest(
        subcommand="fit", config=config, inputs={"data": args.data}, outputs=outputs, seed=cfg.seed,
    )

    report = build_fit_report(args.method.label, final, summary, config, precorrection, beta_hat, beta_ci)
    report["manifest_hash"] = manifest.hash

    artifacts.write_samples(final, paths["samples"])
    artifacts.write_sidecar(final, paths["sidecar"], manifest.hash)
    if args.acf_lags > 0:
        artifacts.write_autocorrelation(summary.autocorr, final.column_names, paths["acf"])
    artifacts.write_json(paths["report"], report)
    manifest.write(paths["manifest"])

    print(f"[FIT] {args.method.label}: {', '.join(f'{c}={m:.4f}' for c, m in zip(final.column_names, summary.posterior_mean))}")
    if summary.esr is not None:
        print(f"[FIT] ESS {summary.ess_avg:.2f}, ESR {summary.esr:.2f}/s")
    elif not summary.ess_defined:
        print("[FIT] ESS undefined (constant chain)")
    print(f"[FIT] wrote {paths['report']}")
    return {"prefix": args.out_prefix}


def cmd_calibrate(args: argparse.Namespace) -> Dict[str, str]:
    check_chain_flags(args)
    if args.bootstrap < 1:
        raise UsageError(f"--bootstrap must be >= 1, got {args.bootstrap}")
    if args.max_rounds < 1:
        raise UsageError(f"--max-rounds must be >= 1, got {args.max_rounds}")
    if not args.tol > 0:
        raise UsageError(f"--tol must be > 0, got {args.tol}")
    if not ModelConstants.GPC_W_MIN <= args.w0 <= ModelConstants.GPC_W_MAX:
        raise UsageError(f"--w0 must lie in [{ModelConstants.GPC_W_MIN}, {ModelConstants.GPC_W_MAX}], got {args.w0}")

    paths = artifacts.artifact_paths(args.out_prefix)
    data = load_data(args)
    inner = fit_config_from_args(args, data.P, args.w0, 0)
    cfg = GpcConfig(
        bootstrap_count=args.bootstrap,
        alpha=args.alpha,
        tol=args.tol,
        max_rounds=args.max_rounds,
        inner_fit=inner,
        seed=args.seed,
        initial_w=args.w0,
        ties=args.ties,
        workers=thread_count(),
        progress=show_progress(args),
    )

    result = calibrate(data, args.method, cfg)

    config = cfg.to_dict()
    config["method"] = args.method.method_name
    config["inner_fit"] = {"iterations": inner.iterations, "burn_in": inner.burn_in, "prior_variance": args.prior_var}
    config["data"] = data_config(args, data)
    manifest = artifacts.RunManifest(
        subcommand="calibrate", config=config, inputs={"data": args.data},
        outputs={"report": paths["report"]}, seed=args.seed,
    )

    report: Dict[str, Any] = {"method": args.method.label}
    report.update(result.to_dict())
    report["config"] = config
    report["manifest_hash"] = manifest.hash
    artifacts.write_json(paths["report"], report)
    manifest.write(paths["manifest"])

    print(f"[GPC] {args.method.label}: w={result.w:.4f} after {len(result.trace)} round(s)"
          f"{'' if result.converged else ' (round limit)'}")
    print(f"[GPC] wrote {paths['report']}")
    return {"prefix": args.out_prefix}


def bench_cell(scenario: BenchScenario, index: int, rep: int, method: SamplerMethod, seed: int) -> Dict[str, Any]:
    '''one (scenario, replicate, method) row; a failure fills the error column instead of raising'''
    row: Dict[str, Any] = {"scenario": scenario.name, "rep": rep, "method": method.label, "n": scenario.n, "w": scenario.w}
    try:
        data_seed = random_streams.child_seed(seed, index, rep)
        data = generate(SynthConfig(n=scenario.n, beta0=scenario.beta0, rounding=scenario.rounding,
                                    censor_rate=scenario.censor_rate, seed=data_seed))
        cfg = FitConfig(
            prior=PriorSpec.isotropic(data.P),
            iterations=scenario.iterations,
            burn_in=scenario.burn_in,
            learning_rate=scenario.w,
            seed=random_streams.child_seed(seed, index, rep, 1),
        )
        beta_hat = mple(data, ties=scenario.ties)
        _, final = run_sampler(method, data, cfg, ties=scenario.ties)
        summary = summarize(final)
        row.update({
            "ess": summary.ess_avg,
            "esr": summary.esr,
            "mean_abs_err_vs_mple": float(np.mean(np.abs(summary.posterior_mean - beta_hat))),
            "wall_seconds": final.wall_seconds,
        })
    except Exception as e:
        logger.warning("[BENCH] %s rep %d %s failed: %s: %s", scenario.name, rep, method.label, type(e).__name__, e)
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def cmd_bench(args: argparse.Namespace) -> Dict[str, str]:
    if args.reps < 1:
        raise UsageError(f"--reps must be >= 1, got {args.reps}")
    if not 0 <= args.burnin < args.iters:
        raise UsageError(f"--burnin must satisfy 0 <= burnin < iters, got {args.burnin} with --iters {args.iters}")
    if not args.methods:
        raise UsageError("--methods is empty")

    try:
        if args.scenarios:
            scenarios: List[BenchScenario] = []
            for path in args.scenarios:
                scenarios.extend(load_scenarios(path))
        else:
            scenarios = scenarios_from_flags(
                args.n or [300], args.w or [ModelConstants.LEARNING_RATE], args.beta_preset or ["default"],
                args.rounding or [0.0], args.reps, iterations=args.iters, burn_in=args.burnin,
            )
    except ValueError as e:
        raise UsageError(str(e)) from e

    cells = [(sc, i, r, m) for i, sc in enumerate(scenarios) for r in range(sc.reps) for m in args.methods]
    logger.info("[BENCH] %d scenario(s), %d cell(s)", len(scenarios), len(cells))

    t0 = time.perf_counter()
    workers = max(1, thread_count())
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(bench_cell, sc, i, r, m, args.seed) for sc, i, r, m in cells]
        rows = [f.result() for f in tqdm(futures, desc="bench", disable=not show_progress(args))]

    artifacts.write_rows(rows, BENCH_COLUMNS, args.out)
    stem = args.out[:-4] if args.out.endswith(".csv") else args.out
    artifacts.RunManifest(
        subcommand="bench",
        config={"scenarios": [s.to_dict() for s in scenarios], "methods": [m.method_name for m in args.methods]},
        outputs={"table": args.out},
        seed=args.seed,
    ).write(f"{stem}.manifest.json")

    failed = sum(1 for r in rows if r.get("error"))
    print(f"[BENCH] {len(rows)} rows ({failed} failed) in {time.perf_counter() - t0:.1f}s, wrote {args.out}")
    return {"prefix": stem}


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "calibrate": cmd_calibrate,
    "bench": cmd_bench,
}


def error_prefix(args: argparse.Namespace) -> Optional[str]:
    if getattr(args, "out_prefix", None):
        return args.out_prefix
    out = getattr(args, "out", None)
    if out:
        return out[:-4] if out.endswith(".csv") else out
    return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    '''parse and run; returns the exit code'''
    ap = build_parser()
    args = ap.parse_args(argv)  #argparse exits with 2 on its own errors
    setup_logging(args.log_level)

    try:
        COMMANDS[args.command](args)
    except UsageError as e:
        ap.print_usage(sys.stderr)
        print(f"coxgibbs {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        payload = artifacts.error_payload(e)
        prefix = error_prefix(args)
        if prefix is not None:
            try:
                artifacts.write_error(f"{prefix}.error.json", e)
            except OSError:
                logger.exception("[ERROR] could not write the error file")
        logger.debug("[ERROR] traceback", exc_info=True)
        print(json.dumps(payload))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
