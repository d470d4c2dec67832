"""
Generalized posterior calibration of the learning rate w.

Each round draws B bootstrap datasets, fits the sampler on every one at the
current w and records the fraction c whose credible region contains the
maximum partial likelihood estimate of the original data. w then moves by
(1/k)(c - (1 - alpha)) at round k, clamped to [GPC_W_MIN, GPC_W_MAX], until
|c - (1 - alpha)| <= tol or the round limit is hit.

The credible region is the product of per-coordinate equal-tailed intervals
at level 1 - alpha/P; a replicate covers when every coordinate is inside.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

import gs4cox
import random_streams
from chain import Chain, FitConfig, PriorSpec, SamplerException
from diagnostics import DiagnosticsError, percentile_interval
from mh_hessian import run_mh
from model_constants import ModelConstants, SamplerMethod, TieMethod
from partial_lik import PartialLikelihoodException, mple
from survival_data import SurvivalDataException, SurvivalDataset, bootstrap_resample


logger = logging.getLogger(__name__)


class CalibrationError(SamplerException):
    pass


#replicate failures that drop the replicate instead of aborting the round
_REPLICATE_ERRORS = (SurvivalDataException, PartialLikelihoodException, SamplerException, DiagnosticsError, np.linalg.LinAlgError)


def run_sampler(
    method: SamplerMethod,
    data: SurvivalDataset,
    cfg: FitConfig,
    ties: TieMethod = TieMethod.BRESLOW,
    apply_correction: bool = True,
    scale: Optional[float] = None,
) -> Tuple[Chain, Chain]:
    '''(uncorrected, final) chains for either sampler; MH has no correction so both are the same chain'''
    if method is SamplerMethod.GS4COX:
        return gs4cox.fit(data, cfg, ties=ties, apply_correction=apply_correction)
    report = run_mh(data, cfg, ties=ties, scale=scale)
    return report.chain, report.chain


@dataclass
class GpcConfig:
    '''
    inner_fit: template for every bootstrap fit; its learning rate and seed are
    overwritten per replicate. None builds N(0, 100 I) with 600 iterations and 200 burn-in.
    workers: threads for the replicates of one round (0 runs them in order)
    '''
    bootstrap_count: int = ModelConstants.GPC_BOOTSTRAP
    alpha: float = ModelConstants.GPC_ALPHA
    tol: float = ModelConstants.GPC_TOL
    max_rounds: int = ModelConstants.GPC_MAX_ROUNDS
    inner_fit: Optional[FitConfig] = None
    seed: int = 0
    initial_w: float = ModelConstants.LEARNING_RATE
    ties: TieMethod = TieMethod.BRESLOW
    workers: int = 0
    progress: bool = False

    def __post_init__(self):
        if int(self.bootstrap_count) != self.bootstrap_count or self.bootstrap_count < 1:
            raise CalibrationError(f"bootstrap count must be >= 1, got {self.bootstrap_count}")
        if not 0 < self.alpha < 1:
            raise CalibrationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.tol > 0:
            raise CalibrationError(f"tol must be > 0, got {self.tol}")
        if int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise CalibrationError(f"max rounds must be >= 1, got {self.max_rounds}")
        if not ModelConstants.GPC_W_MIN <= self.initial_w <= ModelConstants.GPC_W_MAX:
            raise CalibrationError(
                f"initial w must lie in [{ModelConstants.GPC_W_MIN}, {ModelConstants.GPC_W_MAX}], got {self.initial_w}"
            )
        if self.workers < 0:
            raise CalibrationError(f"workers must be >= 0, got {self.workers}")
        self.bootstrap_count = int(self.bootstrap_count)
        self.max_rounds = int(self.max_rounds)

    def fit_template(self, P: int) -> FitConfig:
        if self.inner_fit is not None:
            return self.inner_fit
        return FitConfig(
            prior=PriorSpec.isotropic(P),
            iterations=ModelConstants.GPC_INNER_ITERATIONS,
            burn_in=ModelConstants.GPC_INNER_BURN_IN,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bootstrap_count": self.bootstrap_count,
            "alpha": self.alpha,
            "tol": self.tol,
            "max_rounds": self.max_rounds,
            "seed": self.seed,
            "initial_w": self.initial_w,
            "ties": self.ties.method_name,
        }


@dataclass(frozen=True)
class CalibrationRound:
    round: int
    w: float
    coverage: float
    replicates_used: int

    def to_dict(self) -> Dict[str, Any]:
        return {"round": self.round, "w": self.w, "coverage": self.coverage, "replicates_used": self.replicates_used}


@dataclass(frozen=True)
class CalibrationResult:
    w: float
    converged: bool
    target: np.ndarray
    trace: List[CalibrationRound] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "w": self.w,
            "converged": self.converged,
            "target": [float(x) for x in self.target],
            "trace": [r.to_dict() for r in self.trace],
        }


def credible_region_contains(chain: Chain, target: np.ndarray, alpha: float) -> bool:
    '''Bonferroni product of equal-tailed intervals at level 1 - alpha/P'''
    draws = chain.post_burn_in()
    lo, hi = percentile_interval(draws, alpha / draws.shape[1])
    target = np.asarray(target, dtype=float).reshape(-1)
    return bool(np.all((lo <= target) & (target <= hi)))


def update_w(w: float, coverage: float, alpha: float, k: int) -> float:
    '''w + (1/k)(c - (1 - alpha)), clamped'''
    w_next = w + (coverage - (1.0 - alpha)) / k
    return float(np.clip(w_next, ModelConstants.GPC_W_MIN, ModelConstants.GPC_W_MAX))


def _replicate(data: SurvivalDataset, sampler: SamplerMethod, template: FitConfig, cfg: GpcConfig,
               target: np.ndarray, w: float, k: int, b: int) -> Optional[bool]:
    '''coverage indicator of one bootstrap fit, None when the replicate failed'''
    rng = random_streams.stream(cfg.seed, k, b)
    fit_cfg = template.with_learning_rate(w).with_seed(random_streams.child_seed(cfg.seed, k, b))
    try:
        boot = bootstrap_resample(data, rng)
        _, final = run_sampler(sampler, boot, fit_cfg, ties=cfg.ties)
        return credible_region_contains(final, target, cfg.alpha)
    except _REPLICATE_ERRORS as e:
        logger.info("[GPC] round %d replicate %d dropped: %s: %s", k, b, type(e).__name__, e)
        return None


def calibrate(data: SurvivalDataset, sampler: SamplerMethod, cfg: GpcConfig) -> CalibrationResult:
    try:
        target = mple(data, ties=cfg.ties)
    except PartialLikelihoodException as e:
        raise CalibrationError(f"MPLE on the original data failed: {e}") from e

    template = cfg.fit_template(data.P)
    nominal = 1.0 - cfg.alpha
    max_dropped = int(np.floor(ModelConstants.GPC_MAX_DROP_FRACTION * cfg.bootstrap_count))
    w = float(cfg.initial_w)
    trace: List[CalibrationRound] = []
    converged = False

    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 0 else None
    try:
        for k in tqdm(range(1, cfg.max_rounds + 1), desc=f"GPC {sampler.label}", disable=not cfg.progress):
            args = [(data, sampler, template, cfg, target, w, k, b) for b in range(cfg.bootstrap_count)]
            if executor is None:
                hits = [_replicate(*a) for a in args]
            else:
                hits = list(executor.map(lambda a: _replicate(*a), args))

            used = [h for h in hits if h is not None]
            dropped = cfg.bootstrap_count - len(used)
            if dropped > max_dropped or not used:
                raise CalibrationError(
                    f"round {k}: {dropped} of {cfg.bootstrap_count} bootstrap replicates failed "
                    f"(limit {max_dropped})"
                )

            coverage = sum(used) / len(used)
            trace.append(CalibrationRound(round=k, w=w, coverage=coverage, replicates_used=len(used)))
            logger.info("[GPC] round %d: w=%.6g coverage=%.4f (%d replicates)", k, w, coverage, len(used))

            if abs(coverage - nominal) <= cfg.tol:
                converged = True
                break
            w = update_w(w, coverage, cfg.alpha, k)
    finally:
        if executor is not None:
            executor.shutdown()

    logger.info("[GPC] %s w=%.6g after %d rounds (%s)", sampler.label, w, len(trace),
                "converged" if converged else "round limit")
    return CalibrationResult(w=w, converged=converged, target=target, trace=trace)
