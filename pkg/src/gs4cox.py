"""
Gibbs sampler for the Cox model under the generalized posterior
prior x exp(w log L_CPL), with Polya-Gamma augmentation of every pair term.

One sweep:
  eta_q   = d_q' beta                              for all Q pairs
  omega_q ~ PG(1, eta_q)
  Lambda  = Sigma_0^-1 + w sum_q omega_q d_q d_q'
  beta    ~ N(Lambda^-1 (Sigma_0^-1 mu_0 + (w/2) sum_q d_q), Lambda^-1)

kappa = 1/2 for every pair, so the drift (w/2) sum_q d_q is fixed for the run.
The draw reuses the Cholesky factor of Lambda; the covariance is never formed.

After sampling, the chain is translated by -H_PL(b~)^-1 S_PL(b~) evaluated at
the post-burn-in mean b~, aligning it with the partial likelihood estimator.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

import random_streams
from chain import Chain, CorrectionError, FitConfig, NumericalError, PriorSpec
from model_constants import ModelConstants, SamplerMethod, TieMethod
from partial_lik import PartialLikelihoodException, newton_direction, score_hessian
from pg_dist import sample_pg1_batch
from survival_data import PairContrasts, SurvivalDataset, build_pair_contrasts


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianUpdate:
    '''the complete conditional N(mean, Lambda^-1) of beta given omega'''
    mean: np.ndarray
    precision: np.ndarray
    factor: np.ndarray  #lower Cholesky factor of the precision

    @property
    def covariance(self) -> np.ndarray:
        '''only formed on request (tests, reports)'''
        cov = linalg.cho_solve((self.factor, True), np.eye(self.mean.shape[0]))
        return 0.5 * (cov + cov.T)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.mean.shape[0])
        #L' x = z gives x with covariance (L L')^-1
        return self.mean + linalg.solve_triangular(self.factor, z, lower=True, trans="T")


# -----------------------
# Update pieces
# -----------------------

def weighted_scatter(contrasts: np.ndarray, omega: np.ndarray) -> np.ndarray:
    '''D' diag(omega) D'''
    return contrasts.T @ (contrasts * omega[:, None])


def gaussian_from_scatter(scatter: np.ndarray, contrast_sum: np.ndarray, prior: PriorSpec, w: float) -> GaussianUpdate:
    precision = prior.precision + w * scatter
    precision = 0.5 * (precision + precision.T)
    try:
        factor = linalg.cholesky(precision, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError("Cholesky of the conditional precision failed") from e
    rhs = prior.precision_mean + 0.5 * w * contrast_sum
    mean = linalg.cho_solve((factor, True), rhs)
    return GaussianUpdate(mean=mean, precision=precision, factor=factor)


def gaussian_update(pairs: PairContrasts, omega: np.ndarray, cfg: FitConfig) -> GaussianUpdate:
    '''conditional of beta for a given omega vector (one entry per pair)'''
    omega = np.asarray(omega, dtype=float).reshape(-1)
    if omega.shape[0] != pairs.Q:
        raise ValueError(f"omega has {omega.shape[0]} entries for Q={pairs.Q} pairs")
    return gaussian_from_scatter(weighted_scatter(pairs.contrasts, omega), pairs.contrast_sum, cfg.prior, cfg.learning_rate)


def gibbs_sweep(pairs: PairContrasts, beta: np.ndarray, cfg: FitConfig, rng: np.random.Generator) -> np.ndarray:
    '''one full sweep: all Q latent omegas, then beta'''
    eta = pairs.contrasts @ beta
    omega = sample_pg1_batch(eta, rng)
    return gaussian_update(pairs, omega, cfg).draw(rng)


def _block_scatter(pairs: PairContrasts, beta: np.ndarray, seed: int, sweep: int,
                   bounds: Sequence[Tuple[int, int]], executor: ThreadPoolExecutor) -> np.ndarray:
    '''omega draws and the scatter per fixed block, each block on its own (seed, sweep, block) stream'''

    def work(block: int) -> np.ndarray:
        start, stop = bounds[block]
        D = pairs.contrasts[start:stop]
        rng = random_streams.stream(seed, sweep, block)
        return weighted_scatter(D, sample_pg1_batch(D @ beta, rng))

    parts = list(executor.map(work, range(len(bounds))))
    #fixed reduction order keeps the result independent of the thread count
    total = np.zeros((pairs.P, pairs.P))
    for part in parts:
        total += part
    return total


# -----------------------
# Runs
# -----------------------

def run(pairs: PairContrasts, cfg: FitConfig, column_names: Optional[Sequence[str]] = None) -> Chain:
    '''
    M sweeps from beta^(0); wall_seconds covers the sweep loop only
    '''
    beta = cfg.initial_beta(pairs.P)
    samples = np.empty((cfg.iterations, pairs.P))

    t0 = time.perf_counter()
    if cfg.threads == 0:
        rng = random_streams.stream(cfg.seed)
        for m in range(cfg.iterations):
            beta = gibbs_sweep(pairs, beta, cfg, rng)
            samples[m] = beta
    else:
        bounds = list(pairs.blocks())
        with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
            for m in range(cfg.iterations):
                scatter = _block_scatter(pairs, beta, cfg.seed, m, bounds, executor)
                update = gaussian_from_scatter(scatter, pairs.contrast_sum, cfg.prior, cfg.learning_rate)
                beta = update.draw(random_streams.stream(cfg.seed, m, len(bounds)))
                samples[m] = beta
    wall = time.perf_counter() - t0

    if not np.all(np.isfinite(samples)):
        raise NumericalError("non-finite draw in the Gibbs chain")

    logger.info("[GS4COX] %d sweeps over Q=%d pairs in %.3fs (w=%g, threads=%d)",
                cfg.iterations, pairs.Q, wall, cfg.learning_rate, cfg.threads)
    return Chain(
        samples=samples,
        burn_in=cfg.burn_in,
        seed=cfg.seed,
        wall_seconds=wall,
        learning_rate=cfg.learning_rate,
        method=SamplerMethod.GS4COX.method_name,
        column_names=tuple(column_names) if column_names is not None else (),
    )


def correction_shift(data: SurvivalDataset, beta_tilde: np.ndarray, ties: TieMethod = TieMethod.BRESLOW) -> np.ndarray:
    '''-H_PL(b~)^-1 S_PL(b~)'''
    sh = score_hessian(data, beta_tilde, ties)
    return newton_direction(sh.hessian, sh.score)


def correct(chain: Chain, data: SurvivalDataset, ties: TieMethod = TieMethod.BRESLOW, strict: bool = False) -> Chain:
    '''
    translate every draw by the finite-sample correction; on a singular Hessian the
    chain comes back uncorrected with the reason recorded (or CorrectionError if strict)
    '''
    if chain.corrected:
        raise CorrectionError("chain is already corrected")

    beta_tilde = chain.posterior_mean()
    try:
        shift = correction_shift(data, beta_tilde, ties)
    except (PartialLikelihoodException, np.linalg.LinAlgError) as e:
        if strict:
            raise CorrectionError(f"finite-sample correction failed: {e}") from e
        logger.warning("[CORRECT] skipped, chain left uncorrected: %s", e)
        extra = dict(chain.extra)
        extra["correction_error"] = str(e)
        return Chain(
            samples=chain.samples, burn_in=chain.burn_in, seed=chain.seed, wall_seconds=chain.wall_seconds,
            learning_rate=chain.learning_rate, method=chain.method, column_names=chain.column_names, extra=extra,
        )

    logger.info("[CORRECT] shift %s", np.array2string(shift, precision=4))
    return chain.shifted(shift)


def fit(
    data: SurvivalDataset,
    cfg: FitConfig,
    ties: TieMethod = TieMethod.BRESLOW,
    apply_correction: bool = True,
    pairs: Optional[PairContrasts] = None,
    max_pairs: int = ModelConstants.MAX_PAIRS,
) -> Tuple[Chain, Chain]:
    '''(uncorrected, final) chains; final is the uncorrected chain when correction is off'''
    if pairs is None:
        pairs = build_pair_contrasts(data, max_pairs=max_pairs)
    raw = run(pairs, cfg, column_names=data.column_names)
    if not apply_correction:
        return raw, raw
    return raw, correct(raw, data, ties)
