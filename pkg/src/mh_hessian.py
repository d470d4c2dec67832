"""
Random-walk Metropolis-Hastings on the generalized posterior
prior(beta) x exp(w log L_PL(beta)), with a Laplace-style proposal covariance
[w (-H_PL(b_hat)) + Sigma_0^-1]^-1 fixed at the maximum partial likelihood
estimate and scaled by s^2 (default 2.38^2 / P).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

import random_streams
from chain import Chain, FitConfig, NumericalError, PriorSpec
from model_constants import ModelConstants, SamplerMethod, TieMethod
from partial_lik import EvaluationError, log_partial_likelihood, mple, score_hessian
from survival_data import SurvivalDataset


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MhReport:
    chain: Chain
    acceptance_rate: float
    proposal_scale: float
    accepted: int

    @property
    def all_rejected(self) -> bool:
        return self.accepted == 0


def log_target(data: SurvivalDataset, beta: np.ndarray, prior: PriorSpec, w: float,
               ties: TieMethod = TieMethod.BRESLOW) -> float:
    '''log prior - w * (negative log partial likelihood), up to a constant'''
    try:
        ll = log_partial_likelihood(data, beta, ties)
    except EvaluationError:
        return -np.inf
    return prior.log_density(beta) + w * ll


def acceptance_probability(current_log_target: float, proposed_log_target: float) -> float:
    '''min{1, exp(delta)} for a symmetric proposal'''
    if not np.isfinite(proposed_log_target):
        return 0.0
    delta = proposed_log_target - current_log_target
    return 1.0 if delta >= 0 else float(np.exp(delta))


def proposal_covariance(data: SurvivalDataset, beta_hat: np.ndarray, prior: PriorSpec, w: float,
                        ties: TieMethod = TieMethod.BRESLOW) -> np.ndarray:
    '''[w (-H_PL(beta_hat)) + Sigma_0^-1]^-1'''
    sh = score_hessian(data, beta_hat, ties)
    precision = w * (-sh.hessian) + prior.precision
    precision = 0.5 * (precision + precision.T)
    try:
        factor = linalg.cho_factor(precision, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError("proposal precision is not positive definite") from e
    cov = linalg.cho_solve(factor, np.eye(data.P))
    return 0.5 * (cov + cov.T)


def default_scale(P: int) -> float:
    return ModelConstants.MH_SCALE_NUMERATOR / np.sqrt(P)


def run_mh(
    data: SurvivalDataset,
    cfg: FitConfig,
    ties: TieMethod = TieMethod.BRESLOW,
    scale: Optional[float] = None,
    beta_hat: Optional[np.ndarray] = None,
) -> MhReport:
    '''
    M Metropolis steps from beta^(0); the proposal is built once before the timed loop
    '''
    if beta_hat is None:
        beta_hat = mple(data, ties=ties)
    s = default_scale(data.P) if scale is None else float(scale)
    if not (np.isfinite(s) and s >= 0):
        raise ValueError(f"proposal scale must be >= 0, got {s}")

    cov = (s * s) * proposal_covariance(data, beta_hat, cfg.prior, cfg.learning_rate, ties)
    #s = 0 gives a zero covariance; its "factor" is zero as well
    chol = np.zeros_like(cov) if s == 0 else linalg.cholesky(cov, lower=True)

    rng = random_streams.stream(cfg.seed)
    w = cfg.learning_rate
    beta = cfg.initial_beta(data.P)
    current = log_target(data, beta, cfg.prior, w, ties)
    samples = np.empty((cfg.iterations, data.P))
    accepted = 0

    t0 = time.perf_counter()
    for m in range(cfg.iterations):
        proposal = beta + chol @ rng.standard_normal(data.P)
        proposed = log_target(data, proposal, cfg.prior, w, ties)
        if rng.random() < acceptance_probability(current, proposed):
            beta, current = proposal, proposed
            accepted += 1
        samples[m] = beta
    wall = time.perf_counter() - t0

    rate = accepted / cfg.iterations
    if accepted == 0:
        logger.warning("[MH] every proposal was rejected (scale %.3g); the chain is constant", s)
    logger.info("[MH] %d steps in %.3fs, acceptance %.3f (w=%g)", cfg.iterations, wall, rate, w)

    chain = Chain(
        samples=samples,
        burn_in=cfg.burn_in,
        seed=cfg.seed,
        wall_seconds=wall,
        learning_rate=w,
        method=SamplerMethod.MH.method_name,
        column_names=data.column_names,
        extra={"acceptance_rate": rate},
    )
    return MhReport(chain=chain, acceptance_rate=rate, proposal_scale=s, accepted=accepted)
