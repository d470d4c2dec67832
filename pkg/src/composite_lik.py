"""
Composite partial likelihood over (event subject, risk-set peer) pairs.

Each pair contributes log expit(d_q' b) where d_q = X_i - X_j, the probability
that subject i fails before subject j. The log-likelihood is a sum of log-expit
terms of linear functions and is therefore concave.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import expit, log_expit

from model_constants import ModelConstants
from partial_lik import NonConvergenceError, newton_maximize
from survival_data import PairContrasts


logger = logging.getLogger(__name__)

#past this |eta| some pair probability is within 5e-5 of 0 or 1, so check for separation
_SEPARATION_ETA = 10.0


@dataclass(frozen=True)
class CplEval:
    loglik: float
    score: np.ndarray
    hessian: np.ndarray


def pair_prob(beta: np.ndarray, contrast: np.ndarray) -> float:
    '''expit(d'b): probability subject i fails before subject j'''
    return float(expit(np.dot(np.asarray(contrast, dtype=float), np.asarray(beta, dtype=float))))


def cpl_eval(pairs: PairContrasts, beta: np.ndarray, with_hessian: bool = True) -> CplEval:
    '''
    loglik = sum log p_q, score = sum (1 - p_q) d_q, hessian = -sum p_q (1 - p_q) d_q d_q'
    '''
    beta = np.asarray(beta, dtype=float).reshape(-1)
    D = pairs.contrasts
    eta = D @ beta
    p = expit(eta)
    q = expit(-eta)  #1 - p without cancellation

    loglik = float(np.sum(log_expit(eta)))
    score = D.T @ q
    if with_hessian:
        hessian = -(D.T @ (D * (p * q)[:, None]))
        hessian = 0.5 * (hessian + hessian.T)
    else:
        hessian = np.full((pairs.P, pairs.P), np.nan)
    return CplEval(loglik=loglik, score=score, hessian=hessian)


def is_separable(pairs: PairContrasts) -> bool:
    '''
    True under complete or quasi-complete separation: some b has d_q' b >= 0 on
    every pair and > 0 on at least one, so the likelihood rises without bound
    along b. All-zero contrasts (tied covariates) can never be strict.
    '''
    D = pairs.contrasts
    res = linprog(
        c=np.zeros(pairs.P),
        A_ub=np.vstack([-D, -D.sum(axis=0, keepdims=True)]),
        b_ub=np.r_[np.zeros(pairs.Q), -1.0],
        bounds=[(None, None)] * pairs.P,
        method="highs",
    )
    return res.status == 0


def mcple(
    pairs: PairContrasts,
    tol: float = ModelConstants.NEWTON_TOL,
    max_iter: int = ModelConstants.NEWTON_MAX_ITER,
) -> np.ndarray:
    '''maximum composite partial likelihood estimate'''

    def objective(beta):
        ev = cpl_eval(pairs, beta)
        return ev.loglik, ev.score, ev.hessian

    try:
        beta = newton_maximize(objective, np.zeros(pairs.P), tol, max_iter, label="MCPLE")
    except NonConvergenceError:
        if is_separable(pairs):
            raise NonConvergenceError("MCPLE does not exist: the pair contrasts are separable") from None
        raise

    #a vanishing score with saturated pair probabilities is separation, not convergence
    if np.max(np.abs(pairs.contrasts @ beta)) > _SEPARATION_ETA and is_separable(pairs):
        raise NonConvergenceError("MCPLE does not exist: the pair contrasts are separable", last_iterate=beta)
    logger.debug("[MCPLE] %s over Q=%d pairs", np.array2string(beta, precision=4), pairs.Q)
    return beta
