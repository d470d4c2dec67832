"""
Cox partial likelihood: log-likelihood, analytic score and Hessian, and the
Newton maximum partial likelihood solver.

Subjects are sorted by time once; the risk-set sums of exp(X'b), exp(X'b) X and
exp(X'b) X X' are reverse cumulative sums read off at the first subject of each
distinct time, so an evaluation costs O(n log n + n P^2). Efron's tie
correction subtracts a growing fraction l/d of the tied-event sums from the
d denominators of a tie group; Breslow is the same computation with every
fraction set to zero.

The exponentials are shifted by the running maximum of X'b over the risk set,
re-based whenever it falls far enough that late risk sets would underflow.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import norm

from model_constants import ModelConstants, TieMethod
from survival_data import SurvivalDataset


logger = logging.getLogger(__name__)


# -----------------------
# Exceptions
# -----------------------

class PartialLikelihoodException(Exception):
    pass


class EvaluationError(PartialLikelihoodException, ArithmeticError):
    pass


class SingularHessianError(PartialLikelihoodException, np.linalg.LinAlgError):
    pass


class NonConvergenceError(PartialLikelihoodException):
    def __init__(self, message: str, last_iterate: Optional[np.ndarray] = None):
        super().__init__(message)
        self.last_iterate = None if last_iterate is None else np.array(last_iterate, copy=True)


@dataclass(frozen=True)
class ScoreHessian:
    '''S_PL(beta), H_PL(beta) (negative semi-definite) and log L_PL(beta)'''
    score: np.ndarray
    hessian: np.ndarray
    loglik: float


# -----------------------
# Risk-set accumulation
# -----------------------

@dataclass(frozen=True)
class _EventTerms:
    '''per-event denominators and their beta-derivatives, already tie-adjusted'''
    log_denom: np.ndarray
    mean_x: np.ndarray
    second: Optional[np.ndarray]
    linear: np.ndarray
    x_events: np.ndarray


def _check_beta(data: SurvivalDataset, beta: np.ndarray) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != data.P:
        raise ValueError(f"beta has {beta.shape[0]} entries, data has P={data.P}")
    if not np.all(np.isfinite(beta)):
        raise EvaluationError("beta must be finite")
    return beta


def _group_shifts(eta: np.ndarray, starts: np.ndarray) -> np.ndarray:
    '''
    log-sum-exp shift for each distinct-time group

    the running maximum of X'b over a risk set only falls as time goes on; a new
    shift begins wherever it drops more than LOG_SHIFT_SPAN below the current one,
    so every risk-set sum keeps a term no smaller than exp(-LOG_SHIFT_SPAN)
    '''
    running_max = np.maximum.accumulate(eta[::-1])[::-1][starts]
    shifts = np.empty_like(running_max)
    lo = 0
    while lo < running_max.shape[0]:
        c = running_max[lo]
        hi = int(np.searchsorted(-running_max, ModelConstants.LOG_SHIFT_SPAN - c, side="right"))
        shifts[lo:hi] = c
        lo = hi
    return shifts


def _tail_sums(weights: np.ndarray, values: np.ndarray, seg_starts: np.ndarray, seg_scale: np.ndarray) -> np.ndarray:
    '''
    sum_{j >= k} weights_j values_j for every k; the weights carry a shift that is
    constant on each segment, and segment s+1 enters segment s scaled by seg_scale[s]
    '''
    weighted = weights.reshape((-1,) + (1,) * (values.ndim - 1)) * values
    out = np.empty_like(weighted)
    ends = np.r_[seg_starts[1:], weighted.shape[0]]
    carry = None
    for s in range(seg_starts.shape[0] - 1, -1, -1):
        a, b = seg_starts[s], ends[s]
        local = np.cumsum(weighted[a:b][::-1], axis=0)[::-1]
        if carry is not None:
            local = local + carry * seg_scale[s]
        out[a:b] = local
        carry = local[0]
    return out


def _event_terms(data: SurvivalDataset, beta: np.ndarray, ties: TieMethod, second_order: bool) -> _EventTerms:
    order = data.time_order
    T = data.sorted_times
    X = data.covariates[order]
    E = data.events[order].astype(bool)
    eta = X @ beta

    #start index of each subject's distinct-time group in sorted order
    new_time = np.r_[True, T[1:] != T[:-1]]
    starts = np.flatnonzero(new_time)
    group = np.cumsum(new_time) - 1

    group_shift = _group_shifts(eta, starts)
    phi = np.exp(eta - group_shift[group])  #<= 1; the shift is added back to the log denominators
    seg = np.flatnonzero(np.r_[True, group_shift[1:] != group_shift[:-1]])
    seg_scale = np.exp(np.r_[np.diff(group_shift[seg]), 0.0])
    seg_starts = starts[seg]

    #risk set at a time = everyone at or after its first subject
    risk_phi = _tail_sums(phi, np.ones(T.shape[0]), seg_starts, seg_scale)[starts]
    risk_phi_x = _tail_sums(phi, X, seg_starts, seg_scale)[starts]

    #tied-event sums per group
    n_groups = starts.shape[0]
    ev = np.flatnonzero(E)
    tie_count = np.bincount(group[ev], minlength=n_groups)
    tie_phi = np.bincount(group[ev], weights=phi[ev], minlength=n_groups)
    tie_phi_x = np.zeros((n_groups, data.P))
    np.add.at(tie_phi_x, group[ev], phi[ev, None] * X[ev])

    #each event gets its own fraction l/d within its tie group (all zero for breslow)
    g = group[ev]
    if ties is TieMethod.EFRON:
        first_event = np.r_[0, np.cumsum(tie_count)[:-1]]
        rank = np.arange(ev.shape[0]) - first_event[g]
        frac = rank / tie_count[g]
    else:
        frac = np.zeros(ev.shape[0])

    denom = risk_phi[g] - frac * tie_phi[g]
    numer = risk_phi_x[g] - frac[:, None] * tie_phi_x[g]
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_x = numer / denom[:, None]
        log_denom = np.log(denom) + group_shift[g]

    second = None
    if second_order:
        outer = X[:, :, None] * X[:, None, :]
        risk_phi_xx = _tail_sums(phi, outer, seg_starts, seg_scale)[starts]
        tie_phi_xx = np.zeros((n_groups, data.P, data.P))
        np.add.at(tie_phi_xx, group[ev], phi[ev, None, None] * outer[ev])
        with np.errstate(divide="ignore", invalid="ignore"):
            second = (risk_phi_xx[g] - frac[:, None, None] * tie_phi_xx[g]) / denom[:, None, None]

    return _EventTerms(log_denom=log_denom, mean_x=mean_x, second=second, linear=eta[ev], x_events=X[ev])


def _raise_if_bad(*values) -> None:
    for v in values:
        if not np.all(np.isfinite(v)):
            raise EvaluationError(
                "partial likelihood evaluation overflowed; center or rescale the covariates "
                "or start the solver closer to the estimate"
            )


# -----------------------
# Public surface
# -----------------------

def log_partial_likelihood(data: SurvivalDataset, beta: np.ndarray, ties: TieMethod = TieMethod.BRESLOW) -> float:
    '''sum_i delta_i (X_i'b - log sum_{j in R(T_i)} exp(X_j'b)), tie-adjusted for efron'''
    beta = _check_beta(data, beta)
    terms = _event_terms(data, beta, ties, second_order=False)
    ll = float(np.sum(terms.linear) - np.sum(terms.log_denom))
    _raise_if_bad(ll)
    return ll


def score_hessian(data: SurvivalDataset, beta: np.ndarray, ties: TieMethod = TieMethod.BRESLOW) -> ScoreHessian:
    beta = _check_beta(data, beta)
    terms = _event_terms(data, beta, ties, second_order=True)

    loglik = float(np.sum(terms.linear) - np.sum(terms.log_denom))
    score = terms.x_events.sum(axis=0) - terms.mean_x.sum(axis=0)
    hessian = -(terms.second.sum(axis=0) - terms.mean_x.T @ terms.mean_x)
    hessian = 0.5 * (hessian + hessian.T)
    _raise_if_bad(loglik, score, hessian)
    return ScoreHessian(score=score, hessian=hessian, loglik=loglik)


def newton_direction(hessian: np.ndarray, score: np.ndarray) -> np.ndarray:
    '''solve (-H) step = S by Cholesky; -H must be positive definite'''
    info = -0.5 * (hessian + hessian.T)
    eig = np.linalg.eigvalsh(info)
    if eig[0] <= 1e-10 * max(eig[-1], 1e-300):
        raise SingularHessianError(f"Hessian is singular (smallest curvature {eig[0]:.3g}); check for collinear or constant covariates")
    try:
        factor = linalg.cho_factor(info, lower=True, check_finite=True)
    except linalg.LinAlgError as e:
        raise SingularHessianError("Hessian is singular or not negative definite (collinear or constant covariates?)") from e
    step = linalg.cho_solve(factor, score)
    if not np.all(np.isfinite(step)):
        raise SingularHessianError("Newton step is not finite")
    return step


def newton_maximize(objective, init: np.ndarray, tol: float, max_iter: int, label: str) -> np.ndarray:
    '''
    generic damped Newton ascent; objective(beta) -> (loglik, score, hessian)
    stops when the sup-norm of the score is <= tol
    '''
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")

    beta = np.array(init, dtype=float, copy=True)
    ll, score, hessian = objective(beta)
    for it in range(max_iter):
        if np.max(np.abs(score)) <= tol:
            logger.debug("[%s] converged in %d Newton steps", label, it)
            return beta

        step = newton_direction(hessian, score)
        scale = 1.0
        for _ in range(ModelConstants.MAX_STEP_HALVINGS):
            candidate = beta + scale * step
            try:
                cand_ll, cand_score, cand_hessian = objective(candidate)
            except EvaluationError:
                cand_ll = -np.inf
            if np.isfinite(cand_ll) and cand_ll >= ll - 1e-12 * max(1.0, abs(ll)):
                break
            scale *= 0.5
        else:
            raise NonConvergenceError(f"{label}: line search failed to improve the likelihood", last_iterate=beta)

        beta, ll, score, hessian = candidate, cand_ll, cand_score, cand_hessian
        if not np.all(np.isfinite(beta)):
            raise NonConvergenceError(f"{label}: iterate diverged", last_iterate=beta)

    if np.max(np.abs(score)) <= tol:
        return beta
    raise NonConvergenceError(
        f"{label}: no convergence in {max_iter} Newton steps (|score|_inf = {np.max(np.abs(score)):.3g})",
        last_iterate=beta,
    )


def mple(
    data: SurvivalDataset,
    init: Optional[np.ndarray] = None,
    tol: float = ModelConstants.NEWTON_TOL,
    max_iter: int = ModelConstants.NEWTON_MAX_ITER,
    ties: TieMethod = TieMethod.BRESLOW,
) -> np.ndarray:
    '''maximum partial likelihood estimate by Newton-Raphson with step halving'''
    start = np.zeros(data.P) if init is None else _check_beta(data, init)

    def objective(beta):
        sh = score_hessian(data, beta, ties)
        return sh.loglik, sh.score, sh.hessian

    return newton_maximize(objective, start, tol, max_iter, label="MPLE")


def standard_errors(data: SurvivalDataset, beta: np.ndarray, ties: TieMethod = TieMethod.BRESLOW) -> np.ndarray:
    '''sqrt of the diagonal of (-H_PL)^-1'''
    sh = score_hessian(data, beta, ties)
    try:
        cov = linalg.inv(-sh.hessian)
    except linalg.LinAlgError as e:
        raise SingularHessianError("observed information is singular") from e
    return np.sqrt(np.diag(cov))


def confidence_intervals(
    data: SurvivalDataset,
    beta: np.ndarray,
    alpha: float = 0.05,
    ties: TieMethod = TieMethod.BRESLOW,
) -> Tuple[np.ndarray, np.ndarray]:
    '''Wald intervals beta +- z_{1-alpha/2} se'''
    se = standard_errors(data, beta, ties)
    z = norm.ppf(1.0 - alpha / 2.0)
    beta = np.asarray(beta, dtype=float)
    return beta - z * se, beta + z * se
