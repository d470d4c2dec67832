"""
Effective sample size, effective sampling rate and posterior summaries.

Autocovariances come from the FFT of the demeaned post-burn-in series,
zero-padded to at least twice its length so the circular correlation equals the
linear one. The autocorrelation sum is truncated by Geyer's initial positive
sequence on paired lags, then made monotone:

  ESS_p = N / (1 + 2 sum_l rho_p(l)),    N = M - m*

and the chain ESS is the average over parameters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from chain import Chain
from model_constants import ModelConstants


logger = logging.getLogger(__name__)


# -----------------------
# Exceptions
# -----------------------

class DiagnosticsError(Exception):
    pass


class UndefinedEssError(DiagnosticsError):
    pass


class ChainTooShortError(DiagnosticsError):
    pass


# -----------------------
# Autocovariance
# -----------------------

def autocovariance_fft(x: np.ndarray) -> np.ndarray:
    '''biased autocovariance gamma(l) = (1/N) sum_t (x_t - m)(x_{t+l} - m), l = 0..N-1'''
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.shape[0]
    centered = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(centered, n=size)
    acov = np.fft.irfft(f * np.conjugate(f), n=size)[:n]
    return acov / n


def autocovariance_direct(x: np.ndarray) -> np.ndarray:
    '''O(N^2) reference for autocovariance_fft'''
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.shape[0]
    centered = x - x.mean()
    return np.array([np.dot(centered[: n - l], centered[l:]) / n for l in range(n)])


def autocorrelation(x: np.ndarray, max_lag: Optional[int] = None) -> np.ndarray:
    '''rho(l) = gamma(l) / gamma(0); raises UndefinedEssError for a constant series'''
    acov = autocovariance_fft(x)
    if not acov[0] > 0:
        raise UndefinedEssError("zero-variance series has no autocorrelation")
    rho = acov / acov[0]
    if max_lag is not None:
        rho = rho[: max_lag + 1]
    return rho


def _ess_1d(x: np.ndarray) -> float:
    n = x.shape[0]
    #ptp catches constant columns that round to a tiny positive variance
    if np.ptp(x) == 0:
        raise UndefinedEssError("constant chain: ESS is undefined (zero variance)")
    rho = autocorrelation(x)

    #initial positive sequence over pairs (rho(2k), rho(2k+1))
    n_pairs = n // 2
    gamma = rho[0: 2 * n_pairs: 2] + rho[1: 2 * n_pairs: 2]
    positive = gamma > 0
    stop = n_pairs if np.all(positive) else int(np.argmin(positive))
    gamma = gamma[:stop]

    #initial monotone sequence
    if gamma.shape[0] > 1:
        gamma = np.minimum.accumulate(gamma)

    tau = -1.0 + 2.0 * float(np.sum(gamma))
    if not tau > 0:
        return ModelConstants.ESS_CAP_FACTOR * n
    return min(n / tau, ModelConstants.ESS_CAP_FACTOR * n)


def ess(chain: Chain) -> Tuple[np.ndarray, float]:
    '''(per-parameter ESS, average) over the post-burn-in draws'''
    draws = chain.post_burn_in()
    if draws.shape[0] < ModelConstants.ESS_MIN_DRAWS:
        raise ChainTooShortError(
            f"ESS needs at least {ModelConstants.ESS_MIN_DRAWS} post-burn-in draws, got {draws.shape[0]}"
        )
    per_param = np.array([_ess_1d(draws[:, p]) for p in range(draws.shape[1])])
    avg = float(per_param.mean())
    logger.debug("[ESS] per parameter %s, average %.2f", np.array2string(per_param, precision=2), avg)
    return per_param, avg


# -----------------------
# Summaries
# -----------------------

@dataclass(frozen=True)
class ChainSummary:
    '''
    ess_per_param, ess_avg and esr are None when the ESS is undefined
    (a constant coordinate); the intervals are still reported
    '''
    posterior_mean: np.ndarray
    credible_lo: np.ndarray
    credible_hi: np.ndarray
    ess_per_param: Optional[np.ndarray]
    ess_avg: Optional[float]
    esr: Optional[float]
    autocorr: List[np.ndarray]
    alpha: float
    draws: int

    @property
    def ess_defined(self) -> bool:
        return self.ess_per_param is not None


def percentile_interval(draws: np.ndarray, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    '''equal-tailed (alpha/2, 1 - alpha/2) empirical quantiles per column'''
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0], axis=0)
    return lo, hi


def summarize(chain: Chain, alpha: float = 0.05, acf_lags: int = 0) -> ChainSummary:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    draws = chain.post_burn_in()
    if draws.shape[0] < ModelConstants.SUMMARY_MIN_DRAWS:
        raise ChainTooShortError(
            f"summary needs at least {ModelConstants.SUMMARY_MIN_DRAWS} post-burn-in draws, got {draws.shape[0]}"
        )

    mean = draws.mean(axis=0)
    lo, hi = percentile_interval(draws, alpha)

    try:
        per_param, avg = ess(chain)
    except UndefinedEssError as e:
        logger.warning("[ESS] %s", e)
        per_param, avg = None, None

    esr = None
    if avg is not None and chain.wall_seconds > 0:
        esr = avg / chain.wall_seconds

    autocorr: List[np.ndarray] = []
    if acf_lags > 0 and per_param is not None:
        autocorr = [autocorrelation(draws[:, p], max_lag=acf_lags) for p in range(draws.shape[1])]

    return ChainSummary(
        posterior_mean=mean,
        credible_lo=lo,
        credible_hi=hi,
        ess_per_param=per_param,
        ess_avg=avg,
        esr=esr,
        autocorr=autocorr,
        alpha=float(alpha),
        draws=int(draws.shape[0]),
    )


def _vector(v: Optional[np.ndarray]) -> Optional[List[float]]:
    return None if v is None else [float(x) for x in np.asarray(v).reshape(-1)]


def build_fit_report(
    label: str,
    chain: Chain,
    summary: ChainSummary,
    config: Dict[str, Any],
    precorrection: Optional[ChainSummary] = None,
    mple: Optional[np.ndarray] = None,
    mple_ci: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Dict[str, Any]:
    '''the FitReport mapping, keys in their published order'''
    report: Dict[str, Any] = {
        "method": label,
        "columns": list(chain.column_names),
        "estimates": _vector(summary.posterior_mean),
        "ci_lo": _vector(summary.credible_lo),
        "ci_hi": _vector(summary.credible_hi),
        "ess": _vector(summary.ess_per_param),
        "ess_avg": summary.ess_avg,
        "esr": summary.esr,
    }
    if "acceptance_rate" in chain.extra:
        report["acceptance_rate"] = float(chain.extra["acceptance_rate"])
    report["correction"] = _vector(chain.correction)
    if "correction_error" in chain.extra:
        report["correction_error"] = chain.extra["correction_error"]
    if precorrection is not None:
        report["precorrection_estimates"] = _vector(precorrection.posterior_mean)
    if mple is not None:
        report["mple"] = _vector(mple)
    if mple_ci is not None:
        report["mple_ci_lo"] = _vector(mple_ci[0])
        report["mple_ci_hi"] = _vector(mple_ci[1])
    report["alpha"] = summary.alpha
    report["wall_seconds"] = float(chain.wall_seconds)
    report["config"] = config
    return report
