'''chain.py Configuration, prior and chain containers shared by the two samplers.'''

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from model_constants import ModelConstants


# -----------------------
# Exceptions
# -----------------------

class SamplerException(Exception):
    pass


class FitConfigError(SamplerException, ValueError):
    pass


class PriorError(SamplerException, ValueError):
    pass


class NumericalError(SamplerException, ArithmeticError):
    pass


class CorrectionError(SamplerException):
    pass


# -----------------------
# Prior
# -----------------------

@dataclass(frozen=True, eq=False)
class PriorSpec:
    '''Gaussian prior N(mean, covariance) on beta'''
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise PriorError(f"prior covariance shape {cov.shape} does not match mean of length {mean.shape[0]}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise PriorError("prior mean and covariance must be finite")
        if not np.allclose(cov, cov.T, rtol=1e-10, atol=0.0):
            raise PriorError("prior covariance must be symmetric")
        try:
            linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as e:
            raise PriorError("prior covariance is not positive definite") from e
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @classmethod
    def isotropic(cls, P: int, variance: float = ModelConstants.PRIOR_VARIANCE, mean: float = 0.0) -> "PriorSpec":
        '''N(mean * 1, variance * I)'''
        if not variance > 0:
            raise PriorError(f"prior variance must be > 0, got {variance}")
        return cls(mean=np.full(P, float(mean)), covariance=float(variance) * np.eye(P))

    @property
    def P(self) -> int:
        return int(self.mean.shape[0])

    @cached_property
    def precision(self) -> np.ndarray:
        '''Sigma_0^-1'''
        factor = linalg.cho_factor(self.covariance, lower=True)
        prec = linalg.cho_solve(factor, np.eye(self.P))
        return 0.5 * (prec + prec.T)

    @cached_property
    def precision_mean(self) -> np.ndarray:
        '''Sigma_0^-1 mu_0'''
        return self.precision @ self.mean

    def log_density(self, beta: np.ndarray) -> float:
        '''log N(beta; mean, covariance) up to its normalizing constant'''
        r = np.asarray(beta, dtype=float) - self.mean
        return float(-0.5 * r @ self.precision @ r)

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "covariance": self.covariance.tolist()}


# -----------------------
# Fit configuration
# -----------------------

@dataclass
class FitConfig:
    '''
    iterations: total sweeps M
    burn_in: m*, 0 <= m* < M
    learning_rate: w > 0 weighting the loss against the prior
    init: beta^(0), zero vector when None
    threads: 0 is the single-threaded reference mode
    '''
    prior: PriorSpec
    iterations: int = ModelConstants.ITERATIONS
    burn_in: int = ModelConstants.BURN_IN
    learning_rate: float = ModelConstants.LEARNING_RATE
    seed: int = 0
    init: Optional[np.ndarray] = None
    threads: int = 0

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise FitConfigError(f"iterations must be a positive integer, got {self.iterations}")
        if int(self.burn_in) != self.burn_in or not 0 <= self.burn_in < self.iterations:
            raise FitConfigError(f"burn-in must satisfy 0 <= burn_in < iterations, got {self.burn_in} for {self.iterations}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise FitConfigError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.threads < 0:
            raise FitConfigError(f"threads must be >= 0, got {self.threads}")
        self.iterations = int(self.iterations)
        self.burn_in = int(self.burn_in)
        self.learning_rate = float(self.learning_rate)
        if self.init is not None:
            self.init = np.asarray(self.init, dtype=float).reshape(-1)

    def initial_beta(self, P: int) -> np.ndarray:
        if self.prior.P != P:
            raise FitConfigError(f"prior has dimension {self.prior.P}, data has P={P}")
        if self.init is None:
            return np.zeros(P)
        if self.init.shape[0] != P:
            raise FitConfigError(f"initial beta has {self.init.shape[0]} entries, data has P={P}")
        return self.init.copy()

    def with_learning_rate(self, w: float) -> "FitConfig":
        return replace(self, learning_rate=float(w))

    def with_seed(self, seed: int) -> "FitConfig":
        return replace(self, seed=int(seed))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "init": None if self.init is None else self.init.tolist(),
            "threads": self.threads,
            "prior": self.prior.to_dict(),
        }


# -----------------------
# Chain
# -----------------------

@dataclass(frozen=True, eq=False)
class Chain:
    '''M x P draws plus the metadata needed to reproduce and diagnose them'''
    samples: np.ndarray
    burn_in: int
    seed: int
    wall_seconds: float
    learning_rate: float
    method: str = "gs4cox"
    column_names: Tuple[str, ...] = ()
    corrected: bool = False
    correction: Optional[np.ndarray] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        samples = np.atleast_2d(np.array(self.samples, dtype=float, copy=True))
        if not np.all(np.isfinite(samples)):
            raise NumericalError("chain contains non-finite draws")
        if not 0 <= self.burn_in < samples.shape[0]:
            raise FitConfigError(f"burn-in {self.burn_in} outside chain of length {samples.shape[0]}")
        if self.corrected and self.correction is None:
            raise CorrectionError("a corrected chain must record its correction")
        names = tuple(self.column_names) or tuple(f"beta_{k + 1}" for k in range(samples.shape[1]))
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "column_names", names)

    @property
    def iterations(self) -> int:
        return int(self.samples.shape[0])

    @property
    def P(self) -> int:
        return int(self.samples.shape[1])

    def post_burn_in(self) -> np.ndarray:
        return self.samples[self.burn_in:]

    def posterior_mean(self) -> np.ndarray:
        '''(1/K) sum of the K = M - m* post-burn-in draws'''
        return self.post_burn_in().mean(axis=0)

    def shifted(self, shift: np.ndarray) -> "Chain":
        '''every draw, burn-in included, translated by the same vector'''
        shift = np.asarray(shift, dtype=float).reshape(-1)
        return replace(self, samples=self.samples + shift[None, :], corrected=True, correction=shift.copy())

    def to_dict(self) -> Dict[str, Any]:
        '''the JSON sidecar of the samples CSV'''
        d = {
            "method": self.method,
            "seed": self.seed,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "learning_rate": self.learning_rate,
            "corrected": self.corrected,
            "correction": None if self.correction is None else self.correction.tolist(),
            "wall_seconds": self.wall_seconds,
        }
        d.update(self.extra)
        return d


def sample_header(P: int) -> Sequence[str]:
    return [f"beta_{k + 1}" for k in range(P)]
