"""

   Simulate exponential proportional-hazards survival data
   with independent exponential censoring and optional tie rounding.

"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

import random_streams
from survival_data import SurvivalDataset


class SynthConfigError(ValueError):
    pass


@dataclass
class SynthConfig:
    """
      n: number of subjects
      beta0: true coefficients; its length sets P
      rounding: observed times are rounded to multiples of this (0 = off)
      censor_rate: rate of the exponential censoring times
      seed: root seed of the generator stream
    """
    n: int
    beta0: Tuple[float, ...]
    rounding: float = 0.0
    censor_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.beta0 = tuple(float(b) for b in np.atleast_1d(self.beta0))
        if int(self.n) != self.n or self.n < 2:
            raise SynthConfigError(f"n must be an integer >= 2, got {self.n}")
        self.n = int(self.n)
        if len(self.beta0) < 1:
            raise SynthConfigError("beta0 needs at least one coefficient")
        if not np.all(np.isfinite(self.beta0)):
            raise SynthConfigError("beta0 must be finite")
        if not np.isfinite(self.rounding) or self.rounding < 0:
            raise SynthConfigError(f"rounding must be >= 0, got {self.rounding}")
        if not np.isfinite(self.censor_rate) or self.censor_rate <= 0:
            raise SynthConfigError(f"censor_rate must be > 0, got {self.censor_rate}")

    @property
    def P(self) -> int:
        return len(self.beta0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "beta0": list(self.beta0),
            "rounding": self.rounding,
            "censor_rate": self.censor_rate,
            "seed": self.seed,
        }


def round_to_multiple(t: np.ndarray, r: float) -> np.ndarray:
    '''nearest multiple of r, halves to even'''
    if r <= 0:
        return t
    return np.round(t / r) * r


def generate(cfg: SynthConfig) -> SurvivalDataset:
    """
      X_i ~ N(0, I), T*_i ~ Exp(exp(X_i' beta0)), C*_i ~ Exp(censor_rate),
      T_i = min(T*_i, C*_i) (rounded when r > 0), delta_i = 1{T*_i <= C*_i}

      the same seed always gives the same dataset
    """
    rng = random_streams.stream(cfg.seed)
    beta0 = np.asarray(cfg.beta0, dtype=float)

    X = rng.standard_normal((cfg.n, cfg.P))
    rate = np.exp(X @ beta0)
    true_t = rng.exponential(1.0 / rate)
    censor_t = rng.exponential(1.0 / cfg.censor_rate, size=cfg.n)

    events = (true_t <= censor_t).astype(np.int8)
    times = round_to_multiple(np.minimum(true_t, censor_t), cfg.rounding)

    return SurvivalDataset(
        times=times,
        events=events,
        covariates=X,
        column_names=tuple(f"x{k + 1}" for k in range(cfg.P)),
    )
