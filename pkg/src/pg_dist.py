"""
Exact sampling from the Polya-Gamma distribution PG(1, c).

Hot-loop draws come from the polyagamma package (Devroye's method). The module
also carries its own vectorised copy of that method specialised to shape 1: draw
J*(1, z) with z = |c|/2 from a two-piece proposal (a truncated exponential right
of t = 0.64 and a truncated inverse Gaussian left of it), accept by evaluating
the alternating series for the density until the partial sums decide, and
return J*/4. That copy counts proposals per draw, which the package does not
expose, and serves as an independent check on the package's draws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from polyagamma import random_polyagamma
from scipy.special import log_ndtr

from model_constants import ModelConstants


TRUNC = ModelConstants.PG_TRUNCATION
_LOG_PI = np.log(np.pi)
_TINY = np.finfo(float).tiny


class PgArgumentError(ValueError):
    pass


@dataclass(frozen=True)
class PgDraw:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise PgArgumentError(f"PG draws are strictly positive, got {self.value}")


# -----------------------
# Moments
# -----------------------

def pg1_mean(c: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    '''E[PG(1, c)] = tanh(c/2) / (2c), 1/4 at c = 0'''
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-4
    safe = np.where(small, 1.0, c)
    out = np.where(small, 0.25 - c * c / 48.0, np.tanh(safe / 2.0) / (2.0 * safe))
    return float(out) if out.ndim == 0 else out


def pg1_variance(c: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    '''Var[PG(1, c)] = (sinh c - c) / (4 c^3 cosh^2(c/2)), 1/24 at c = 0'''
    c = np.abs(np.asarray(c, dtype=float))
    small = c < 1e-3
    safe = np.where(small, 1.0, c)
    with np.errstate(over="ignore", invalid="ignore"):
        big = (np.sinh(safe) - safe) / (4.0 * safe ** 3 * np.cosh(safe / 2.0) ** 2)
    #sinh/cosh^2 overflow for very large c; the ratio tends to 1/(2 c^3)
    big = np.where(np.isfinite(big), big, 1.0 / (2.0 * safe ** 3))
    out = np.where(small, 1.0 / 24.0, big)
    return float(out) if out.ndim == 0 else out


# -----------------------
# Devroye pieces
# -----------------------

def _exponential_branch_prob(z: np.ndarray) -> np.ndarray:
    '''p / (p + q): mass of the right (exponential) proposal piece'''
    K = np.pi ** 2 / 8.0 + z * z / 2.0
    root = np.sqrt(1.0 / TRUNC)
    b = root * (TRUNC * z - 1.0)
    a = -root * (TRUNC * z + 1.0)
    x0 = np.log(K) + K * TRUNC
    with np.errstate(over="ignore"):
        q_over_p = (4.0 / np.pi) * (np.exp(x0 - z + log_ndtr(b)) + np.exp(x0 + z + log_ndtr(a)))
    return 1.0 / (1.0 + q_over_p)


def _series_coef(n: int, x: np.ndarray) -> np.ndarray:
    '''n-th term of the alternating series, piecewise at TRUNC, in log space'''
    x = np.maximum(x, _TINY)
    h = n + 0.5
    log_left = _LOG_PI + np.log(h) + 1.5 * np.log(2.0 / (np.pi * x)) - 2.0 * h * h / x
    log_right = _LOG_PI + np.log(h) - h * h * np.pi ** 2 * x / 2.0
    return np.exp(np.where(x <= TRUNC, log_left, log_right))


def _truncated_inverse_gaussian(z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    '''IG(mu = 1/z, lambda = 1) restricted to (0, TRUNC)'''
    x = np.empty(z.shape[0])

    #mu > t: Levy proposal on (0, t) thinned by exp(-z^2 x / 2)
    pending = np.flatnonzero(z < 1.0 / TRUNC)
    while pending.size:
        e1 = rng.standard_exponential(pending.size)
        e2 = rng.standard_exponential(pending.size)
        u = rng.random(pending.size)
        cand = TRUNC / (1.0 + TRUNC * e1) ** 2
        zp = z[pending]
        ok = (e1 * e1 <= 2.0 * e2 / TRUNC) & (u <= np.exp(-0.5 * zp * zp * cand))
        x[pending[ok]] = cand[ok]
        pending = pending[~ok]

    #mu <= t: ordinary IG draws, kept when they land below t
    pending = np.flatnonzero(z >= 1.0 / TRUNC)
    while pending.size:
        mu = 1.0 / z[pending]
        y = rng.standard_normal(pending.size) ** 2
        u = rng.random(pending.size)
        my = mu * y
        cand = mu + 0.5 * mu * my - 0.5 * mu * np.sqrt(4.0 * my + my * my)
        flip = u > mu / (mu + cand)
        cand[flip] = mu[flip] ** 2 / cand[flip]
        ok = cand < TRUNC
        x[pending[ok]] = cand[ok]
        pending = pending[~ok]

    return x


def _propose(z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(z.shape[0])
    right = u < _exponential_branch_prob(z)
    x = np.empty(z.shape[0])

    idx = np.flatnonzero(right)
    if idx.size:
        K = np.pi ** 2 / 8.0 + z[idx] ** 2 / 2.0
        x[idx] = TRUNC + rng.standard_exponential(idx.size) / K

    idx = np.flatnonzero(~right)
    if idx.size:
        x[idx] = _truncated_inverse_gaussian(z[idx], rng)
    return x


def _series_accept(x: np.ndarray, u: np.ndarray) -> np.ndarray:
    '''run the alternating partial sums until each proposal is decided'''
    s = _series_coef(0, x)
    y = u * s
    accept = np.zeros(x.shape[0], dtype=bool)
    live = np.arange(x.shape[0])

    for n in range(1, ModelConstants.PG_MAX_SERIES_TERMS):
        if live.size == 0:
            break
        a = _series_coef(n, x[live])
        if n % 2 == 1:
            s[live] -= a
            hit = y[live] <= s[live]
            accept[live[hit]] = True
            live = live[~hit]
        else:
            s[live] += a
            miss = y[live] > s[live]
            live = live[~miss]

    #undecided after the term cap are rejected and redrawn
    return accept


# -----------------------
# Public samplers
# -----------------------

def _instrumented_batch(z: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    '''the rejection loop above, counting proposals per draw'''
    out = np.empty(z.shape[0])
    attempts = np.zeros(z.shape[0], dtype=np.int64)

    pending = np.arange(z.shape[0])
    while pending.size:
        attempts[pending] += 1
        x = _propose(z[pending], rng)
        ok = _series_accept(x, rng.random(pending.size))
        out[pending[ok]] = 0.25 * x[ok]
        pending = pending[~ok]
    return out, attempts


def sample_pg1_batch(
    c: np.ndarray,
    rng: np.random.Generator,
    return_attempts: bool = False,
) -> Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    '''
    one PG(1, c_q) draw per entry of c

    the draws come from the polyagamma package's devroye method; with
    return_attempts the in-house loop runs instead and also reports the number
    of proposals each draw needed
    '''
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise PgArgumentError("PG tilt must be finite")
    if c.size == 0:
        return (np.empty(c.shape), np.zeros(c.shape, dtype=np.int64)) if return_attempts else np.empty(c.shape)

    if return_attempts:
        out, attempts = _instrumented_batch(np.abs(c.reshape(-1)) * 0.5, rng)
        return out.reshape(c.shape), attempts.reshape(c.shape)
    draws = random_polyagamma(1.0, c.reshape(-1), method="devroye", random_state=rng)
    return np.asarray(draws, dtype=float).reshape(c.shape)


def sample_pg1(c: float, rng: np.random.Generator) -> PgDraw:
    if not np.isfinite(c):
        raise PgArgumentError(f"PG tilt must be finite, got {c}")
    return PgDraw(float(sample_pg1_batch(np.array([c], dtype=float), rng)[0]))
