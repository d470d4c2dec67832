"""
Survival observations, risk sets and the pair-contrast design matrix shared by
every likelihood and sampler in the engine.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, FrozenSet, Optional, Sequence, Tuple

import numpy as np

from model_constants import ModelConstants


logger = logging.getLogger(__name__)


# -----------------------
# Exceptions
# -----------------------

class SurvivalDataException(Exception):
    pass


class SchemaError(SurvivalDataException):
    '''a requested column is not in the input'''


class ParseError(SurvivalDataException):
    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class InsufficientDataError(SurvivalDataException):
    pass


class EmptyPairsError(SurvivalDataException):
    pass


class PairLimitError(SurvivalDataException):
    pass


class SubjectIndexError(SurvivalDataException, IndexError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


# -----------------------
# Dataset
# -----------------------

@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    '''(T_i, delta_i, X_i) triples; arrays are read-only after construction'''
    times: np.ndarray
    events: np.ndarray
    covariates: np.ndarray
    column_names: Tuple[str, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        events = np.asarray(self.events)
        covariates = np.asarray(self.covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)

        if times.shape[0] < 2:
            raise InsufficientDataError(f"need at least 2 subjects, got {times.shape[0]}")
        if covariates.ndim != 2 or covariates.shape[0] != times.shape[0]:
            raise SurvivalDataException(f"covariates shape {covariates.shape} does not match {times.shape[0]} subjects")
        if covariates.shape[1] < 1:
            raise SurvivalDataException("need at least one covariate")
        if events.shape != times.shape:
            raise SurvivalDataException(f"events shape {events.shape} does not match times {times.shape}")
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise SurvivalDataException("times must be finite and non-negative")
        if not np.all(np.isin(events, (0, 1))):
            raise SurvivalDataException("events must be coded 0/1")
        if not np.all(np.isfinite(covariates)):
            raise SurvivalDataException("covariates contain missing or non-finite entries")

        names = tuple(str(c) for c in self.column_names) if self.column_names is not None else ()
        if not names:
            names = tuple(f"x{k + 1}" for k in range(covariates.shape[1]))
        if len(names) != covariates.shape[1]:
            raise SurvivalDataException(f"{len(names)} column names for {covariates.shape[1]} covariates")

        #frozen dataclass, so bypass __setattr__ for the normalized arrays
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "events", _frozen(events.astype(np.int8)))
        object.__setattr__(self, "covariates", _frozen(covariates))
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return int(self.times.shape[0])

    @property
    def P(self) -> int:
        return int(self.covariates.shape[1])

    @cached_property
    def time_order(self) -> np.ndarray:
        '''stable ascending sort of subjects by observed time'''
        return _frozen(np.argsort(self.times, kind="stable"))

    @cached_property
    def sorted_times(self) -> np.ndarray:
        return _frozen(self.times[self.time_order])

    def risk_set_sizes(self) -> np.ndarray:
        '''|R(T_i)| for every subject, by binary search on the sorted times'''
        first = np.searchsorted(self.sorted_times, self.times, side="left")
        return self.n - first

    def subset(self, rows: Sequence[int]) -> "SurvivalDataset":
        rows = np.asarray(rows, dtype=int)
        return SurvivalDataset(
            times=self.times[rows],
            events=self.events[rows],
            covariates=self.covariates[rows],
            column_names=self.column_names,
        )

    def to_dict(self) -> Dict[str, Any]:
        '''summary for manifests and reports, not the data itself'''
        summary = event_time_summary(self)
        return {
            "n": self.n,
            "P": self.P,
            "column_names": list(self.column_names),
            **summary,
        }


# -----------------------
# Risk sets
# -----------------------

def risk_set(data: SurvivalDataset, i: int) -> FrozenSet[int]:
    '''R(T_i) = {j : T_j >= T_i}; closed, so tied subjects are mutual members'''
    if not 0 <= int(i) < data.n:
        raise SubjectIndexError(f"subject index {i} out of range for n={data.n}")
    first = int(np.searchsorted(data.sorted_times, data.times[i], side="left"))
    return frozenset(int(j) for j in data.time_order[first:])


def event_time_summary(data: SurvivalDataset) -> Dict[str, int]:
    '''event/censor counts and how many event times are shared'''
    event_times = data.times[data.events == 1]
    uniq, counts = np.unique(event_times, return_counts=True)
    return {
        "events": int(data.events.sum()),
        "censored": int(data.n - data.events.sum()),
        "distinct_event_times": int(uniq.shape[0]),
        "tied_event_groups": int(np.sum(counts > 1)),
    }


def bootstrap_resample(data: SurvivalDataset, rng: np.random.Generator) -> SurvivalDataset:
    '''n subjects drawn with replacement'''
    rows = rng.integers(0, data.n, size=data.n)
    return data.subset(rows)


# -----------------------
# Pair contrasts
# -----------------------

@dataclass(frozen=True, eq=False)
class PairContrasts:
    '''
    design matrix D with one row X_i - X_j per ordered pair (i event, j in R(T_i) minus i)
    '''
    contrasts: np.ndarray
    pair_index: np.ndarray

    @property
    def Q(self) -> int:
        return int(self.contrasts.shape[0])

    @property
    def P(self) -> int:
        return int(self.contrasts.shape[1])

    @cached_property
    def contrast_sum(self) -> np.ndarray:
        '''sum_q d_q; the drift of the Gaussian update does not depend on beta or omega'''
        return _frozen(self.contrasts.sum(axis=0))

    def blocks(self, block_size: int = ModelConstants.PAIR_BLOCK_SIZE):
        '''fixed partition of the Q rows into contiguous blocks'''
        for start in range(0, self.Q, block_size):
            yield start, min(start + block_size, self.Q)


def count_pairs(data: SurvivalDataset) -> int:
    '''sum over events of |R(T_i)| - 1'''
    sizes = data.risk_set_sizes()
    return int(np.sum(sizes[data.events == 1] - 1))


def build_pair_contrasts(data: SurvivalDataset, max_pairs: int = ModelConstants.MAX_PAIRS) -> PairContrasts:
    '''
    enumerate every (event subject, risk-set peer) pair once, ordered by ascending i then j
    '''
    Q = count_pairs(data)
    if Q == 0:
        raise EmptyPairsError("no (event, risk-set peer) pairs: the data has no events or every event risk set is a singleton")
    if Q > max_pairs:
        raise PairLimitError(
            f"{Q} pair contrasts exceeds the cap of {max_pairs}; "
            f"subsample the data or raise the cap if memory allows ({Q * data.P * 8 / 1e9:.1f} GB needed)"
        )

    left = np.empty(Q, dtype=np.int64)
    right = np.empty(Q, dtype=np.int64)
    pos = 0
    for i in np.flatnonzero(data.events == 1):
        #already in index order
        members = np.flatnonzero(data.times >= data.times[i])
        members = members[members != i]
        k = members.shape[0]
        if k == 0:
            continue
        left[pos:pos + k] = i
        right[pos:pos + k] = members
        pos += k

    pair_index = np.stack([left, right], axis=1)
    contrasts = data.covariates[left] - data.covariates[right]
    logger.debug("[PAIRS] built Q=%d contrasts for n=%d P=%d", Q, data.n, data.P)
    return PairContrasts(contrasts=_frozen(contrasts), pair_index=_frozen(pair_index))
