# data_loader.py
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from model_constants import ModelConstants
from survival_data import (
    SurvivalDataset,
    SchemaError,
    ParseError,
    InsufficientDataError,
)


logger = logging.getLogger(__name__)


# ----------------------------
# Parsing helpers
# ----------------------------

def is_missing_cell(s: str) -> bool:
    '''only an empty cell or the literal NA counts as missing'''
    s = s.strip()
    return s == "" or s in ModelConstants.NA_TOKENS


def parse_numeric_column(cells: pd.Series, *, column: str, rows: np.ndarray) -> np.ndarray:
    '''
    the kept cells of one column as floats; rows are file row indices (header excluded)
    the first malformed or non-finite cell raises with its line number
    '''
    values = pd.to_numeric(cells.str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.shape[0]:
        first = int(bad[0])
        raise ParseError(f'non-numeric or non-finite value "{cells.iat[first]}" in column "{column}"', row=int(rows[first]) + 2)
    return values


def split_covariate_list(s: str) -> List[str]:
    '''"age, sex,ph.ecog" -> ["age", "sex", "ph.ecog"]'''
    return [p.strip() for p in s.split(',') if p.strip()]


def default_covariates(columns: Sequence[str], time_col: str, status_col: str) -> List[str]:
    '''the lung covariates when the file has all of them, otherwise every non time/status column'''
    if all(c in columns for c in ModelConstants.LUNG_COVARIATES):
        return list(ModelConstants.LUNG_COVARIATES)
    return [c for c in columns if c not in (time_col, status_col)]


@dataclass
class LoadedCsv:
    dataset: SurvivalDataset
    raw_rows: int
    dropped_rows: int
    event_code: int


# ----------------------------
# Loading
# ----------------------------

def read_csv(
    path: str,
    *,
    time_col: str,
    status_col: str,
    status_event_code: int,
    covariate_cols: Optional[Sequence[str]] = None,
) -> LoadedCsv:
    '''
    read the file, drop incomplete rows in the selected columns, recode status to 0/1
    (1 exactly where status == status_event_code); covariate_cols=None picks default_covariates
    '''
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such data file: {path}")

    #everything as text so that missing vs malformed can be told apart
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    frame.columns = [c.strip() for c in frame.columns]
    if covariate_cols is None:
        covariate_cols = default_covariates(list(frame.columns), time_col, status_col)

    selected = [time_col, status_col, *covariate_cols]
    absent = [c for c in selected if c not in frame.columns]
    if absent:
        raise SchemaError(f"missing column(s) {absent}; available: {list(frame.columns)}")
    if not covariate_cols:
        raise SchemaError("at least one covariate column is required")

    raw_rows = int(frame.shape[0])
    cells = frame[selected]
    missing = cells.apply(lambda col: col.map(is_missing_cell))
    kept_rows = np.flatnonzero(~missing.any(axis=1).to_numpy())
    kept = cells.iloc[kept_rows]

    if kept_rows.shape[0] < 2:
        raise InsufficientDataError(f"{kept_rows.shape[0]} complete row(s) after dropping missing values; need at least 2")
    values = np.column_stack([parse_numeric_column(kept[col], column=col, rows=kept_rows) for col in selected])

    status = values[:, 1]
    codes = np.unique(status)
    if codes.shape[0] > 2:
        raise ParseError(f'status column "{status_col}" has {codes.shape[0]} distinct codes {codes.tolist()}; expected at most 2')
    if status_event_code not in codes:
        raise ParseError(
            f'event code {status_event_code} never occurs in status column "{status_col}" (codes {codes.tolist()}); '
            "check --event-code"
        )
    logger.info("[LOAD] status %s read as event (codes %s)", status_event_code, codes.tolist())

    times = values[:, 0]
    if np.any(times < 0):
        bad = int(kept_rows[np.flatnonzero(times < 0)[0]]) + 2
        raise ParseError(f'negative time in column "{time_col}"', row=bad)

    dataset = SurvivalDataset(
        times=times,
        events=(status == status_event_code).astype(np.int8),
        covariates=values[:, 2:],
        column_names=tuple(covariate_cols),
    )
    return LoadedCsv(dataset=dataset, raw_rows=raw_rows, dropped_rows=raw_rows - dataset.n, event_code=int(status_event_code))


def load_csv(
    path: str,
    time_col: str = ModelConstants.LUNG_TIME_COL,
    status_col: str = ModelConstants.LUNG_STATUS_COL,
    covariate_cols: Optional[Sequence[str]] = None,
    *,
    status_event_code: int,
) -> SurvivalDataset:
    '''SurvivalDataset from a CSV; the lung column names are the default, the event code is always given'''
    cols = None if covariate_cols is None else list(covariate_cols)
    loaded = read_csv(path, time_col=time_col, status_col=status_col, covariate_cols=cols, status_event_code=status_event_code)
    logger.info(
        "[LOAD] %s: %d of %d rows kept (%d dropped for missing values), %d events",
        path, loaded.dataset.n, loaded.raw_rows, loaded.dropped_rows, int(loaded.dataset.events.sum()),
    )
    return loaded.dataset


# ----------------------------
# Writing
# ----------------------------

def dataset_to_frame(data: SurvivalDataset, covariate_names: Optional[Sequence[str]] = None) -> pd.DataFrame:
    '''columns time, status, then covariates; status 1 = event, 0 = censored'''
    names = list(covariate_names) if covariate_names is not None else list(data.column_names)
    frame = pd.DataFrame({"time": data.times, "status": data.events.astype(int)})
    for k, name in enumerate(names):
        frame[name] = data.covariates[:, k]
    return frame


def write_csv(data: SurvivalDataset, path: str, covariate_names: Optional[Sequence[str]] = None) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    dataset_to_frame(data, covariate_names).to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
