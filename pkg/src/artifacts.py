'''
artifacts.py

Files a run leaves behind:
  <prefix>.report.json     fit report / calibration trace / bench summary
  <prefix>.samples.csv     M x P draws, header beta_1..beta_P
  <prefix>.samples.json    sidecar for the samples CSV
  <prefix>.acf.csv         optional correlogram
  <prefix>.manifest.json   resolved configuration and its hash
  <prefix>.error.json      written instead of the report when a run fails

JSON is written with keys in insertion order so that reruns diff cleanly.
'''

from __future__ import annotations

import datetime
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

import random_streams
from chain import Chain, sample_header


TOOL_NAME = "coxgibbs"
TOOL_VERSION = "1.0.0"


# -----------------------
# Stable JSON
# -----------------------

def _plain(v: Any) -> Any:
    '''numpy containers and scalars as python values; non-finite floats become None'''
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        x = float(v)
        #json has no inf/nan
        return x if math.isfinite(x) else None
    return v


def dumps(obj: Any, indent: int = 2) -> str:
    '''json text with keys in insertion order; floats use the shortest round-trip repr'''
    return json.dumps(_plain(obj), indent=indent, allow_nan=False, ensure_ascii=False)


def write_json(path: str, obj: Any) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(obj))
        f.write("\n")


# -----------------------
# Manifest
# -----------------------

@dataclass
class RunManifest:
    subcommand: str
    config: Dict[str, Any]
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    seed: Optional[int] = None
    timestamp: str = field(default_factory=lambda: datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"))

    def content(self) -> Dict[str, Any]:
        '''everything the hash covers; the timestamp is left out so reruns hash the same'''
        algorithm, numpy_version = random_streams.describe()
        return {
            "tool": TOOL_NAME,
            "tool_version": TOOL_VERSION,
            "subcommand": self.subcommand,
            "seed": self.seed,
            "rng": algorithm,
            "numpy_version": numpy_version,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "config": self.config,
        }

    @property
    def hash(self) -> str:
        return hashlib.sha256(dumps(self.content()).encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        d = self.content()
        d["timestamp"] = self.timestamp
        d["manifest_hash"] = self.hash
        return d

    def write(self, path: str) -> None:
        write_json(path, self.to_dict())


def artifact_paths(prefix: str) -> Dict[str, str]:
    return {
        "report": f"{prefix}.report.json",
        "samples": f"{prefix}.samples.csv",
        "sidecar": f"{prefix}.samples.json",
        "acf": f"{prefix}.acf.csv",
        "manifest": f"{prefix}.manifest.json",
        "error": f"{prefix}.error.json",
    }


# -----------------------
# Chains
# -----------------------

def write_samples(chain: Chain, path: str) -> None:
    '''one row per iteration, burn-in included'''
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame = pd.DataFrame(np.asarray(chain.samples), columns=sample_header(chain.P))
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def read_samples(path: str) -> np.ndarray:
    frame = pd.read_csv(path, dtype=float)
    expected = list(sample_header(frame.shape[1]))
    if list(frame.columns) != expected:
        raise ValueError(f"{path}: expected header {','.join(expected)}")
    return frame.to_numpy()


def write_sidecar(chain: Chain, path: str, manifest_hash: Optional[str] = None) -> None:
    d = chain.to_dict()
    d["columns"] = list(chain.column_names)
    if manifest_hash is not None:
        d["manifest_hash"] = manifest_hash
    write_json(path, d)


def write_autocorrelation(autocorr: Sequence[np.ndarray], columns: Sequence[str], path: str) -> None:
    '''lag,<col1>,<col2>,... one row per lag'''
    if not autocorr:
        return
    lags = len(autocorr[0])
    frame = pd.DataFrame({"lag": np.arange(lags)})
    for name, rho in zip(columns, autocorr):
        frame[name] = rho
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def error_payload(exc: BaseException) -> Dict[str, Any]:
    return {"error": type(exc).__name__, "message": str(exc)}


def write_error(path: str, exc: BaseException) -> Dict[str, Any]:
    payload = error_payload(exc)
    write_json(path, payload)
    return payload


def write_rows(rows: List[Dict[str, Any]], columns: Sequence[str], path: str) -> None:
    '''bench table; missing cells are empty'''
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame = pd.DataFrame(rows, columns=list(columns))
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
