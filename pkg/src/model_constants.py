'''model_constants.py'''

import os
from enum import Enum


'''
----------------------
General Model Constants
----------------------
'''

class TieMethod(Enum):
  '''how the partial likelihood treats subjects that fail at the same time'''
  def __init__(self, method_name: str, method_id: int):
    self.__method_name = method_name
    self.__method_id = method_id

  @property
  def method_name(self): return self.__method_name
  @property
  def method_id(self): return self.__method_id

  @classmethod
  def parse(cls, text: str) -> "TieMethod":
    '''accepts "breslow", "EFRON", "TieMethod.EFRON"'''
    name = str(text).split('.', 1)[-1].strip().upper()
    try:
      return cls[name]
    except KeyError as e:
      raise ValueError(f'Unknown tie method "{text}" (expected breslow or efron)') from e

  BRESLOW = ("breslow", 0)
  EFRON = ("efron", 1)


class SamplerMethod(Enum):
  '''the two samplers the engine can run'''
  def __init__(self, method_name: str, label: str, corrects: bool):
    self.__method_name = method_name
    self.__label = label
    self.__corrects = corrects

  @property
  def method_name(self): return self.__method_name
  @property
  def label(self): return self.__label
  @property
  def corrects(self): return self.__corrects

  @classmethod
  def parse(cls, text: str) -> "SamplerMethod":
    name = str(text).split('.', 1)[-1].strip().upper()
    aliases = {"GS4COX": "GS4COX", "GIBBS": "GS4COX", "MH": "MH", "MH-HESSIAN": "MH", "MH_HESSIAN": "MH"}
    if name not in aliases:
      raise ValueError(f'Unknown sampler "{text}" (expected gs4cox or mh)')
    return cls[aliases[name]]

  GS4COX = ("gs4cox", "GS4Cox", True)
  MH = ("mh", "MH-Hessian", False)


class FrozenMeta(type):
  '''cannot edit model constants check'''
  def __setattr__(cls, name, value):
    raise AttributeError(f"Cannot edit constants '{name}' in ModelConstants")

class ModelConstants(metaclass = FrozenMeta):
  #sampler defaults (no-flags path reproduces the default synthetic scenario)
  ITERATIONS = 1000
  BURN_IN = 500
  LEARNING_RATE = 1.0
  PRIOR_VARIANCE = 100.0

  #newton solvers stop on the sup-norm of the score
  NEWTON_TOL = 1e-8
  NEWTON_MAX_ITER = 50
  MAX_STEP_HALVINGS = 30

  #largest drop of the running maximum of X b allowed under one shared log-sum-exp shift
  LOG_SHIFT_SPAN = 300.0

  #hard cap on the number of pair contrasts held in memory
  MAX_PAIRS = 50_000_000
  PAIR_BLOCK_SIZE = 65_536

  #exact PG(1, c) sampler
  PG_TRUNCATION = 0.64
  PG_MAX_SERIES_TERMS = 200

  #random walk proposal scale numerator, s = 2.38 / sqrt(P)
  MH_SCALE_NUMERATOR = 2.38

  #calibration
  GPC_BOOTSTRAP = 100
  GPC_ALPHA = 0.05
  GPC_TOL = 0.001
  GPC_MAX_ROUNDS = 1000
  GPC_W_MIN = 1e-4
  GPC_W_MAX = 1e3
  GPC_MAX_DROP_FRACTION = 0.2
  GPC_INNER_ITERATIONS = 600
  GPC_INNER_BURN_IN = 200

  #diagnostics
  ESS_CAP_FACTOR = 1.05
  ESS_MIN_DRAWS = 10
  SUMMARY_MIN_DRAWS = 20

  #missing value tokens for CSV ingestion (empty cell is always missing)
  NA_TOKENS = ("NA",)

  THREADS_ENV = "COXGIBBS_THREADS"

  #lung schema defaults for the CLI
  LUNG_TIME_COL = "time"
  LUNG_STATUS_COL = "status"
  LUNG_EVENT_CODE = 2
  LUNG_COVARIATES = ("age", "sex", "ph.ecog", "ph.karno", "pat.karno", "meal.cal", "wt.loss")


def thread_count() -> int:
  '''worker threads from the environment; 0 means single-threaded reference mode'''
  raw = os.environ.get(ModelConstants.THREADS_ENV, "").strip()
  if not raw:
    return 0
  try:
    n = int(raw)
  except ValueError as e:
    raise ValueError(f"{ModelConstants.THREADS_ENV} must be an integer, got {raw!r}") from e
  return max(0, n)
