'''
random_streams.py

Every random draw in the engine comes from a numpy Generator backed by the
counter-based Philox bit generator. Independent sub-streams are derived from a
root seed plus an integer path, e.g. (seed, sweep, block) or
(seed, round, replicate), through numpy's SeedSequence, so parallel work gets
non-overlapping streams that do not depend on scheduling.

Reproducibility holds for a fixed numpy version (pinned in requirements.txt).
'''

from typing import Tuple

import numpy as np


STREAM_ALGORITHM = "numpy.random.Philox(SeedSequence(seed, path))"


def _entropy(seed: int) -> int:
    '''seeds are 64-bit; negative seeds wrap the way a uint64 would'''
    return int(seed) % (1 << 64)


def stream(seed: int, *path: int) -> np.random.Generator:
    '''generator for (seed, path...)'''
    ss = np.random.SeedSequence(entropy=_entropy(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *path: int) -> int:
    '''a derived 64-bit integer seed, for handing to code that takes a seed rather than a Generator'''
    ss = np.random.SeedSequence(entropy=_entropy(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def describe() -> Tuple[str, str]:
    return STREAM_ALGORITHM, np.__version__
