# scenario_processor.py
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from model_constants import ModelConstants, TieMethod


# ----------------------------
# Coefficient presets for the synthetic generator
# ----------------------------

BETA_PRESETS: Dict[str, Tuple[float, ...]] = {
    'default': (1.0, 0.5, -1.5, 3.0),
    'three': (1.0, -3.0, -5.0),
    'pair': (1.5, -1.5),
    'zero': (0.0, 0.0),
    'large': (5.0, 3.5),
    'small': (0.01, 0.02, 0.03, -0.05, 0.15),
}

SCENARIO_KEYS = {'name', 'n', 'beta', 'w', 'rounding', 'reps', 'iters', 'burnin', 'censor', 'ties'}


@dataclass(frozen=True)
class BenchScenario:
    name: str
    n: int = 300
    beta0: Tuple[float, ...] = BETA_PRESETS['default']
    w: float = ModelConstants.LEARNING_RATE
    rounding: float = 0.0
    reps: int = 1
    iterations: int = ModelConstants.ITERATIONS
    burn_in: int = ModelConstants.BURN_IN
    censor_rate: float = 1.0
    ties: TieMethod = TieMethod.BRESLOW

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f'scenario "{self.name}": n must be >= 2, got {self.n}')
        if not self.beta0:
            raise ValueError(f'scenario "{self.name}": beta must have at least one entry')
        if not self.w > 0:
            raise ValueError(f'scenario "{self.name}": w must be > 0, got {self.w}')
        if self.rounding < 0:
            raise ValueError(f'scenario "{self.name}": rounding must be >= 0, got {self.rounding}')
        if self.reps < 1:
            raise ValueError(f'scenario "{self.name}": reps must be >= 1, got {self.reps}')
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(f'scenario "{self.name}": need 0 <= burnin < iters, got {self.burn_in}, {self.iterations}')
        if not self.censor_rate > 0:
            raise ValueError(f'scenario "{self.name}": censor rate must be > 0, got {self.censor_rate}')

    def to_dict(self) -> Dict[str, object]:
        return {
            'name': self.name,
            'n': self.n,
            'beta0': list(self.beta0),
            'w': self.w,
            'rounding': self.rounding,
            'reps': self.reps,
            'iterations': self.iterations,
            'burn_in': self.burn_in,
            'censor_rate': self.censor_rate,
            'ties': self.ties.method_name,
        }


def parse_beta(text: str) -> Tuple[float, ...]:
    '''
    Accepts a preset name (default, three, pair, zero, large, small) or a comma list: 1.0,-2,0.5
    '''
    s = text.strip()
    if s.lower() in BETA_PRESETS:
        return BETA_PRESETS[s.lower()]
    parts = [p.strip() for p in s.split(',') if p.strip()]
    if not parts:
        raise ValueError(f'Empty beta "{text}"')
    try:
        return tuple(float(p) for p in parts)
    except ValueError as e:
        raise ValueError(f'Bad beta "{text}". Expected a preset name or a comma list of numbers.') from e


def read_nonempty_noncomment_lines(raw_lines: Sequence[str]) -> List[str]:
    out: List[str] = []
    for ln in raw_lines:
        #inline comments too; '#' is not used by the format
        s = ln.split('//', 1)[0].split('#', 1)[0].strip()
        if s:
            out.append(s)
    return out


def parse_tokens(line: str) -> Dict[str, str]:
    kv: Dict[str, str] = {}
    for tok in line.split():
        if '=' not in tok:
            raise ValueError(f'Bad scenario token "{tok}". Expected key=value.')
        k, v = tok.split('=', 1)
        k = k.strip().lower()
        if k not in SCENARIO_KEYS:
            raise ValueError(f'Unknown scenario key "{k}" in token "{tok}"')
        kv[k] = v.strip()
    return kv


def scenario_from_tokens(kv: Dict[str, str], base: BenchScenario) -> BenchScenario:
    '''fields missing from the line keep the values of base'''
    try:
        return replace(
            base,
            name=kv.get('name', base.name),
            n=int(kv['n']) if 'n' in kv else base.n,
            beta0=parse_beta(kv['beta']) if 'beta' in kv else base.beta0,
            w=float(kv['w']) if 'w' in kv else base.w,
            rounding=float(kv['rounding']) if 'rounding' in kv else base.rounding,
            reps=int(kv['reps']) if 'reps' in kv else base.reps,
            iterations=int(kv['iters']) if 'iters' in kv else base.iterations,
            burn_in=int(kv['burnin']) if 'burnin' in kv else base.burn_in,
            censor_rate=float(kv['censor']) if 'censor' in kv else base.censor_rate,
            ties=TieMethod.parse(kv['ties']) if 'ties' in kv else base.ties,
        )
    except (KeyError, ValueError) as e:
        raise ValueError(f'Bad scenario fields {kv}: {e}') from e


def parse_scenario_lines(lines: Sequence[str], defaults: Optional[BenchScenario] = None) -> List[BenchScenario]:
    '''
    DEFAULTS: key=value ...     optional, applies to every scenario below it
    SCENARIOS:
    name=... n=... beta=... w=... rounding=... reps=...
    '''
    base = defaults if defaults is not None else BenchScenario(name='scenario')
    scenarios: List[BenchScenario] = []
    for ln in read_nonempty_noncomment_lines(lines):
        up = ln.upper()
        if up.startswith('DEFAULTS:'):
            base = scenario_from_tokens(parse_tokens(ln.split(':', 1)[1]), base)
            continue
        if up == 'SCENARIOS:':
            continue
        sc = scenario_from_tokens(parse_tokens(ln), base)
        if 'name=' not in ln.lower():
            sc = replace(sc, name=f'{base.name}_{len(scenarios) + 1}')
        scenarios.append(sc)
    names = [s.name for s in scenarios]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f'duplicate scenario names: {dupes}')
    return scenarios


def load_scenarios(path: str, defaults: Optional[BenchScenario] = None) -> List[BenchScenario]:
    with open(path, 'r', encoding='utf-8') as f:
        raw_lines = f.readlines()
    scenarios = parse_scenario_lines(raw_lines, defaults)
    if not scenarios:
        raise ValueError(f'{path}: no scenarios found')
    return scenarios


def scenarios_from_flags(
    n_values: Sequence[int],
    w_values: Sequence[float],
    beta_presets: Sequence[str],
    rounding_values: Sequence[float],
    reps: int,
    iterations: int = ModelConstants.ITERATIONS,
    burn_in: int = ModelConstants.BURN_IN,
) -> List[BenchScenario]:
    '''full cross product of the flag lists'''
    out: List[BenchScenario] = []
    for n in n_values:
        for w in w_values:
            for preset in beta_presets:
                for r in rounding_values:
                    out.append(BenchScenario(
                        name=f'n{n}_w{w:g}_{preset}_r{r:g}',
                        n=int(n),
                        beta0=parse_beta(preset),
                        w=float(w),
                        rounding=float(r),
                        reps=int(reps),
                        iterations=iterations,
                        burn_in=burn_in,
                    ))
    return out
