import os

import pytest

from model_constants import TieMethod
from scenario_processor import (
    BETA_PRESETS,
    BenchScenario,
    load_scenarios,
    parse_beta,
    parse_scenario_lines,
    parse_tokens,
    scenarios_from_flags,
)


SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "scenarios")


def test_parse_beta() -> None:
    assert parse_beta("default") == (1.0, 0.5, -1.5, 3.0)
    assert parse_beta(" Small ") == BETA_PRESETS["small"]
    assert parse_beta("1,-2.5, 0") == (1.0, -2.5, 0.0)
    with pytest.raises(ValueError):
        parse_beta("1,abc")
    with pytest.raises(ValueError):
        parse_beta(" , ")


def test_parse_tokens() -> None:
    assert parse_tokens("name=a N=50 w=0.5") == {"name": "a", "n": "50", "w": "0.5"}
    with pytest.raises(ValueError):
        parse_tokens("n=50 oops")
    with pytest.raises(ValueError):
        parse_tokens("colour=red")


def test_defaults_and_comments() -> None:
    lines = [
        "// header comment",
        "DEFAULTS: n=80 iters=200 burnin=50",
        "",
        "SCENARIOS:",
        "name=a beta=pair   // trailing comment",
        "name=b w=0.3 rounding=0.01 ties=efron",
    ]
    a, b = parse_scenario_lines(lines)
    assert (a.name, a.n, a.beta0, a.iterations, a.burn_in) == ("a", 80, (1.5, -1.5), 200, 50)
    assert (b.w, b.rounding, b.ties) == (0.3, 0.01, TieMethod.EFRON)
    assert b.beta0 == BETA_PRESETS["default"]


def test_unnamed_scenarios_are_numbered() -> None:
    scenarios = parse_scenario_lines(["n=50", "n=60"])
    assert [s.name for s in scenarios] == ["scenario_1", "scenario_2"]


def test_duplicate_names() -> None:
    with pytest.raises(ValueError):
        parse_scenario_lines(["name=x n=50", "name=x n=60"])


@pytest.mark.parametrize("line", ["n=1", "w=0", "rounding=-1", "reps=0", "iters=10 burnin=10", "censor=0", "n=ten"])
def test_bad_scenarios(line) -> None:
    with pytest.raises(ValueError):
        parse_scenario_lines([line])


def test_flag_cross_product() -> None:
    scenarios = scenarios_from_flags([50, 100], [0.5, 1.0], ["pair"], [0.0, 0.01], reps=2, iterations=100, burn_in=20)
    assert len(scenarios) == 8
    assert len({s.name for s in scenarios}) == 8
    assert scenarios[0].name == "n50_w0.5_pair_r0"
    assert all(s.reps == 2 and s.iterations == 100 for s in scenarios)


def test_to_dict() -> None:
    d = BenchScenario(name="x", beta0=(1.0, 2.0)).to_dict()
    assert d["beta0"] == [1.0, 2.0] and d["ties"] == "breslow"


@pytest.mark.parametrize("fname, count", [
    ("default.txt", 4),
    ("sample_size.txt", 6),
    ("learning_rate.txt", 5),
    ("parameter.txt", 4),
    ("ties.txt", 5),
])
def test_shipped_scenario_files(fname, count) -> None:
    scenarios = load_scenarios(os.path.join(SCENARIO_DIR, fname))
    assert len(scenarios) == count


def test_empty_file(tmp_path) -> None:
    path = tmp_path / "empty.txt"
    path.write_text("// nothing\nSCENARIOS:\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_scenarios(str(path))
