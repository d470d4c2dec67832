import json

import pandas as pd
import pytest

from coxgibbs import BENCH_COLUMNS, main


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


@pytest.fixture
def sim_csv(tmp_path) -> str:
    out = str(tmp_path / "sim.csv")
    assert main(["simulate", "--n", "80", "--beta", "pair", "--seed", "7", "--out", out, "--quiet"]) == 0
    return out


def test_simulate(tmp_path, capsys) -> None:
    out = str(tmp_path / "sim.csv")
    assert main(["simulate", "--n", "80", "--beta", "pair", "--seed", "7", "--out", out]) == 0
    assert "[SIM]" in capsys.readouterr().out
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["time", "status", "x1", "x2"]
    assert len(frame) == 80
    manifest = read_json(tmp_path / "sim.manifest.json")
    assert manifest["subcommand"] == "simulate" and manifest["seed"] == 7


@pytest.mark.parametrize("argv", [
    ["simulate", "--n", "1", "--out", "x.csv"],
    ["simulate", "--rounding", "-1", "--out", "x.csv"],
    ["fit", "--data", "x.csv", "--event-code", "1", "--iters", "10", "--burnin", "10", "--out-prefix", "x"],
    ["fit", "--data", "x.csv", "--event-code", "1", "--alpha", "1.5", "--out-prefix", "x"],
    ["fit", "--data", "x.csv", "--event-code", "1", "--method", "mh", "--no-correction", "--out-prefix", "x"],
    ["calibrate", "--data", "x.csv", "--event-code", "1", "--bootstrap", "0", "--out-prefix", "x"],
    ["bench", "--reps", "0", "--out", "x.csv"],
])
def test_bad_flags_exit_2(tmp_path, monkeypatch, argv) -> None:
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert not list(tmp_path.iterdir())


def test_unknown_method_is_an_argparse_error() -> None:
    with pytest.raises(SystemExit) as err:
        main(["fit", "--data", "x.csv", "--event-code", "1", "--method", "hmc", "--out-prefix", "x"])
    assert err.value.code == 2


def test_event_code_flag_is_required(sim_csv) -> None:
    with pytest.raises(SystemExit) as err:
        main(["fit", "--data", sim_csv, "--out-prefix", "x"])
    assert err.value.code == 2


def test_fit_writes_artifacts(tmp_path, sim_csv) -> None:
    prefix = str(tmp_path / "run")
    argv = ["fit", "--data", sim_csv, "--event-code", "1", "--iters", "200", "--burnin", "50", "--seed", "3",
            "--acf-lags", "5", "--out-prefix", prefix, "--quiet"]
    assert main(argv) == 0

    report = read_json(f"{prefix}.report.json")
    assert report["method"] == "GS4Cox"
    assert report["columns"] == ["x1", "x2"]
    assert len(report["estimates"]) == 2 and report["correction"] is not None
    assert "precorrection_estimates" in report and "mple" in report
    manifest = read_json(f"{prefix}.manifest.json")
    assert report["manifest_hash"] == manifest["manifest_hash"]
    assert read_json(f"{prefix}.samples.json")["manifest_hash"] == manifest["manifest_hash"]

    samples = pd.read_csv(f"{prefix}.samples.csv")
    assert list(samples.columns) == ["beta_1", "beta_2"] and len(samples) == 200
    assert len(pd.read_csv(f"{prefix}.acf.csv")) == 6

    first = open(f"{prefix}.samples.csv", "rb").read()
    assert main(argv) == 0
    assert open(f"{prefix}.samples.csv", "rb").read() == first
    assert read_json(f"{prefix}.manifest.json")["manifest_hash"] == manifest["manifest_hash"]


def test_fit_mh(tmp_path, sim_csv) -> None:
    prefix = str(tmp_path / "mh")
    assert main(["fit", "--data", sim_csv, "--event-code", "1", "--method", "mh", "--w", "0.5", "--iters", "200", "--burnin", "50",
                 "--out-prefix", prefix, "--quiet"]) == 0
    report = read_json(f"{prefix}.report.json")
    assert report["method"] == "MH-Hessian"
    assert 0 <= report["acceptance_rate"] <= 1
    assert report["correction"] is None and "precorrection_estimates" not in report


def test_fit_without_correction(tmp_path, sim_csv) -> None:
    prefix = str(tmp_path / "raw")
    assert main(["fit", "--data", sim_csv, "--event-code", "1", "--no-correction", "--iters", "100", "--burnin", "20",
                 "--out-prefix", prefix, "--quiet"]) == 0
    report = read_json(f"{prefix}.report.json")
    assert report["correction"] is None and report["config"]["correction"] is False


def test_missing_data_file_exit_1(tmp_path, capsys) -> None:
    prefix = str(tmp_path / "broken")
    assert main(["fit", "--data", str(tmp_path / "nope.csv"), "--event-code", "1", "--out-prefix", prefix, "--quiet"]) == 1
    error = read_json(f"{prefix}.error.json")
    assert error["error"] == "FileNotFoundError"
    assert json.loads(capsys.readouterr().out.strip().splitlines()[-1]) == error


def test_calibrate_single_round(tmp_path, sim_csv) -> None:
    prefix = str(tmp_path / "gpc")
    assert main(["calibrate", "--data", sim_csv, "--event-code", "1", "--bootstrap", "1", "--max-rounds", "1", "--iters", "60",
                 "--burnin", "20", "--out-prefix", prefix, "--quiet"]) == 0
    report = read_json(f"{prefix}.report.json")
    assert list(report)[:5] == ["method", "w", "converged", "target", "trace"]
    assert len(report["trace"]) == 1 and report["trace"][0]["w"] == 1.0


def test_bench_grid(tmp_path) -> None:
    out = str(tmp_path / "bench.csv")
    assert main(["bench", "--n", "50", "--beta-preset", "pair", "--reps", "2", "--iters", "60", "--burnin", "20",
                 "--methods", "gs4cox,mh", "--out", out, "--quiet"]) == 0
    table = pd.read_csv(out)
    assert list(table.columns) == list(BENCH_COLUMNS)
    assert len(table) == 4
    assert sorted(table["method"].unique()) == ["GS4Cox", "MH-Hessian"]
    assert read_json(tmp_path / "bench.manifest.json")["subcommand"] == "bench"


def test_bench_scenario_file(tmp_path) -> None:
    grid = tmp_path / "grid.txt"
    grid.write_text("DEFAULTS: n=40 iters=40 burnin=10\nname=tiny beta=pair\nname=tied beta=pair rounding=0.01\n",
                    encoding="utf-8")
    out = str(tmp_path / "b.csv")
    assert main(["bench", "--scenarios", str(grid), "--methods", "mh", "--out", out, "--quiet"]) == 0
    assert pd.read_csv(out)["scenario"].tolist() == ["tiny", "tied"]


def method_means(table: pd.DataFrame, column: str) -> dict:
    return table.groupby(["n", "method"])[column].mean().to_dict()


@pytest.mark.slow
@pytest.mark.statistical
def test_bench_zero_effects_favour_gibbs(tmp_path) -> None:
    out = str(tmp_path / "zero.csv")
    assert main(["bench", "--n", "300", "--beta-preset", "zero", "--reps", "3", "--out", out, "--quiet"]) == 0
    table = pd.read_csv(out)
    assert table["error"].isna().all()
    ess = table.groupby("method")["ess"].mean()
    assert ess["GS4Cox"] >= 5.0 * ess["MH-Hessian"]


@pytest.mark.slow
@pytest.mark.statistical
def test_bench_gibbs_esr_falls_faster_with_n(tmp_path) -> None:
    out = str(tmp_path / "n.csv")
    assert main(["bench", "--n", "100,400", "--reps", "2", "--out", out, "--quiet"]) == 0
    esr = method_means(pd.read_csv(out), "esr")
    gibbs_drop = esr[(100, "GS4Cox")] / esr[(400, "GS4Cox")]
    mh_drop = esr[(100, "MH-Hessian")] / esr[(400, "MH-Hessian")]
    assert gibbs_drop > mh_drop
