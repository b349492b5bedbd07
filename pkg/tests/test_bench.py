import json
import math

import numpy as np
import pytest

from levymax import cli
from levymax.bench import (CHAIN_HEADER, EXIT_CONFIG, EXIT_FAILURES, OUTPUT_ENV,
                           ExperimentConfig, RunFailure, export_diagnostics, fit_rate,
                           read_chain_csv, read_table, run_experiment, run_rates,
                           write_chain_csv)
from levymax.pmmh import ChainRecord, ConfigError

TINY = dict(T=5, N=5, samples=(30,), burn_in=10, repeats=2, level=3, reference_factor=1,
            seed=4)


def files(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.suffix == ".csv"}


def test_single_repeat_bundle(tmp_path):
    result = run_experiment(ExperimentConfig(**{**TINY, "repeats": 1}), tmp_path)
    rows = read_table(tmp_path / "results.csv")
    assert [r["param"] for r in rows] == ["b", "sigma"] and {r["repeat"] for r in rows} == {"0"}
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["T"] == 5 and manifest["master_seed"] == 4
    assert set(files(tmp_path)) == {"dataset.csv", "results.csv", "levels.csv",
                                    "aggregate.csv", "chain.csv"}
    assert result.exit_code == 0


def test_self_reference_has_zero_error(tmp_path):
    first = run_experiment(ExperimentConfig(**{**TINY, "repeats": 1}), tmp_path / "a")
    est = {r[1]: r[2] for r in first.rows}
    ref = ",".join(f"{p}={v!r}" for p, v in est.items())
    second = run_experiment(ExperimentConfig(**{**TINY, "repeats": 1, "reference": ref}),
                            tmp_path / "b")
    assert [r[4] for r in second.rows] == [0.0, 0.0]


def test_reruns_are_byte_identical(tmp_path):
    config = ExperimentConfig(**{**TINY, "estimator": "multilevel", "levels": (2, 4),
                                 "samples": (30, 20)})
    run_experiment(config, tmp_path / "a")
    run_experiment(config, tmp_path / "b")
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_cost_grows_with_level(tmp_path):
    costs = []
    for level in (2, 5, 9):
        result = run_experiment(ExperimentConfig(**{**TINY, "repeats": 1, "level": level,
                                                    "reference": "truth"}),
                                tmp_path / str(level))
        costs.append(result.aggregate[0][4])
    assert costs[0] < costs[1] < costs[2]
    assert costs[0] == 30 * (2 + 1) * 5 * 5


def test_failures_set_exit_code(tmp_path):
    config = ExperimentConfig(**{**TINY, "reference": "truth"})
    import levymax.bench as bench

    def boom(*args, **kwargs):
        raise ValueError("no")
    original = bench.run_estimator
    bench.run_estimator = boom
    try:
        result = run_experiment(config, tmp_path)
        assert result.failures == 2 and result.exit_code == EXIT_FAILURES
        assert all(r[7] == "failed:ValueError" for r in result.rows)
        with pytest.raises(RunFailure):
            run_experiment(config, tmp_path, raise_on_failure=True)
    finally:
        bench.run_estimator = original


def test_fit_rate_examples():
    cost = np.array([10.0, 100.0, 1e3, 1e4])
    assert fit_rate(np.column_stack([cost, 1 / cost])).slope == pytest.approx(-1, abs=1e-12)
    fit = fit_rate(np.column_stack([cost, 4 / cost ** 2]))
    assert fit.slope == pytest.approx(-2, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(4), abs=1e-12)
    inverse = fit_rate(np.column_stack([cost, 4 / cost ** 2]), response="cost")
    assert inverse.slope == pytest.approx(-0.5, abs=1e-12)


@pytest.mark.parametrize("points", [[(1, 1), (2, 2)], [(5, 1), (5, 2), (5, 3)],
                                    [(1, 1), (2, -2), (3, 3)], [(1, 1), (2, np.nan), (3, 3)]])
def test_fit_rate_errors(points):
    with pytest.raises(ValueError):
        fit_rate(points)


def _records(theta, values):
    return [ChainRecord(theta.with_levy(b=float(v)), np.zeros((1, 2)), -1.0, True)
            for v in values]


def test_diagnostics_on_constant_chain(tmp_path, theta):
    summary = export_diagnostics(_records(theta, [2.0] * 40), tmp_path, params=("b",),
                                 max_lag=5)
    assert summary["b"]["degenerate_variance"] is True
    acf = read_table(tmp_path / "acf_b.csv")
    assert [float(r["acf"]) for r in acf] == [1, 0, 0, 0, 0, 0]


def test_diagnostics_white_noise_and_histogram(tmp_path, theta):
    x = np.abs(np.random.default_rng(0).standard_normal(10_000)) + 0.1
    summary = export_diagnostics(_records(theta, x), tmp_path, params=("b",), bins=30)
    acf = np.array([float(r["acf"]) for r in read_table(tmp_path / "acf_b.csv")])
    assert acf[0] == 1.0 and np.all(np.abs(acf[1:]) < 0.05)
    hist = read_table(tmp_path / "hist_b.csv")
    assert len(hist) == 30 and sum(int(r["count"]) for r in hist) == 10_000
    trace = read_table(tmp_path / "trace_b.csv")
    assert float(trace[7]["value"]) == x[7]
    assert summary["b"]["degenerate_variance"] is False


def test_chain_csv_round_trip(tmp_path, theta):
    recs = _records(theta, [0.5, 0.25, 0.125])
    write_chain_csv(recs, tmp_path / "c.csv")
    cols = read_chain_csv(tmp_path / "c.csv")
    assert list(cols) == CHAIN_HEADER
    np.testing.assert_array_equal(cols["b"], [0.5, 0.25, 0.125])
    assert np.all(np.isnan(cols["log_r1"]))


def test_config_file_and_validation(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('T = 7\nburn-in = 3\nlevels = "2,4,8"\nparams = ["sigma"]\n')
    config = ExperimentConfig.from_file(cfg, N=9)
    assert (config.T, config.burn_in, config.levels, config.params, config.N) == \
        (7, 3, (2, 4, 8), ("sigma",), 9)
    assert ExperimentConfig.full_scale().T == 200
    assert ExperimentConfig.full_scale().burn_in == 10000
    for bad in (dict(repeats=0), dict(model="BM"), dict(obs_cov=(1, 2, 1)),
                dict(params=("alpha",)), dict(levels=(5, 3), estimator="multilevel"),
                dict(dataset=str(tmp_path / "missing.csv")), dict(T="x")):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad)
    (tmp_path / "bad.toml").write_text("colour = 1\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(tmp_path / "bad.toml")


def test_rates_bundle_structure(tmp_path):
    config = ExperimentConfig(T=5, N=5, levels=(2, 4, 6), samples=(40,), burn_in=10,
                              repeats=2, pilot_samples=40, min_samples=20,
                              reference_factor=1, seed=3)
    result = run_rates(config, tmp_path)
    assert len(result.epsilons) == 3
    assert result.epsilons[1] == pytest.approx(result.epsilons[0] / 2)
    for name in ("pilot.csv", "repeats.csv", "points.csv", "rates.csv"):
        assert (tmp_path / name).is_file()
    methods = {r["method"] for r in read_table(tmp_path / "rates.csv")}
    assert methods == {"single", "multilevel"}


def test_cli_exit_codes_and_env_output(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["generate", "--T", "4"]) == 0
    assert (tmp_path / "env" / "dataset.csv").is_file()
    assert cli.main(["run-pmmh", "--T", "0"]) == EXIT_CONFIG
    assert cli.main(["run-pmmh", "--config", str(tmp_path / "nope.toml")]) == EXIT_CONFIG
    assert cli.main(["diagnostics", "--chain", str(tmp_path / "nope.csv")]) == EXIT_CONFIG
    bad = tmp_path / "bad.csv"
    bad.write_text("date,y,ybar\n2020-01-01,x,1\n")
    assert cli.main(["run-pmmh", "--dataset", str(bad)]) == EXIT_CONFIG
    assert "row 2" in capsys.readouterr().err


def test_cli_run_and_diagnostics(tmp_path, capsys):
    out = tmp_path / "run"
    args = ["--T", "5", "--N", "5", "--samples", "30", "--burn-in", "10", "--repeats", "1",
            "--level", "3", "--reference", "truth", "--output", str(out)]
    assert cli.main(["run-pmmh", *args]) == 0
    assert capsys.readouterr().out.startswith("estimator,param,repeats_ok,mse,cost")
    diag = tmp_path / "diag"
    assert cli.main(["diagnostics", "--chain", str(out / "chain.csv"), "--output",
                     str(diag), "--max-lag", "5"]) == 0
    assert (diag / "acf_sigma.csv").is_file() and (diag / "diagnostics.json").is_file()
