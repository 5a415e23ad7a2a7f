"""Test the experiment harness: seeds, grid expansion, results files and the
headline orderings of the simulated study."""
import math

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from ptx.harness.experiment import (
    RESULT_COLUMNS,
    Cell,
    expand_cells,
    results_frame,
    run_cell,
    run_figure4,
    run_gamma_sweep,
    write_results,
)
from ptx.harness.summary import get_bootstrap_result, load_results, summarize
from ptx.errors import ConfigError
from ptx.privacy.accountant import MechanismSchedule, epsilon_spent
from ptx.protocol.api_protocol import ExperimentConfig, RunManifest
from ptx.utils import ceil_count, derive_seed

GOLDEN_HEADER = (
    "method,n1,n2,eps,gamma,trial,seed,l2_param_error,excess_risk,sin_theta,"
    "eps_spent,noise_multiplier,steps,sampling_rate,wall_ms,error"
)


def small_config(**kwargs):
    base = dict(
        d=6,
        k=2,
        t=4,
        n1_list=[200],
        n2_list=[100],
        eps_list=[1.0],
        dp={"epochs": 2},
        trials=2,
    )
    base.update(kwargs)
    return ExperimentConfig.parse_obj(base)


def mean_by(df, *keys, metric="excess_risk"):
    return df[df["error"] == ""].groupby(list(keys))[metric].mean()


def test_derive_seed_layout():
    a = derive_seed(0, "private", n2=500, trial=3)
    assert a == derive_seed(0, "private", n2=500, trial=3)
    assert 0 <= a < 2**64
    assert a != derive_seed(1, "private", n2=500, trial=3)
    assert a != derive_seed(0, "public", n2=500, trial=3)
    assert a != derive_seed(0, "private", n2=500, trial=4)
    assert derive_seed(0, "oracle", gamma=None) != derive_seed(0, "oracle", gamma=0.0)


def test_ceil_count():
    assert ceil_count(625.0000000000001) == 625
    assert ceil_count(625.2) == 626
    assert ceil_count(3.0) == 3


def test_expand_cells_collapses_unused_coordinates():
    cfg = small_config(n1_list=[100, 200], eps_list=[0.5, 1.0])
    cells = expand_cells(cfg, cfg.methods)
    ols = [c for c in cells if c.method == "nonprivate_ols"]
    assert len(ols) == cfg.trials
    assert all(c.n1 == 0 and math.isinf(c.eps) and c.gamma is None for c in ols)
    assert len([c for c in cells if c.method == "two_phase_mom"]) == 2 * 2 * cfg.trials
    assert cells == sorted(cells, key=Cell.sort_key)
    assert cells[0].method == "nonprivate_ols"


def test_seeds_are_distinct():
    cfg = small_config(n1_list=[100, 200], eps_list=[0.5, 1.0], trials=3)
    seeds = [c.seed(cfg.base_seed) for c in expand_cells(cfg, cfg.methods)]
    assert len(seeds) == len(set(seeds))


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(k=7)
    with pytest.raises(ValueError):
        small_config(eps_list=[])
    with pytest.raises(ValueError):
        small_config(methods=["lasso"])
    with pytest.raises(ValueError):
        small_config(methods=["two_phase_oracle_gamma"])
    assert ExperimentConfig.parse_obj({"n2": 250}).n2_list == [250]


def test_results_file_header_and_manifest(tmp_path):
    cfg = small_config()
    out = str(tmp_path / "results.csv")
    df = write_results(run_figure4(cfg), out, cfg, command="figure4", timing=False)
    with open(out) as f:
        assert f.readline().strip() == GOLDEN_HEADER
    assert list(df.columns) == RESULT_COLUMNS
    assert (df["wall_ms"] == 0).all()
    manifest = RunManifest.parse_file(str(tmp_path / "results.manifest.json"))
    assert manifest.cells == len(df)
    assert manifest.failed_cells == 0
    assert manifest.config == cfg


def test_rerun_is_byte_identical(tmp_path):
    cfg = small_config()
    paths = []
    for name, jobs in (("a.csv", 1), ("b.csv", 1), ("c.csv", 2)):
        path = tmp_path / name
        write_results(run_figure4(cfg, jobs=jobs), str(path), cfg, "figure4", timing=False)
        paths.append(path)
    first = paths[0].read_bytes()
    assert all(p.read_bytes() == first for p in paths[1:])


def test_nonprivate_noiseless_recovers_truth():
    cfg = small_config(noise_std=0.0, methods=["nonprivate_ols"], n2_list=[50])
    df = results_frame(run_figure4(cfg))
    assert (df["l2_param_error"] < 1e-6).all()
    assert df["eps_spent"].isna().all()


def test_reported_epsilon_rederives():
    cfg = small_config(eps_list=[0.5, 2.0])
    df = results_frame(run_figure4(cfg))
    private = df[np.isfinite(df["eps"])]
    assert len(private) > 0
    for _, row in private.iterrows():
        assert row["eps_spent"] <= row["eps"]
        sched = MechanismSchedule(int(row["steps"]), row["sampling_rate"], row["noise_multiplier"])
        assert epsilon_spent(sched, cfg.delta) == pytest.approx(row["eps_spent"], abs=1e-3)


def test_failed_cells_become_error_rows():
    cfg = small_config(n2_list=[10])
    df = results_frame(run_figure4(cfg))
    failed = df[df["error"] != ""]
    assert set(failed["method"]) >= {"dpsgd_scratch"}
    assert failed["error"].str.startswith("InvalidArgs").all()
    ok = df[df["method"] == "nonprivate_ols"]
    assert (ok["error"] == "").all()


def test_run_cell_fills_metrics():
    cfg = small_config()
    row = run_cell(cfg, Cell("two_phase_mom", 200, 100, 1.0, None, 0))
    assert row.error == ""
    assert 0.0 <= row.sin_theta <= 1.0
    assert row.excess_risk == pytest.approx(0.5 * row.l2_param_error**2)
    assert row.steps == 2 * (100 // 32)


def test_gamma_sweep_needs_gammas():
    with pytest.raises(ConfigError):
        run_gamma_sweep(small_config())


def test_figure4_orderings():
    cfg = ExperimentConfig(n1_list=[500, 2000, 200_000], n2_list=[500], eps_list=[1.1], trials=40)
    df = results_frame(run_figure4(cfg))
    assert (df["error"] == "").all()
    by_method = mean_by(df[df["method"] != "two_phase_mom"], "method")
    two_phase = mean_by(df[df["method"] == "two_phase_mom"], "n1")

    scratch = by_method["dpsgd_scratch"]
    assert by_method["nonprivate_ols"] < scratch
    assert by_method["dpsgd_true_subspace"] < scratch
    assert two_phase[2000] <= two_phase[500]
    assert scratch >= 1.5 * two_phase[200_000]
    # with a near-exact public subspace two-phase approaches the true-B baseline
    assert two_phase[200_000] < 2 * by_method["dpsgd_true_subspace"]

    error = mean_by(df[df["method"] != "two_phase_mom"], "method", metric="l2_param_error")
    error_tp = mean_by(df[df["method"] == "two_phase_mom"], "n1", metric="l2_param_error")
    assert error["nonprivate_ols"] < error["dpsgd_true_subspace"]
    assert error["dpsgd_true_subspace"] < error_tp[2000] <= error_tp[500]
    assert error_tp[500] < error["dpsgd_scratch"]
    assert error["dpsgd_scratch"] >= 1.5 * error_tp[2000]


def test_gamma_sweep_bias_plateau():
    gammas = [0.0, 0.1, 0.2, 0.4]
    cfg = ExperimentConfig(
        methods=["two_phase_oracle_gamma"], gamma_list=gammas, n2_list=[4000, 8000], trials=50
    )
    risk = mean_by(results_frame(run_gamma_sweep(cfg)), "n2", "gamma")
    for n2 in (4000, 8000):
        assert all(risk[n2, a] <= risk[n2, b] for a, b in zip(gammas, gammas[1:]))

    # aligned oracle: the lifted bias is gamma^2 ||B alpha||^2
    bias = 0.5 * 0.2**2
    assert 0.25 * bias <= risk[8000, 0.2] <= 4 * bias
    assert risk[8000, 0.2] <= risk[4000, 0.2]
    # the excess over the aligned estimate stays at the bias as n2 doubles
    floor = {n2: risk[n2, 0.2] - risk[n2, 0.0] for n2 in (4000, 8000)}
    for n2 in (4000, 8000):
        assert floor[n2] == pytest.approx(bias, rel=0.25)
    assert abs(floor[8000] - floor[4000]) <= 0.15 * bias


def test_risk_falls_as_epsilon_grows():
    eps_grid = [0.3, 0.5, 1.0, 2.0, 5.0]
    cfg = ExperimentConfig(
        methods=["two_phase_mom"], n1_list=[80_000], n2_list=[1000], eps_list=eps_grid, trials=50
    )
    risk = mean_by(results_frame(run_figure4(cfg)), "eps")
    rho, _ = stats.spearmanr(eps_grid, [risk[e] for e in eps_grid])
    assert rho <= -0.8


def test_summarize_groups_cells(tmp_path):
    cfg = small_config(trials=4)
    out = str(tmp_path / "results.csv")
    write_results(run_figure4(cfg), out, cfg, "figure4")
    table = summarize(load_results(out), metric="excess_risk", num_round=200)
    assert set(table["method"]) == set(cfg.methods)
    assert (table["trials"] == 4).all()
    assert (table["lower"] <= table["upper"]).all()
    ols = table[table["method"] == "nonprivate_ols"].iloc[0]
    assert pd.isna(ols["gamma"])


def test_bootstrap_of_constant_is_constant():
    boot = get_bootstrap_result(np.full(10, 3.0), num_round=50)
    assert np.all(boot == 3.0)
