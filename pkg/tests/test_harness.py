import dataclasses

import numpy as np
import pytest

from cellfree_pas.config import ExperimentConfig, LayoutConfig, config_from_dict
from cellfree_pas.harness import (
    emit_report,
    format_value,
    greedy_pas,
    metrics_vs_k_tables,
    rng_for,
    run_convergence,
    run_experiment,
    run_metrics_vs_k,
    sweep_alpha,
    tradeoff_tables,
    write_csv,
)


def test_greedy_profile_is_full_power(desk_config):
    rho = greedy_pas(desk_config)
    assert np.array_equal(rho, np.full(6, 0.1))
    assert float(np.sum(greedy_pas(dataclasses.replace(
        desk_config, layout=LayoutConfig(num_ues=10))))) * 1e3 == 1000.0


def test_rng_for_is_deterministic_and_stream_separated():
    a = rng_for(5, 0, 1).standard_normal(4)
    b = rng_for(5, 0, 1).standard_normal(4)
    c = rng_for(5, 0, 2).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_alpha_zero_report_identical_to_greedy(desk_config):
    result = run_experiment(desk_config)
    greedy = result.greedy_report()
    alpha0 = next(r for r in result.game_reports() if r.alpha == 0.0)
    assert np.array_equal(greedy.total_se, alpha0.total_se)
    assert np.array_equal(greedy.min_se, alpha0.min_se)
    assert np.array_equal(greedy.total_ee, alpha0.total_ee)
    assert np.array_equal(greedy.total_power_w, alpha0.total_power_w)


def test_metric_consistency_from_per_ue_rows(desk_config):
    result = run_experiment(desk_config)
    bw = desk_config.bandwidth_hz
    for rep in result.reports:
        for d in range(desk_config.num_drops):
            se = rep.per_ue_se[d]
            rho = rep.per_ue_rho[d]
            assert rep.total_se[d] == pytest.approx(se.sum(), rel=1e-12)
            assert rep.min_se[d] == se.min()
            assert rep.min_se[d] <= rep.total_se[d] / len(se)
            assert rep.total_ee[d] == pytest.approx((bw * se / rho).sum(),
                                                    rel=1e-12)
            assert rep.total_power_w[d] == pytest.approx(rho.sum(), rel=1e-15)
        assert np.all(rep.total_se >= 0) and np.all(rep.total_ee >= 0)


def test_total_power_bounds(desk_config):
    result = run_experiment(desk_config)
    cap = 6 * desk_config.game.p_max_w
    assert np.allclose(result.greedy_report().total_power_w, cap)
    for rep in result.game_reports():
        assert np.all(rep.total_power_w <= cap + 1e-15)


def test_best_alpha_is_argmax_over_grid(desk_config):
    result = run_experiment(desk_config)
    game = result.game_reports()
    for metric in ("total_se", "min_se", "total_ee"):
        values = {r.alpha: float(np.mean(getattr(r, metric))) for r in game}
        alpha, value = result.best_alpha[metric]
        assert value == max(values.values())
        assert values[alpha] == value


def test_ee_arithmetic_example():
    # 1 bit/s/Hz over 20 MHz at 100 mW is 2e8 bit per joule
    from cellfree_pas.harness import _drop_metrics

    class FakeReport:
        se = np.array([1.0, 1.0])

    total_se, min_se, total_ee, total_pw = _drop_metrics(
        FakeReport, np.array([0.1, 0.1]), 2e7)
    assert total_ee == pytest.approx(2 * 2e8, rel=1e-12)
    assert total_se == 2.0 and min_se == 1.0
    assert total_pw == pytest.approx(0.2)


def test_sweep_alpha_rows_sorted_and_reproducible(desk_config):
    rows1 = sweep_alpha(desk_config)
    rows2 = sweep_alpha(desk_config)
    assert rows1 == rows2
    assert [r[0] for r in rows1] == sorted(desk_config.alpha_grid)


def test_sweep_alpha_needs_three_points(desk_config):
    cfg = dataclasses.replace(desk_config, alpha_grid=[0.0, 1.0])
    with pytest.raises(ValueError, match="at least 3"):
        sweep_alpha(cfg)


def test_run_convergence_traces(desk_config):
    cfg = dataclasses.replace(desk_config, alpha_grid=[0.0, 0.6])
    result = run_convergence(cfg)
    assert not result.any_nonconverged
    assert [alpha for alpha, _, _ in result.runs] == [0.0, 0.6]
    for alpha, state, cert in result.runs:
        assert state.converged and cert.is_epsilon_nash
    assert "beta" in result.layout_snapshot


def test_run_metrics_vs_k(desk_config):
    cfg = dataclasses.replace(desk_config, k_grid=[3, 6], num_drops=1,
                              ensemble_size=100, chunk_size=100)
    results = run_metrics_vs_k(cfg)
    assert [k for k, _ in results] == [3, 6]
    for k, res in results:
        assert res.greedy_report().per_ue_se.shape == (1, k)
    tables = metrics_vs_k_tables(results)
    names = [t[0] for t in tables]
    assert names == ["metrics_vs_k", "best_vs_k"]
    grid_rows = tables[0][2]
    # one greedy row plus one per alpha, for each K
    assert len(grid_rows) == 2 * (1 + len(cfg.alpha_grid))


def test_format_value_precision():
    assert format_value(1.0) == "1"
    assert format_value(1e3) == "1000"
    assert format_value(np.pi) == "3.14159265359"
    assert format_value(1.23456789012345e-13) == "1.23456789012e-13"
    assert format_value(None) == ""
    assert format_value(True) == "1"
    assert format_value("game_pas") == "game_pas"


def test_emit_report_empty_rejected(tmp_path):
    with pytest.raises(ValueError, match="no report tables"):
        emit_report([], "csv", str(tmp_path))
    assert list(tmp_path.iterdir()) == []
    with pytest.raises(ValueError, match="format"):
        emit_report([("t", ["a"], [[1]])], "xml", str(tmp_path))


def test_emit_report_csv_and_json_byte_stable(tmp_path):
    tables = [("view", ["alpha", "value"], [[0.5, 1.0 / 3.0], [1.0, 2.0]])]
    for fmt in ("csv", "json"):
        p1 = emit_report(tables, fmt, str(tmp_path / "a"))[0]
        p2 = emit_report(tables, fmt, str(tmp_path / "b"))[0]
        with open(p1, "rb") as fh:
            data1 = fh.read()
        with open(p2, "rb") as fh:
            data2 = fh.read()
        assert data1 == data2
    with open(tmp_path / "a" / "view.csv") as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "alpha,value"
    assert lines[1] == "0.5,0.333333333333"


def test_write_csv_unwritable_path_reported(tmp_path):
    missing = tmp_path / "no_such_dir" / "x.csv"
    with pytest.raises(OSError):
        write_csv(str(missing), ["a"], [[1]])


def test_tradeoff_tables_schema():
    tables = tradeoff_tables([(0.0, 2.0, 1e9), (0.5, 1.5, 2e9)])
    name, header, rows = tables[0]
    assert name == "tradeoff"
    assert header == ["alpha", "mean_total_se", "mean_total_ee"]
    assert rows[0] == [0.0, 2.0, 1e9]


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown top-level"):
        config_from_dict({"scenario": "cell_free", "typo_field": 1})
    with pytest.raises(ValueError, match="unknown keys in config section"):
        config_from_dict({"layout": {"num_apz": 4}})
    cfg = config_from_dict({"layout": {"num_aps": 4, "num_ues": 3},
                            "ensemble_size": 10})
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.layout.num_aps == 4


def test_experiment_reproducible_bitwise(desk_config):
    cfg = dataclasses.replace(desk_config, num_drops=1, ensemble_size=120,
                              chunk_size=60)
    r1 = run_experiment(cfg)
    r2 = run_experiment(cfg)
    for a, b in zip(r1.reports, r2.reports):
        assert np.array_equal(a.per_ue_se, b.per_ue_se)
        assert np.array_equal(a.per_ue_rho, b.per_ue_rho)
