import json

import pytest

from mmwpt import cli
from mmwpt.harness import SweepResult, SweepRow, derive_seed, run_fig1, run_fig2, worker_count
from mmwpt.params import ConfigError, SystemParams

P = SystemParams()


def test_csv_round_trip(tmp_path):
    res = run_fig1(P, [1e-5, 1e-4], [16], n_trials=500, seed=3)
    text = res.to_csv()
    back = SweepResult.from_csv(text)
    assert back.rows == res.rows
    assert back.metadata == res.metadata
    assert back.to_csv() == text
    assert text.startswith("# ")


def test_json_round_trip():
    res = run_fig1(P, [1e-4], [16, 64], mc=False)
    assert SweepResult.from_json(res.to_json()).rows == res.rows


def test_no_mc_leaves_columns_empty():
    res = run_fig1(P, [1e-4], [32], mc=False)
    (row,) = res.rows
    assert row.mc_total_w is None and row.mc_ci_w is None
    assert row.analytic_lower_w <= row.analytic_total_w
    assert row.pu_stable_w > 0
    line = res.to_csv().splitlines()[-1]
    assert ",," in line


def test_rows_sorted_and_invariant_enforced():
    rows = [SweepRow(1e-3, 64, 1), SweepRow(1e-4, 64, 2), SweepRow(1e-3, 16, 3)]
    assert [(r.m_bs, r.bs_density) for r in SweepResult(rows).rows] == [(16, 1e-3), (64, 1e-4), (64, 1e-3)]
    with pytest.raises(ValueError):
        SweepResult([SweepRow(1e-4, 16, 0, analytic_total_w=1.0, analytic_lower_w=2.0)])


def test_metadata_complete():
    res = run_fig1(P, [1e-4], [16], mc=False, seed=5)
    assert SystemParams(**res.metadata["params"]) == P
    assert res.metadata["global_seed"] == 5 and res.metadata["complete"] is True


def test_seed_derivation():
    a = derive_seed(0, 1e-4, 16)
    assert a == derive_seed(0, 1e-4, 16)
    assert len({a, derive_seed(1, 1e-4, 16), derive_seed(0, 2e-4, 16), derive_seed(0, 1e-4, 64)}) == 4


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("MMWPT_THREADS", "3")
    assert worker_count(10) == 3 and worker_count(2) == 2
    monkeypatch.setenv("MMWPT_THREADS", "0")
    with pytest.raises(ConfigError):
        worker_count(4)


def test_parallel_matches_serial(monkeypatch):
    monkeypatch.setenv("MMWPT_THREADS", "1")
    serial = run_fig1(P, [1e-5, 1e-4], [16], n_trials=400, seed=2)
    monkeypatch.setenv("MMWPT_THREADS", "2")
    parallel = run_fig1(P, [1e-5, 1e-4], [16], n_trials=400, seed=2)
    assert serial.rows == parallel.rows


def test_fig2_rows():
    res = run_fig2(P, [1e-4, 1e-3], [16, 64], n_trials=2000, seed=1)
    for r in res.rows:
        assert r.rate_exact <= r.rate_mc_upper
        assert r.rate_upper_bps == pytest.approx(r.rate_upper * 2e9)
    by_m = {(r.m_bs, r.bs_density): r.rate_upper for r in res.rows}
    assert by_m[(64, 1e-4)] > by_m[(16, 1e-4)]


def test_cli_eval_json(capsys):
    assert cli.main(["eval", "--no-mc", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["analytic_lower_w"] <= doc["analytic_total_w"]


def test_cli_fig1_writes_csv(tmp_path):
    out = tmp_path / "fig1.csv"
    assert cli.main(["fig1", "--no-mc", "--densities", "1e-5,1e-4", "--antennas", "16", "--out", str(out)]) == 0
    res = SweepResult.from_csv(out.read_text())
    assert len(res.rows) == 2


def test_cli_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("beta_los: -1\n")
    assert cli.main(["selftest", "--config", str(cfg)]) == 2
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"] is False and "beta_los" in doc["error"]
    assert cli.main(["fig1", "--config", str(cfg), "--no-mc"]) == 2
