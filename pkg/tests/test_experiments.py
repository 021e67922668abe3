import csv
import json

import numpy as np
import pytest

from cfa_storage import experiments as ex
from cfa_storage.simulator import default_scenario


def small_config(**kw):
    base = dict(
        scenario=default_scenario(0.0, horizon_T=10, lookahead_H=4),
        eval_paths=4,
        search_paths=3,
        grid=(0.8, 1.0, 1.2),
    )
    base.update(kw)
    return ex.ExperimentConfig(**base)


def test_seed_pools_disjoint():
    search = {ex.search_seed(s, j) for s in range(3) for j in range(100)}
    held = {ex.heldout_seed(s, j) for s in range(3) for j in range(100)}
    assert not search & held
    with pytest.raises(ValueError):
        ex.search_seed(0, ex.POOL_STRIDE)


def test_select_argmin_prefers_one_on_ties():
    assert ex.select_argmin([0.8, 1.0, 1.2], [-5.0, -5.0, -5.0]) == 1
    assert ex.select_argmin([0.8, 1.0, 1.2], [-5.0 - 1e-12, -5.0, -5.0]) == 1
    assert ex.select_argmin([0.8, 1.0, 1.2], [-6.0, -5.0, -5.0]) == 0
    assert ex.select_argmin([0.8, 1.2], [-5.0, -5.0]) == 0


def test_grid_single_point_is_benchmark():
    cfg = small_config(grid=(1.0,))
    res = ex.grid_search_const(cfg, 0.3)
    assert [r.delta_f for r in res.rows] == [0.0, 0.0]
    assert res.argmin_theta == 1.0


def test_grid_noiseless_argmin_is_one():
    res = ex.grid_search_const(small_config(), 0.0)
    assert res.argmin_theta == 1.0
    assert sum(r.argmin for r in res.search_rows) == 1


def test_coordinate_sweep_only_one_is_flat():
    cfg = small_config(grid=(1.0,), family="lkup")
    res = ex.coordinate_search_lkup(cfg, 0.2)
    assert len(res.rows) == 4
    assert all(r.mean_cost == res.benchmark_mean for r in res.rows)
    assert res.argmins == (1.0,) * 4


def test_coordinate_rows_vary_one_coordinate():
    cfg = small_config(family="lkup")
    res = ex.coordinate_search_lkup(cfg, 0.2)
    for row in res.rows:
        changed = [i for i, v in enumerate(row.theta) if v != 1.0]
        assert changed in ([], [row.coordinate - 1])
    theta, means = res.curve(2)
    assert theta.tolist() == [0.8, 1.0, 1.2]
    assert means[1] == res.benchmark_mean


def test_tune_without_iterations_is_benchmark():
    cfg = small_config(family="lkup", sang=ex.SangSettings(iters=0))
    res = ex.tune(cfg, 0.2)
    assert res.sang is None
    assert res.delta_f == 0.0
    assert res.theta.tolist() == [1.0] * 4


def test_tune_budget_matches_batches():
    for batch in (1, 2, 4):
        cfg = small_config(family="const", sang=ex.SangSettings(budget=16, batch=batch, snapshots=2,
                                                               monitor_paths=2))
        res = ex.tune(cfg, 0.2)
        assert res.sang.evaluations == 16
        assert [r.evals for r in res.curve] == [0, 8, 16]


def test_tune_runs_are_replayable(tmp_path):
    cfg = small_config(family="exp", sang=ex.SangSettings(iters=3, batch=2, snapshots=1, monitor_paths=2),
                       rho_levels=(0.2,), experiment_id="t")
    ex.run_tune(cfg, tmp_path / "a")
    ex.run_tune(cfg, tmp_path / "b")
    for name in ("t.csv", "t.rho0.2.history.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_grid_replayable(tmp_path):
    cfg = small_config(rho_levels=(0.0, 0.2), experiment_id="g")
    ex.run_grid(cfg, tmp_path / "a")
    ex.run_grid(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "g.csv").read_bytes() == (tmp_path / "b" / "g.csv").read_bytes()


def test_report_empty_dir(tmp_path):
    rep = ex.report([tmp_path], tmp_path)
    assert not rep.ok
    assert rep.lines[0] == "result rows: 0"
    assert (tmp_path / "summary.csv").read_text().strip() == ",".join(ex.RESULT_COLUMNS)


def test_report_reproduces_argmin_row(tmp_path):
    ex.run_grid(small_config(rho_levels=(0.2,), experiment_id="g"), tmp_path)
    text = (tmp_path / "g.csv").read_text().splitlines()
    selected = [line for line in text[1:] if line.endswith(",1") and ",search," in line]
    rep = ex.report([tmp_path], tmp_path)
    assert rep.ok
    assert selected[0] in rep.lines
    assert selected[0] in (tmp_path / "summary.txt").read_text().splitlines()


def test_report_consolidates_mixed_outputs(tmp_path):
    ex.run_grid(small_config(rho_levels=(0.2,), experiment_id="g"), tmp_path)
    ex.run_tune(small_config(family="const", rho_levels=(0.2,), experiment_id="t",
                             sang=ex.SangSettings(iters=2, batch=1)), tmp_path)
    rep = ex.report([tmp_path], tmp_path)
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    keys = {(r["experiment"], r["rho_e"], r["family"]) for r in rows}
    assert keys == {("g", "0.2", "const"), ("t", "0.2", "const")}
    assert len(rows) == len(rep.rows)
    for r in rows:
        if r["kind"] in ("search", "heldout") and json.loads(r["theta"]) == [1.0]:
            assert float(r["delta_f"]) == 0.0


def test_report_flags_bad_files(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    rep = ex.report([bad, tmp_path / "missing.csv"])
    assert len(rep.errors) == 2 and not rep.ok


def test_config_from_dict(tmp_path):
    (tmp_path / "scen.json").write_text(json.dumps({"params": {"horizon_T": 8, "lookahead_H": 3}}))
    data = {
        "scenario_file": "scen.json",
        "policy": "lkup",
        "rho_e": 0.3,
        "grid": {"start": 0.5, "stop": 1.5, "step": 0.25},
        "sang": {"iters": 7, "batch": 2},
        "seed": 5,
    }
    (tmp_path / "exp.json").write_text(json.dumps(data))
    cfg = ex.load_config(tmp_path / "exp.json")
    assert cfg.params.horizon_T == 8
    assert cfg.rho_levels == (0.3,)
    assert cfg.grid == (0.5, 0.75, 1.0, 1.25, 1.5)
    assert cfg.sang.iters == 7 and cfg.master_seed == 5
    assert cfg.start().tolist() == [1.0] * 3
    with pytest.raises(ValueError):
        ex.config_from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        ex.config_from_dict({"sang": {"bogus": 1}})


def test_default_grid():
    assert ex.DEFAULT_GRID == (0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5)
