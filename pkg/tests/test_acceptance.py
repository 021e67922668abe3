"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line (also repeated in
the terminal summary) and then asserts the criterion at its stated tolerance.
"""

import math
import time

import numpy as np
import pytest

from cfa_storage import experiments as ex
from cfa_storage.lp import LinearProgram, build_lookahead, solve, window_blocks
from cfa_storage.model import ModelParams
from cfa_storage.policies import PolicySpec
from cfa_storage.simulator import default_scenario, path_costs, rollout
from cfa_storage.zo import SangConfig, sample_output_index, sang_run, smoothed_reference

from conftest import ACCEPTANCE_LINES, random_state
from lp_oracle import vertex_optimum

# 0.999 quantile of the chi-square distribution with 9 degrees of freedom.
CHI2_999_DF9 = 27.877


def record(capsys, n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[n] = line
    with capsys.disabled():
        print("\n" + line)


@pytest.fixture(scope="module")
def scenario():
    return default_scenario()


_grid_cache = {}


def const_grid(scenario, rho):
    """Criterion-2 grid search at ``rho``; cached so criterion 3 reuses it."""
    if rho not in _grid_cache:
        start = time.perf_counter()
        cfg = ex.ExperimentConfig(scenario=scenario, family="const", master_seed=0)
        result = ex.grid_search_const(cfg, rho)
        _grid_cache[rho] = (result, time.perf_counter() - start)
    return _grid_cache[rho]


def test_criterion_1_perfect_forecasts(scenario, capsys):
    start = time.perf_counter()
    grid = ex.grid_search_const(ex.ExperimentConfig(scenario=scenario, family="const"), 0.0)
    coord = ex.coordinate_search_lkup(ex.ExperimentConfig(scenario=scenario, family="lkup"), 0.0)
    elapsed = time.perf_counter() - start
    off = [i + 1 for i, v in enumerate(coord.argmins) if v != 1.0]
    ok = grid.argmin_theta == 1.0 and not off and elapsed <= 300
    record(capsys, 1, ok, f"const argmin={grid.argmin_theta:g}, lkup coordinates off 1.0: {off}, "
                          f"{elapsed:.0f}s")
    assert grid.argmin_theta == 1.0
    assert not off
    assert elapsed <= 300


def test_criterion_2_noise_helps_constant(scenario, capsys):
    results = {rho: const_grid(scenario, rho) for rho in (0.2, 0.4)}
    elapsed = sum(t for _, t in results.values())
    parts = [f"rho={rho:g}: argmin={r.argmin_theta:g} dF={r.heldout.delta_f:.3e}"
             for rho, (r, _) in results.items()]
    ok = all(r.heldout.delta_f <= -0.005 for r, _ in results.values()) and elapsed <= 600
    record(capsys, 2, ok, "; ".join(parts) + f" (need <= -5e-3), {elapsed:.0f}s")
    for r, _ in results.values():
        assert r.heldout.delta_f <= -0.005
    assert elapsed <= 600


def test_criterion_3_sang_beats_constant(scenario, capsys):
    const_best = const_grid(scenario, 0.2)[0].heldout.delta_f
    start = time.perf_counter()
    tuned = []
    for master in (1, 2, 3):
        cfg = ex.ExperimentConfig(
            scenario=scenario,
            family="lkup",
            master_seed=master,
            sang=ex.SangSettings(iters=200, batch=10, alpha_scale_a=2.0, rms_b=1.0,
                                 stepsize_rule="rmsprop"),
        )
        tuned.append(ex.tune(cfg, 0.2).delta_f)
    elapsed = time.perf_counter() - start
    ok = all(d < const_best for d in tuned) and elapsed <= 1800
    record(capsys, 3, ok, "lkup dF=" + ", ".join(f"{d:.3e}" for d in tuned)
                          + f" vs const best dF={const_best:.3e}, {elapsed:.0f}s")
    assert all(d < const_best for d in tuned)
    assert elapsed <= 1800


def test_criterion_4_smoothing_bounds(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    norm = lambda th: np.linalg.norm(th, axis=1)
    worst_value, worst_moment = -np.inf, -np.inf
    for d in (2, 10):
        for eta in (0.05, 0.5):
            for _ in range(50):
                theta = rng.normal(scale=2.0, size=d)
                est = smoothed_reference(norm, theta, eta, 100_000, rng, vectorized=True)
                gap = abs(est.value - np.linalg.norm(theta)) - 4 * est.value_stderr
                worst_value = max(worst_value, gap / (eta * math.sqrt(d)))
                v = rng.standard_normal((100_000, d))
                diff = norm(theta + eta * v) - np.linalg.norm(theta)
                moment = np.mean(diff**2 * np.sum(v**2, axis=1))
                worst_moment = max(worst_moment, moment / (eta**2 * (d + 4) ** 2))
    elapsed = time.perf_counter() - start
    ok = worst_value <= 1 and worst_moment <= 1 and elapsed <= 120
    record(capsys, 4, ok, f"max |F_eta-F|/bound={worst_value:.3f}, max moment/bound="
                          f"{worst_moment:.3f}, {elapsed:.0f}s")
    assert worst_value <= 1 and worst_moment <= 1
    assert elapsed <= 120


def test_criterion_5_estimator_unbiased(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    c = np.array([1.5, -2.0, 0.25, 0.0, 3.0])
    linear = lambda th: th @ c
    est = smoothed_reference(linear, rng.normal(size=5), 0.3, 100_000, rng, vectorized=True)
    z = np.abs(est.grad - c) / est.grad_stderr
    elapsed = time.perf_counter() - start
    ok = bool(np.all(z <= 4)) and elapsed <= 60
    record(capsys, 5, ok, f"max |mean-c|/stderr={z.max():.2f} (need <= 4), {elapsed:.1f}s")
    assert np.all(z <= 4)
    assert elapsed <= 60


def test_criterion_6_rate_trend(capsys):
    start = time.perf_counter()
    d = 23
    F = lambda th, seed: float(np.abs(th).sum() / math.sqrt(d))
    means = {}
    for N in (100, 400):
        values = []
        for run in range(20):
            cfg = SangConfig(dim_d=d, iters_N=N, delta=1.0, lip_L0=1.0, theta0=np.zeros(d),
                             seed=10_000 * N + run)
            values.append(float(np.sum(sang_run(cfg, F).gbar_R ** 2)))
        means[N] = np.mean(values)
    ratio = means[400] / means[100]
    elapsed = time.perf_counter() - start
    ok = 0.2 <= ratio <= 1.0 and elapsed <= 300
    record(capsys, 6, ok, f"mean |Gbar_R|^2 N=100: {means[100]:.3f}, N=400: {means[400]:.3f}, "
                          f"ratio={ratio:.3f} (need [0.2, 1.0]), {elapsed:.0f}s")
    assert 0.2 <= ratio <= 1.0
    assert elapsed <= 300


def test_criterion_7_lp_oracle(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    worst = 0.0
    for _ in range(200):
        A = rng.uniform(-1, 1, (8, 6))
        A[0] = rng.uniform(0.1, 1, 6)
        b = rng.uniform(0.5, 5, 8)
        c = rng.normal(size=6)
        rel = ["<="] * 8
        sol = solve(LinearProgram(c, A, rel, b))
        expected = vertex_optimum(c, A, rel, b)
        worst = max(worst, abs(sol.objective_value - expected) / max(abs(expected), 1e-12))
    params = ModelParams()
    infeasible = 0
    for _ in range(10_000):
        state = random_state(rng, params)
        nb = window_blocks(state.t, params)
        lp = build_lookahead(state, params, rng.uniform(0, 80, nb - 1))
        infeasible += solve(lp).status == "infeasible"
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and infeasible == 0 and elapsed <= 180
    record(capsys, 7, ok, f"max relative gap={worst:.1e}, infeasible lookaheads={infeasible}/10000, "
                          f"{elapsed:.0f}s")
    assert worst <= 1e-7
    assert infeasible == 0
    assert elapsed <= 180


def _independent_check(traj, scenario):
    """Recheck constraints and re-sum costs without the package's model code."""
    p = scenario.params
    costs = []
    for rec in traj.records:
        wd, rd, gd, wr, gr, rg = rec.decision.as_array()
        t = rec.t
        D, pm, pg = scenario.demand[t], scenario.price_market[t], scenario.price_grid[t]
        lhs = [wd + p.beta_d * rd + gd, rd + rg, wr + wd,
               p.beta_c * (wr + gr) - rd - rg, wr + gr, rd + rg]
        rhs = [D, rec.r, rec.wind, p.r_max - rec.r, p.gamma_c, p.gamma_d]
        if any(a > b + 1e-9 for a, b in zip(lhs, rhs)) or min(wd, rd, gd, wr, gr, rg) < -1e-9:
            return False, None
        served = wd + p.beta_d * rd + gd
        costs.append(p.penalty_cp * D - (p.penalty_cp + pm) * served - pg * (p.beta_d * rg - gr - gd))
    return True, math.fsum(costs)


def test_criterion_8_simulator_invariants(scenario, capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    H = scenario.params.lookahead_H
    specs = [PolicySpec.benchmark(), PolicySpec.const(0.7), PolicySpec.lkup(rng.uniform(0.5, 1.5, H)),
             PolicySpec.exp(1.2, -0.05)]
    noisy = scenario.with_rho(0.4)
    bad_storage = bad_feasible = bad_sum = 0
    totals = []
    for i in range(1000):
        spec = specs[i % 4]
        traj = rollout(spec, noisy, 500 + i)
        storage = traj.storage
        bad_storage += not np.all((storage >= 0) & (storage <= scenario.params.r_max))
        feasible, resum = _independent_check(traj, noisy)
        bad_feasible += not feasible
        bad_sum += feasible and abs(resum - traj.total_cost) > 1e-9 * abs(resum)
        totals.append(traj.total_cost)
    seeds = list(range(500, 540))
    rerun = [rollout(specs[i % 4], noisy, s).total_cost for i, s in enumerate(seeds)]
    serial = path_costs(specs[2], noisy, seeds, workers=1)
    pooled = path_costs(specs[2], noisy, seeds, workers=4)
    reproducible = (np.array(rerun).tobytes() == np.array(totals[:40]).tobytes()
                    and serial.tobytes() == pooled.tobytes())
    elapsed = time.perf_counter() - start
    ok = not (bad_storage or bad_feasible or bad_sum) and reproducible and elapsed <= 300
    record(capsys, 8, ok, f"storage violations={bad_storage}, infeasible={bad_feasible}, "
                          f"resum mismatches={bad_sum}, bitwise reproducible={reproducible}, "
                          f"{elapsed:.0f}s")
    assert bad_storage == bad_feasible == bad_sum == 0
    assert reproducible
    assert elapsed <= 300


def test_criterion_9_output_index_pmf(capsys):
    rng = np.random.default_rng(9)
    n, N = 100_000, 10
    stats = {}
    for name, betas in [("uniform", np.ones(N)), ("linear", np.arange(1.0, N + 1))]:
        alphas = np.full(N, 0.05)
        draws = np.array([sample_output_index(alphas, betas, rng) for _ in range(n)])
        observed = np.bincount(draws, minlength=N + 1)[1:]
        expected = n * betas / betas.sum()
        stats[name] = float(np.sum((observed - expected) ** 2 / expected))
    ok = all(s <= CHI2_999_DF9 for s in stats.values())
    record(capsys, 9, ok, ", ".join(f"{k} chi2={v:.2f}" for k, v in stats.items())
                          + f" (critical {CHI2_999_DF9} at 0.001)")
    assert all(s <= CHI2_999_DF9 for s in stats.values())
