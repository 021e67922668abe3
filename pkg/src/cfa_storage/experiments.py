"""Experiment drivers: grid and coordinate searches, SANG tuning, reports.

Seed pools keep search and evaluation paths apart.  With master seed ``s``,
search and tuning paths use seeds ``s * POOL_STRIDE + j`` and held-out
evaluation paths use ``HELDOUT_BASE + s * POOL_STRIDE + j``.

Every experiment writes one result table with the columns of
:data:`RESULT_COLUMNS`.  ``kind`` tells rows apart:

* ``search``  a point evaluated on the search paths,
* ``heldout`` the selected point re-evaluated on the held-out paths,
* ``curve``   a SANG snapshot evaluated on held-out paths,
* ``final``   the SANG output evaluated on the held-out paths.

Rows with ``argmin`` equal to 1 mark the selected point of a search.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from os import PathLike
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .policies import FAMILIES, PolicySpec, default_theta
from .simulator import (
    Estimate,
    Scenario,
    default_scenario,
    estimate_objective,
    improvement,
    load_scenario,
    rollout,
    scenario_from_dict,
)
from .zo import STEPSIZE_RULES, SangConfig, SangResult, history_csv, sang_run

POOL_STRIDE = 10**8
HELDOUT_BASE = 10**12
TIE_RTOL = 1e-9
DEFAULT_GRID = tuple(round(0.5 + 0.1 * i, 1) for i in range(11))

RESULT_COLUMNS = (
    "experiment",
    "kind",
    "rho_e",
    "family",
    "coordinate",
    "theta",
    "mean_cost",
    "stderr",
    "benchmark_mean",
    "delta_f",
    "n_paths",
    "evals",
    "argmin",
)


def search_seed(master_seed: int, j: int) -> int:
    _check_pool(master_seed, j)
    return master_seed * POOL_STRIDE + j


def heldout_seed(master_seed: int, j: int) -> int:
    _check_pool(master_seed, j)
    return HELDOUT_BASE + master_seed * POOL_STRIDE + j


def _check_pool(master_seed: int, j: int) -> None:
    if not 0 <= master_seed < HELDOUT_BASE // POOL_STRIDE:
        raise ValueError(f"master seed must lie in [0, {HELDOUT_BASE // POOL_STRIDE})")
    if not 0 <= j < POOL_STRIDE:
        raise ValueError(f"path index must lie in [0, {POOL_STRIDE})")


@dataclass(frozen=True)
class SangSettings:
    """SANG options of a tuning experiment (dimension and start come from the family)."""

    iters: int = 100
    batch: int = 10
    delta: float = 1.0
    lip_L0: float = 1.0
    alpha_scale_a: float = 2.0
    stepsize_rule: str = "rmsprop"
    rms_b: float = 1.0
    rms_gamma: float = 0.1
    budget: int | None = None
    snapshots: int = 0
    monitor_paths: int = 100

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError("iters must be nonnegative")
        if self.batch < 1:
            raise ValueError("batch must be at least 1")
        if self.stepsize_rule not in STEPSIZE_RULES:
            raise ValueError(f"stepsize_rule must be one of {STEPSIZE_RULES}")
        if self.budget is not None and self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.snapshots < 0 or self.monitor_paths < 1:
            raise ValueError("snapshots must be >= 0 and monitor_paths >= 1")

    @property
    def effective_iters(self) -> int:
        """Iterations actually run; a budget counts evaluations, two per pair."""
        if self.budget is None:
            return self.iters
        return self.budget // (2 * self.batch)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment needs.

    Attributes:
        scenario: Base scenario; its noise level is replaced by each entry of
            ``rho_levels``.
        family: Policy family.
        rho_levels: Forecast noise levels to run.
        eval_paths: Held-out paths used to judge a selected or tuned policy.
        search_paths: Paths used to compare points during a search.
        grid: Parameter values of grid and coordinate searches.
        sang: Tuning options.
        master_seed: Selects the seed pools.
        workers: Processes used for path evaluations.
        experiment_id: Label written into every result row.
        theta0: Starting parameters for tuning; the benchmark-equivalent
            vector of the family when omitted.
    """

    scenario: Scenario = field(default_factory=default_scenario)
    family: str = "const"
    rho_levels: tuple[float, ...] = (0.0,)
    eval_paths: int = 1000
    search_paths: int = 100
    grid: tuple[float, ...] = DEFAULT_GRID
    sang: SangSettings = field(default_factory=SangSettings)
    master_seed: int = 0
    workers: int = 1
    experiment_id: str = "experiment"
    theta0: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "rho_levels", tuple(float(r) for r in self.rho_levels))
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        if any(r < 0 for r in self.rho_levels):
            raise ValueError("noise levels must be nonnegative")
        if self.eval_paths < 1 or self.search_paths < 1:
            raise ValueError("path counts must be at least 1")
        if not self.grid:
            raise ValueError("grid must not be empty")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        _check_pool(self.master_seed, 0)

    @property
    def params(self):
        return self.scenario.params

    def start(self) -> np.ndarray:
        if self.theta0 is not None:
            return np.asarray(self.theta0, dtype=float)
        return default_theta(self.family, self.params)


def config_from_dict(data: dict, base_dir: str | PathLike = ".") -> ExperimentConfig:
    """Build a config from a JSON-compatible mapping.

    Recognized keys: ``scenario`` (mapping) or ``scenario_file``, ``policy``,
    ``rho_e`` (number or list), ``eval_paths``, ``search_paths``, ``grid``
    (list, or ``{"start", "stop", "step"}``), ``sang`` (mapping of
    :class:`SangSettings` fields), ``seed``, ``workers``, ``experiment_id``,
    ``theta0``.
    """
    known = {
        "scenario", "scenario_file", "policy", "rho_e", "eval_paths", "search_paths",
        "grid", "sang", "seed", "workers", "experiment_id", "theta0",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    base_dir = Path(base_dir)
    if "scenario_file" in data:
        scenario = load_scenario(base_dir / data["scenario_file"])
    else:
        scenario = scenario_from_dict(data.get("scenario", {}), base_dir)
    rho = data.get("rho_e", [scenario.rho_e])
    rho = [rho] if isinstance(rho, (int, float)) else rho
    sang_fields = set(SangSettings.__dataclass_fields__)
    sang = data.get("sang", {})
    if set(sang) - sang_fields:
        raise ValueError(f"unknown sang keys: {sorted(set(sang) - sang_fields)}")
    kwargs = dict(
        scenario=scenario,
        family=data.get("policy", "const"),
        rho_levels=tuple(rho),
        sang=SangSettings(**sang),
    )
    for key, name in [
        ("eval_paths", "eval_paths"),
        ("search_paths", "search_paths"),
        ("seed", "master_seed"),
        ("workers", "workers"),
        ("experiment_id", "experiment_id"),
    ]:
        if key in data:
            kwargs[name] = data[key]
    if "grid" in data:
        kwargs["grid"] = parse_grid(data["grid"])
    if "theta0" in data:
        kwargs["theta0"] = tuple(data["theta0"])
    return ExperimentConfig(**kwargs)


def load_config(path: str | PathLike) -> ExperimentConfig:
    path = Path(path)
    return config_from_dict(json.loads(path.read_text()), base_dir=path.parent)


def parse_grid(spec) -> tuple[float, ...]:
    if isinstance(spec, dict):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        if not step > 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    return tuple(float(v) for v in spec)


class PolicyObjective:
    """Total cost of a policy family on one path, as a function of ``theta``.

    Instances are picklable so batches can fan out to worker processes.
    """

    def __init__(self, family: str, scenario: Scenario):
        self.family = family
        self.scenario = scenario

    def __call__(self, theta, seed: int) -> float:
        spec = PolicySpec(self.family, tuple(np.atleast_1d(theta)))
        return rollout(spec, self.scenario, int(seed)).total_cost


@contextmanager
def _mapper(workers: int) -> Iterator:
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool.map


def _evaluate(
    spec: PolicySpec, scenario: Scenario, n: int, master_seed: int, pool: str, workers: int
) -> Estimate:
    first = search_seed(master_seed, 0) if pool == "search" else heldout_seed(master_seed, 0)
    _check_pool(master_seed, n - 1)
    return estimate_objective(spec, scenario, n, first, workers)


def select_argmin(thetas: Sequence[float], means: Sequence[float], center: float = 1.0) -> int:
    """Index of the lowest mean; near-ties go to the value closest to ``center``.

    Means within ``TIE_RTOL`` (relative) of the minimum count as ties, so
    round-off differences between equivalent plans do not move the choice
    away from the unmodified forecast.
    """
    means = np.asarray(means, dtype=float)
    best = means.min()
    tied = np.flatnonzero(means <= best + TIE_RTOL * abs(best))
    return int(min(tied, key=lambda i: (abs(thetas[i] - center), i)))


@dataclass(frozen=True, eq=False)
class ResultRow:
    experiment: str
    kind: str
    rho_e: float
    family: str
    coordinate: int
    theta: tuple[float, ...]
    mean_cost: float
    stderr: float
    benchmark_mean: float
    delta_f: float
    n_paths: int
    evals: int = 0
    argmin: int = 0

    def cells(self) -> list[str]:
        return [
            self.experiment,
            self.kind,
            repr(self.rho_e),
            self.family,
            str(self.coordinate),
            json.dumps(list(self.theta)),
            repr(self.mean_cost),
            repr(self.stderr),
            repr(self.benchmark_mean),
            repr(self.delta_f),
            str(self.n_paths),
            str(self.evals),
            str(self.argmin),
        ]


def format_rows(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


@dataclass(frozen=True, eq=False)
class GridResult:
    """Grid search over a constant forecast multiplier at one noise level."""

    rho_e: float
    rows: tuple[ResultRow, ...]
    argmin_theta: float
    heldout: ResultRow

    @property
    def search_rows(self) -> tuple[ResultRow, ...]:
        return tuple(r for r in self.rows if r.kind == "search")


def grid_search_const(config: ExperimentConfig, rho_e: float) -> GridResult:
    """Compare constant multipliers on the search paths, then judge the best.

    Every grid value and the benchmark share the search paths.  The selected
    value and the benchmark are then evaluated on ``eval_paths`` held-out
    paths, which gives the reported improvement.
    """
    scenario = config.scenario.with_rho(rho_e)
    ev = lambda spec, n, pool: _evaluate(
        spec, scenario, n, config.master_seed, pool, config.workers
    )
    bench = ev(PolicySpec.benchmark(), config.search_paths, "search")
    rows = []
    means = []
    for theta in config.grid:
        est = bench if theta == 1.0 else ev(PolicySpec.const(theta), config.search_paths, "search")
        means.append(est.mean)
        rows.append(
            ResultRow(
                config.experiment_id, "search", rho_e, "const", 0, (theta,), est.mean,
                est.stderr, bench.mean, improvement(est.mean, bench.mean), config.search_paths,
            )
        )
    best = select_argmin(config.grid, means)
    rows[best] = replace(rows[best], argmin=1)
    theta = config.grid[best]
    bench_eval = ev(PolicySpec.benchmark(), config.eval_paths, "heldout")
    chosen = bench_eval if theta == 1.0 else ev(PolicySpec.const(theta), config.eval_paths, "heldout")
    heldout = ResultRow(
        config.experiment_id, "heldout", rho_e, "const", 0, (theta,), chosen.mean,
        chosen.stderr, bench_eval.mean, improvement(chosen.mean, bench_eval.mean),
        config.eval_paths, argmin=1,
    )
    return GridResult(rho_e, tuple(rows) + (heldout,), theta, heldout)


@dataclass(frozen=True, eq=False)
class CoordinateResult:
    """One-dimensional sweeps of each lookup coordinate around all-ones."""

    rho_e: float
    rows: tuple[ResultRow, ...]
    benchmark_mean: float
    argmins: tuple[float, ...]
    best_delta_f: tuple[float, ...]

    def curve(self, coordinate: int) -> tuple[np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r.coordinate == coordinate]
        return np.array([r.theta[coordinate - 1] for r in sel]), np.array([r.mean_cost for r in sel])


def coordinate_search_lkup(config: ExperimentConfig, rho_e: float) -> CoordinateResult:
    """Sweep each lookup coordinate over the grid with the others held at 1.

    Coordinates are numbered ``1..H`` like the lookahead offsets.  All points
    share the search paths.
    """
    scenario = config.scenario.with_rho(rho_e)
    H = config.params.lookahead_H
    bench = _evaluate(
        PolicySpec.benchmark(), scenario, config.search_paths, config.master_seed, "search",
        config.workers,
    )
    rows, argmins, best_df = [], [], []
    for i in range(1, H + 1):
        block, means = [], []
        for value in config.grid:
            theta = np.ones(H)
            theta[i - 1] = value
            if value == 1.0:
                est = bench
            else:
                est = _evaluate(
                    PolicySpec.lkup(theta), scenario, config.search_paths, config.master_seed,
                    "search", config.workers,
                )
            means.append(est.mean)
            block.append(
                ResultRow(
                    config.experiment_id, "search", rho_e, "lkup", i, tuple(theta), est.mean,
                    est.stderr, bench.mean, improvement(est.mean, bench.mean),
                    config.search_paths,
                )
            )
        best = select_argmin(config.grid, means)
        block[best] = replace(block[best], argmin=1)
        argmins.append(config.grid[best])
        best_df.append(block[best].delta_f)
        rows.extend(block)
    return CoordinateResult(rho_e, tuple(rows), bench.mean, tuple(argmins), tuple(best_df))


@dataclass(frozen=True, eq=False)
class TuneResult:
    """A SANG tuning run and its held-out evaluation."""

    rho_e: float
    sang: SangResult | None
    theta: np.ndarray
    final: ResultRow
    curve: tuple[ResultRow, ...]

    @property
    def delta_f(self) -> float:
        return self.final.delta_f

    @property
    def rows(self) -> tuple[ResultRow, ...]:
        return self.curve + (self.final,)


def sang_config(config: ExperimentConfig) -> SangConfig:
    """SANG settings of a tuning experiment; requires at least one iteration."""
    s = config.sang
    start = config.start()
    return SangConfig(
        dim_d=start.size,
        iters_N=s.effective_iters,
        delta=s.delta,
        lip_L0=s.lip_L0,
        alpha_scale_a=s.alpha_scale_a,
        batch_m=s.batch,
        stepsize_rule=s.stepsize_rule,
        rms_b=s.rms_b,
        rms_gamma=s.rms_gamma,
        theta0=tuple(start),
        seed=config.master_seed,
    )


def tune(config: ExperimentConfig, rho_e: float) -> TuneResult:
    """Tune ``config.family`` with SANG and judge the output on held-out paths.

    Pair ``i`` of iteration ``k`` uses search path ``(k - 1) * batch + i``.
    With ``sang.snapshots > 0`` the iterates at evenly spaced iterations are
    evaluated on ``sang.monitor_paths`` held-out paths; these monitoring
    evaluations are not part of the ``evals`` counts.
    """
    if config.family == "benchmark":
        raise ValueError("the benchmark has no parameters to tune")
    scenario = config.scenario.with_rho(rho_e)
    settings = config.sang
    n_iters = settings.effective_iters
    m = settings.batch
    objective = PolicyObjective(config.family, scenario)
    result = None
    theta = config.start()
    if n_iters > 0:
        _check_pool(config.master_seed, n_iters * m - 1)
        seed_for = lambda k, i: search_seed(config.master_seed, (k - 1) * m + i)
        with _mapper(config.workers) as map_fn:
            result = sang_run(sang_config(config), objective, seed_for, map_fn)
        theta = result.theta_R

    def judge(theta, n, kind, evals, argmin=0) -> ResultRow:
        spec = PolicySpec(config.family, tuple(theta))
        bench = _evaluate(
            PolicySpec.benchmark(), scenario, n, config.master_seed, "heldout", config.workers
        )
        est = _evaluate(spec, scenario, n, config.master_seed, "heldout", config.workers)
        return ResultRow(
            config.experiment_id, kind, rho_e, config.family, 0, tuple(float(v) for v in theta),
            est.mean, est.stderr, bench.mean, improvement(est.mean, bench.mean), n, evals, argmin,
        )

    curve = []
    if result is not None and settings.snapshots > 0:
        ks = np.unique(np.linspace(0, n_iters, settings.snapshots + 1).round().astype(int))
        for k in ks:
            curve.append(judge(result.thetas[k], settings.monitor_paths, "curve", 2 * m * int(k)))
    evals = 0 if result is None else result.evaluations
    final = judge(theta, config.eval_paths, "final", evals, argmin=1)
    return TuneResult(rho_e, result, np.asarray(theta, dtype=float), final, tuple(curve))


def _rho_tag(rho_e: float) -> str:
    return f"rho{rho_e:g}"


def write_rows(rows: Sequence[ResultRow], path: str | PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_rows(rows))
    return path


def run_grid(config: ExperimentConfig, out_dir: str | PathLike) -> list[GridResult]:
    results = [grid_search_const(config, rho) for rho in config.rho_levels]
    rows = [row for res in results for row in res.rows]
    write_rows(rows, Path(out_dir) / f"{config.experiment_id}.csv")
    return results


def run_coord(config: ExperimentConfig, out_dir: str | PathLike) -> list[CoordinateResult]:
    results = [coordinate_search_lkup(config, rho) for rho in config.rho_levels]
    rows = [row for res in results for row in res.rows]
    write_rows(rows, Path(out_dir) / f"{config.experiment_id}.csv")
    return results


def run_tune(config: ExperimentConfig, out_dir: str | PathLike) -> list[TuneResult]:
    out_dir = Path(out_dir)
    results = [tune(config, rho) for rho in config.rho_levels]
    write_rows([row for res in results for row in res.rows], out_dir / f"{config.experiment_id}.csv")
    for res in results:
        if res.sang is not None:
            name = f"{config.experiment_id}.{_rho_tag(res.rho_e)}.history.csv"
            history_csv(res.sang.history, out_dir / name)
    return results


@dataclass(frozen=True, eq=False)
class Report:
    rows: tuple[tuple[str, ...], ...]
    lines: tuple[str, ...]
    errors: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return bool(self.rows) and not self.errors


SUMMARY_FILES = ("summary.csv", "summary.txt")


def _result_files(paths: Sequence[str | PathLike]) -> tuple[list[tuple[Path, bool]], list[str]]:
    # Pairs of (file, named explicitly); directory members with another
    # header are skipped instead of reported as errors.
    files, errors = [], []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(
                (f, False)
                for f in sorted(p.glob("*.csv"))
                if f.name not in SUMMARY_FILES and not f.name.endswith(".history.csv")
            )
        elif p.is_file():
            files.append((p, True))
        else:
            errors.append(f"{p}: no such file or directory")
    return files, errors


def report(
    paths: Sequence[str | PathLike], out_dir: str | PathLike | None = None
) -> Report:
    """Merge result tables into ``summary.csv`` and ``summary.txt``.

    The CSV holds every row of every table.  The text summary lists, per
    (experiment, noise level, family, coordinate), the row marked as selected,
    copied verbatim.  Unreadable or malformed files are reported by path.
    """
    files, errors = _result_files(paths)
    rows: list[tuple[str, ...]] = []
    raw_lines: list[str] = []
    skipped, used = [], 0
    for f, explicit in files:
        try:
            text = f.read_text()
        except OSError as exc:
            errors.append(f"{f}: {exc}")
            continue
        parsed = list(csv.reader(text.splitlines()))
        if not parsed or tuple(parsed[0]) != RESULT_COLUMNS:
            if explicit:
                errors.append(f"{f}: not a result table (unexpected header)")
            else:
                skipped.append(f"skipped: {f} (not a result table)")
            continue
        bad = [i for i, r in enumerate(parsed[1:], start=2) if len(r) != len(RESULT_COLUMNS)]
        if bad:
            errors.append(f"{f}: malformed row at line {bad[0]}")
            continue
        # Keep the original text of each line so selected rows are copied exactly.
        row_texts = _csv_records(text)[1:]
        rows.extend(tuple(r) for r in parsed[1:])
        raw_lines.extend(row_texts)
        used += 1

    summary = [f"result rows: {len(rows)}", f"files: {used}"]
    summary.append("selected rows (" + ",".join(RESULT_COLUMNS) + "):")
    seen = set()
    idx = {name: i for i, name in enumerate(RESULT_COLUMNS)}
    for row, line in zip(rows, raw_lines):
        if row[idx["argmin"]] != "1":
            continue
        key = (row[idx["experiment"]], row[idx["kind"]], row[idx["rho_e"]],
               row[idx["family"]], row[idx["coordinate"]])
        if key not in seen:
            seen.add(key)
            summary.append(line)
    summary.extend(skipped)
    summary.extend(f"error: {e}" for e in errors)
    result = Report(tuple(rows), tuple(summary), tuple(errors))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        writer.writerows(rows)
        (out / "summary.csv").write_text(buf.getvalue())
        (out / "summary.txt").write_text("\n".join(summary) + "\n")
    return result


def _csv_records(text: str) -> list[str]:
    # Split CSV text into records, respecting quoted newlines.
    records, current, quoted = [], [], False
    for line in text.splitlines():
        current.append(line)
        quoted ^= line.count('"') % 2 == 1
        if not quoted:
            records.append("\n".join(current))
            current = []
    return records
