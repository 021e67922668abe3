"""Command-line entry point: ``cfa-storage <command> [options]``.

Commands:
    simulate  one rollout; writes the trajectory CSV
    grid      grid search over a constant forecast multiplier
    coord     coordinate sweeps of the lookup parameterization
    tune      SANG tuning and held-out evaluation
    report    merge result tables into a summary

Exit status is 0 on success, 2 on usage or configuration errors and 1 when
a run or report fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .policies import FAMILIES, PolicySpec, default_theta
from .simulator import rollout

EXIT_FAILURE = 1
EXIT_USAGE = 2


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON experiment config")
    parser.add_argument("--rho-e", type=float, nargs="+", help="forecast noise level(s)")
    parser.add_argument("--policy", choices=FAMILIES, help="policy family")
    parser.add_argument("--paths", type=int, help="held-out evaluation paths")
    parser.add_argument("--search-paths", type=int, help="paths used while searching")
    parser.add_argument("--iters", type=int, help="SANG iterations")
    parser.add_argument("--batch", type=int, help="SANG pairs per gradient")
    parser.add_argument("--budget", type=int, help="SANG evaluation budget (overrides --iters)")
    parser.add_argument("--snapshots", type=int, help="held-out snapshots along a SANG run")
    parser.add_argument("--seed", type=int, help="master seed (path seed for simulate)")
    parser.add_argument("--workers", type=int, help="worker processes")
    parser.add_argument("--theta", type=float, nargs="+", help="policy parameters")
    parser.add_argument("--out", type=Path, default=Path("results"), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfa-storage",
        description="Tune forecast-parameterized lookahead policies for wind-backed storage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("simulate", "simulate one path and write its trajectory"),
        ("grid", "grid search over a constant forecast multiplier"),
        ("coord", "one-dimensional sweeps of each lookup coordinate"),
        ("tune", "tune a policy with SANG"),
    ]:
        _common(sub.add_parser(name, help=help_text))
    rep = sub.add_parser("report", help="summarize result tables")
    rep.add_argument("inputs", nargs="*", type=Path, help="result files or directories")
    rep.add_argument("--out", type=Path, default=None, help="where to write the summary")
    return parser


def make_config(args: argparse.Namespace, default_family: str) -> ex.ExperimentConfig:
    if args.config is not None:
        raw = json.loads(args.config.read_text())
        config = ex.config_from_dict(raw, base_dir=args.config.parent)
        family = args.policy or raw.get("policy", default_family)
    else:
        config = ex.ExperimentConfig()
        family = args.policy or default_family
    changes = {"family": family, "experiment_id": args.command}
    if args.config is not None:
        changes["experiment_id"] = config.experiment_id
    if args.rho_e is not None:
        changes["rho_levels"] = tuple(args.rho_e)
    if args.paths is not None:
        changes["eval_paths"] = args.paths
    if args.search_paths is not None:
        changes["search_paths"] = args.search_paths
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.theta is not None:
        changes["theta0"] = tuple(args.theta)
    sang = {}
    for flag, name in [
        ("iters", "iters"),
        ("batch", "batch"),
        ("budget", "budget"),
        ("snapshots", "snapshots"),
    ]:
        if getattr(args, flag) is not None:
            sang[name] = getattr(args, flag)
    if sang:
        changes["sang"] = replace(config.sang, **sang)
    return replace(config, **changes)


def _simulate(args) -> int:
    config = make_config(args, "benchmark")
    rho = config.rho_levels[0]
    scenario = config.scenario.with_rho(rho)
    theta = config.theta0
    if theta is None:
        theta = tuple(default_theta(config.family, config.params))
    spec = PolicySpec(config.family, theta)
    seed = args.seed if args.seed is not None else 0
    traj = rollout(spec, scenario, seed)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "trajectory.csv"
    traj.to_csv(path)
    print(json.dumps({"total_cost": traj.total_cost, "rho_e": rho, "seed": seed, "csv": str(path)}))
    return 0


def _grid(args) -> int:
    config = make_config(args, "const")
    if config.family != "const":
        raise ValueError("grid search applies to the const family")
    for res in ex.run_grid(config, args.out):
        h = res.heldout
        print(f"rho_e={res.rho_e:g} argmin theta={res.argmin_theta:g} delta_f={h.delta_f:.6g}")
    return 0


def _coord(args) -> int:
    config = make_config(args, "lkup")
    if config.family != "lkup":
        raise ValueError("coordinate search applies to the lkup family")
    for res in ex.run_coord(config, args.out):
        argmins = " ".join(f"{v:g}" for v in res.argmins)
        print(f"rho_e={res.rho_e:g} argmins: {argmins} best delta_f={min(res.best_delta_f):.6g}")
    return 0


def _tune(args) -> int:
    config = make_config(args, "lkup")
    for res in ex.run_tune(config, args.out):
        R = res.sang.R if res.sang is not None else 0
        print(f"rho_e={res.rho_e:g} R={R} delta_f={res.delta_f:.6g} evals={res.final.evals}")
    return 0


def _report(args) -> int:
    out = args.out
    if out is None:
        dirs = [p for p in args.inputs if p.is_dir()]
        out = dirs[0] if dirs else Path(".")
    rep = ex.report(args.inputs, out)
    print("\n".join(rep.lines))
    return 0 if rep.ok else EXIT_FAILURE


COMMANDS = {"simulate": _simulate, "grid": _grid, "coord": _coord, "tune": _tune, "report": _report}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
