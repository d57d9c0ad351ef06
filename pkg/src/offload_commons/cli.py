"""Command line front end: ``offload-commons <subcommand> --config FILE --out DIR``.

Exit status: 0 success, 2 configuration error, 3 model error.
Data files (CSV, ``report.json``) are byte-identical across reruns; run
metadata such as wall time goes to ``manifest.json`` only.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import default_backend
from .dynamics import Trajectory, detect_oscillation, simulate
from .equilibrium import (
    Cycle,
    FixedPoint,
    commons_welfare_gap,
    best_response_dynamics,
    inter_provider_equilibrium,
    intra_provider_equilibrium,
    nash_oracle,
)
from .errors import ConfigError, ModelError
from .market import LICENSED, RESALE, ROAMING, UNLICENSED, ClassId, StrategyProfile
from .outcomes import classify, scenario_regime
from .scenario import config_hash, from_dict, load_scenario, to_dict, with_value
from .strategy import dominance_check

EXIT_OK, EXIT_CONFIG, EXIT_MODEL = 0, 2, 3

TRAJECTORY_COLUMNS = (
    "round",
    "d_u_i_bulk", "d_u_i_premium", "d_u_i_roaming",
    "d_u_j_bulk", "d_u_j_premium", "d_u_j_roaming",
    "d_l_j_bulk", "d_l_j_premium", "d_l_j_resale",
    "q_u", "q_l", "profit_i", "profit_j",
)

SWEEP_COLUMNS = (
    "index", "param_1", "value_1", "param_2", "value_2", "sum_backhaul", "regime_boundary",
    "capacity_regime", "label", "q_u_final", "q_u_min", "relative_gap", "status", "error",
)


# ---------------------------------------------------------------------------
# Serialization helpers


def _plain(obj):
    """Recursively turn reports into JSON-safe builtins (NaN/inf become null)."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(_plain(k)): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ""
    return "" if x is None else str(x)


def _write_csv(path: Path, columns, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def trajectory_rows(scenario, traj: Trajectory) -> list[dict]:
    i, j = scenario.wifi.id, scenario.combined.id
    b, v = ClassId.BULK, ClassId.PREMIUM
    rows = []
    for s in traj.states:
        pb, pv = s.pools[b], s.pools[v]
        rows.append({
            "round": s.round,
            "d_u_i_bulk": pb.get(i, UNLICENSED), "d_u_i_premium": pv.get(i, UNLICENSED),
            "d_u_i_roaming": pb.get(i, ROAMING),
            "d_u_j_bulk": pb.get(j, UNLICENSED), "d_u_j_premium": pv.get(j, UNLICENSED),
            "d_u_j_roaming": pb.get(j, ROAMING),
            "d_l_j_bulk": pb.get(j, LICENSED), "d_l_j_premium": pv.get(j, LICENSED),
            "d_l_j_resale": pv.get(j, RESALE),
            "q_u": s.q_unlicensed, "q_l": s.q_licensed,
            "profit_i": s.profits[i], "profit_j": s.profits[j],
        })
    return rows


def _profile(p) -> dict:
    return {"provider": p.provider, "bulk": p.bulk, "premium": p.premium, "resale": p.resale}


def _dynamics_summary(res) -> dict:
    if isinstance(res, FixedPoint):
        return {"kind": "FixedPoint", "iterations": res.iterations, "profile": [_profile(p) for p in res.profile]}
    if isinstance(res, Cycle):
        return {"kind": "Cycle", "period": res.period, "iterations": res.iterations,
                "profiles": [[_profile(p) for p in pair] for pair in res.profiles]}
    return {"kind": "NonConvergence", "iterations": res.iterations, "last": [_profile(p) for p in res.last]}


def _welfare(w) -> dict:
    return {"equilibrium_welfare": w.equilibrium_welfare, "coordinated_welfare": w.coordinated_welfare,
            "gap": w.gap, "relative_gap": w.relative_gap, "source": w.source,
            "equilibrium_profile": [_profile(p) for p in w.equilibrium_profile],
            "coordinated_profile": [_profile(p) for p in w.coordinated_profile]}


# ---------------------------------------------------------------------------
# Subcommands


def run_equilibrium(scenario, out: Path) -> dict:
    i = scenario.wifi
    grid = scenario.solver.grid_steps
    d_i = min(scenario.subscribers[i.id][ClassId.BULK], i.backhaul_capacity, scenario.shared.capacity)
    intra = intra_provider_equilibrium(scenario, d_i)
    inter = inter_provider_equilibrium(scenario)
    oracle = nash_oracle(scenario, grid)
    dyn = best_response_dynamics(scenario, scenario.initial(), grid, scenario.solver.max_iter)
    in_oracle = dyn.profile in oracle if isinstance(dyn, FixedPoint) else None

    rows = []
    for name, rep in (("intra_provider", intra), ("inter_provider", inter)):
        pl, q = rep.placements, rep.achieved_quality
        rows.append({"solver": name, "d_u_i": pl.get("d_u_i"), "d_u_j": pl.get("d_u_j"), "d_l_j": pl.get("d_l_j"),
                     "q_u": q.get("unlicensed"), "q_l": q.get("licensed"), "residual": rep.residual,
                     "iterations": rep.iterations, "converged": rep.converged, "clamped": rep.clamped,
                     "applicable": rep.applicable})
    _write_csv(out / "equilibrium.csv", ("solver", "d_u_i", "d_u_j", "d_l_j", "q_u", "q_l", "residual",
                                         "iterations", "converged", "clamped", "applicable"), rows)
    report = {
        "intra_provider": intra,
        "inter_provider": inter,
        "nash_oracle": {"grid_steps": grid, "count": len(oracle),
                        "equilibria": [[_profile(p) for p in pair] for pair in oracle]},
        "best_response_dynamics": _dynamics_summary(dyn),
        "cross_check": {"fixed_point_in_oracle": in_oracle},
    }
    return report


def run_simulate(scenario, out: Path) -> dict:
    traj = simulate(scenario)
    _write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(scenario, traj))
    osc = detect_oscillation(traj) if len(traj) >= 4 else None
    last = traj.states[-1]
    return {
        "rounds": len(traj) - 1,
        "policy": scenario.solver.policy,
        "final": {"q_u": last.q_unlicensed, "q_l": last.q_licensed, "profits": last.profits,
                  "strategies": {k: _profile(p) for k, p in last.strategies.items()}},
        "oscillation": None if osc is None else {"kind": type(osc).__name__, **dataclasses.asdict(osc)},
        "events": [list(e) for e in traj.events],
        "migration_log": traj.migration_log,
    }


def _classify_pipeline(scenario):
    traj = simulate(scenario)
    welfare = commons_welfare_gap(scenario, scenario.solver.grid_steps)
    return traj, welfare, classify(traj, scenario, welfare)


def run_classify(scenario, out: Path) -> dict:
    traj, welfare, label = _classify_pipeline(scenario)
    _write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(scenario, traj))
    return {"label": label.label, "evidence": label.evidence, "welfare": _welfare(welfare)}


def run_dominance(scenario, out: Path) -> dict:
    profile = scenario.initial()
    rep = dominance_check(scenario, scenario.combined.id, profile)
    return {"provider": scenario.combined.id, "profile": [_profile(p) for p in profile.values()],
            "condition_i": rep.condition_i, "condition_ii": rep.condition_ii, "condition_iii": rep.condition_iii,
            "any": rep.any, "diagnostics": rep.diagnostics}


def _sweep_point(task) -> dict:
    index, data, names, values = task
    row = {"index": index, "status": "ok"}
    for k, (name, val) in enumerate(zip(names, values), start=1):
        row[f"param_{k}"], row[f"value_{k}"] = name, val
    try:
        for name, val in zip(names, values):
            data = with_value(data, name, val)
        sc = from_dict(data)
        row["sum_backhaul"] = sum(p.backhaul_capacity for p in sc.providers)
        row["regime_boundary"] = (1.0 - sc.bulk_floor) * sc.shared.capacity
        row["capacity_regime"] = scenario_regime(sc).value
        traj, welfare, label = _classify_pipeline(sc)
        qs = [s.q_unlicensed for s in traj.states]
        row.update(label=label.label.value, q_u_final=qs[-1], q_u_min=min(qs), relative_gap=welfare.relative_gap)
    except ConfigError as exc:
        row.update(status="config_error", error="; ".join(exc.errors))
    except ModelError as exc:
        row.update(status="model_error", error=f"{type(exc).__name__}: {exc}")
    return row


def sweep_tasks(scenario) -> list:
    if not scenario.sweep:
        raise ConfigError(["sweep: the scenario declares no sweep parameters"])
    params = scenario.sweep["parameters"]
    base = to_dict(scenario)
    base.pop("sweep", None)
    names = [p["path"] for p in params]
    grid = itertools.product(*[p["values"] for p in params])
    return [(k, base, names, vals) for k, vals in enumerate(grid)]


def run_sweep(scenario, out: Path, workers: int | None = None) -> dict:
    tasks = sweep_tasks(scenario)
    workers = workers or min(len(tasks), os.cpu_count() or 1, 8)
    if workers <= 1:
        rows = [_sweep_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))  # map keeps index order
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    return {"points": len(rows), "errors": sum(r["status"] != "ok" for r in rows),
            "labels": {lab: sum(r.get("label") == lab for r in rows) for lab in sorted({r.get("label") or "" for r in rows} - {""})}}


SUBCOMMANDS = {
    "equilibrium": run_equilibrium,
    "simulate": run_simulate,
    "classify": run_classify,
    "sweep": run_sweep,
    "dominance": run_dominance,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="offload-commons", description="Two-provider Wi-Fi offload game solver")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    ap.add_argument("--config", required=True, type=Path, help="scenario JSON file")
    ap.add_argument("--out", required=True, type=Path, help="output directory")
    ap.add_argument("--grid", type=int, help="override solver.grid_steps")
    ap.add_argument("--rounds", type=int, help="override solver.rounds")
    ap.add_argument("--seed", type=int, help="override the scenario seed")
    ap.add_argument("--workers", type=int, help="sweep worker processes (default: one per core, max 8)")
    return ap


def _apply_overrides(scenario, args):
    solver = scenario.solver
    if args.grid is not None:
        if not 2 <= args.grid <= 12:
            raise ConfigError([f"--grid: must lie in [2, 12], got {args.grid}"])
        solver = dataclasses.replace(solver, grid_steps=args.grid)
    if args.rounds is not None:
        if args.rounds < 1:
            raise ConfigError([f"--rounds: must be at least 1, got {args.rounds}"])
        solver = dataclasses.replace(solver, rounds=args.rounds)
    seed = scenario.seed if args.seed is None else args.seed
    return dataclasses.replace(scenario, solver=solver, seed=seed)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        scenario = _apply_overrides(load_scenario(args.config), args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    try:
        if args.subcommand == "sweep":
            report = run_sweep(scenario, out, args.workers)
        else:
            report = SUBCOMMANDS[args.subcommand](scenario, out)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        report = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(f"model error: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = EXIT_MODEL
    _write_json(out / "report.json", {"subcommand": args.subcommand, **report})
    _write_json(out / "manifest.json", {
        "tool": "offload-commons",
        "version": __version__,
        "subcommand": args.subcommand,
        "config_hash": config_hash(to_dict(scenario)),
        "seed": scenario.seed,
        "backend": default_backend(),
        "exit_status": status,
        "wall_time_s": time.perf_counter() - t0,
    })
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
