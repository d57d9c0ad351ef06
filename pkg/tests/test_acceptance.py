"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""

import json

import numpy as np
import pytest

import conftest
import scenarios as S
from offload_commons.cli import _sweep_point, main, sweep_tasks
from offload_commons.dynamics import Periodic, Policy, detect_oscillation, sabotage_impact, simulate
from offload_commons.equilibrium import (
    FixedPoint,
    best_response_dynamics,
    commons_welfare_gap,
    intra_provider_equilibrium,
    nash_oracle,
    zero_profile,
)
from offload_commons.market import StrategyProfile
from offload_commons.outcomes import Label, Regime, classify, scenario_regime
from offload_commons.scenario import random_scenario, save_scenario
from offload_commons.strategy import apply_strategy, best_response


def _record(key, ok, detail):
    conftest.ACCEPTANCE_RESULTS[key] = (bool(ok), detail)
    assert ok, detail


def test_ac1_quality_floor_convergence():
    rng = np.random.default_rng(20240601)
    misses, checked = [], 0
    while checked < 10:
        sc = random_scenario(rng, "scarcity")
        if scenario_regime(sc) is not Regime.WIFI_BOTTLENECK:
            continue
        checked += 1
        qb = sc.bulk_floor
        d_i = float(rng.uniform(0.0, 0.5)) * sc.shared.capacity
        rep = intra_provider_equilibrium(sc, d_i)
        if not rep.clamped and abs(rep.achieved_quality["unlicensed"] - qb) > 1e-6:
            misses.append(f"root {checked}")
        traj = simulate(sc, policy=Policy.BEST_RESPONSE, T=50)
        if not any(abs(s.q_unlicensed - qb) <= 1e-3 for s in traj.states[1:]):
            misses.append(f"band {checked}: final q {traj.states[-1].q_unlicensed:.4f} vs {qb:.4f}")
    _record("AC1", not misses, f"10 scarcity scenarios, misses={misses}")


def test_ac2_oracle_equivalence():
    rng = np.random.default_rng(7)
    failures, fixed = [], 0
    for k in range(24):
        sc = random_scenario(rng, ["scarcity", "abundance", "any"][k % 3])
        steps = 2 + k % 5
        res = best_response_dynamics(sc, zero_profile(sc), steps, 200)
        if isinstance(res, FixedPoint):
            fixed += 1
            if res.profile not in nash_oracle(sc, steps):
                failures.append(k)
    _record("AC2", not failures and fixed >= 20,
            f"{fixed} fixed points over 24 scenarios, failures={failures}")


def test_ac3_dominance_condition_i():
    ok = 0
    cases = S.dominance_cases()
    for sc in cases:
        state = apply_strategy(sc, sc.initial())
        assert state.q_licensed - state.q_unlicensed < 0
        wifi = sc.initial()[sc.wifi.id]
        br = best_response(sc, sc.combined.id, wifi, sc.solver.grid_steps)
        ok += br.bulk > 0.0
    _record("AC3", ok == len(cases), f"{ok}/{len(cases)} cases raise bulk offload")


def test_ac4_tragedy_separation():
    trag, ab = S.tragedy(), S.abundance()
    steps = trag.solver.grid_steps
    assert ab.solver.grid_steps == steps
    rt = commons_welfare_gap(trag, steps).relative_gap
    ra = commons_welfare_gap(ab, steps).relative_gap
    _record("AC4", rt > 0.1 and ra <= 1e-9, f"scarcity rel gap {rt:.4f}, abundance {ra:.3g}")


def test_ac5_regime_boundary():
    sc = S.regime_sweep()
    rows = [_sweep_point(t) for t in sweep_tasks(sc)]
    flips, violations = [], 0
    for r in rows:
        limited = r["sum_backhaul"] <= r["regime_boundary"] + 1e-9
        flips.append(r["capacity_regime"] == ("BackhaulBottleneck" if limited else "WifiBottleneck"))
        if r["capacity_regime"] == "BackhaulBottleneck" and r["q_u_min"] < sc.bulk_floor - 1e-9:
            violations += 1
    regimes = [r["capacity_regime"] for r in rows]
    boundary = regimes.index("WifiBottleneck")
    ok = all(flips) and violations == 0 and S.BOUNDARY_VALUES[boundary - 1] == 40.0
    _record("AC5", ok, f"regimes={regimes}, violations={violations}")


def test_ac6_sabotage_asymmetry():
    bulk_only = StrategyProfile("i", 1.0, 0.0)
    wifi = sabotage_impact(S.sabotage_wifi_regime(), "j", wifi_profile=bulk_only).reduction
    back = sabotage_impact(S.sabotage_backhaul_regime(), "j", wifi_profile=bulk_only).reduction
    _record("AC6", wifi > 0 and back <= 1e-9, f"reduction wifi regime {wifi:.4f}, backhaul regime {back:.3g}")


def test_ac7_oscillation():
    sc = S.oscillation()
    traj = simulate(sc)
    osc = detect_oscillation(traj)
    out = classify(traj, sc, commons_welfare_gap(sc, sc.solver.grid_steps))
    ok = (isinstance(osc, Periodic) and osc.period == 2 and out.label is Label.SELF_BALANCING
          and out.evidence["oscillation"]["kind"] == "periodic")
    _record("AC7", ok, f"oscillation={osc}, label={out.label.value}")


DATA_FILES = {
    "equilibrium": ("equilibrium.csv", "report.json"),
    "simulate": ("trajectory.csv", "report.json"),
    "classify": ("trajectory.csv", "report.json"),
    "dominance": ("report.json",),
    "sweep": ("sweep.csv", "report.json"),
}


def test_ac8_determinism(tmp_path):
    diffs, runs = [], 0
    for name, make in sorted(S.ACCEPTANCE.items()):
        sc = make()
        cfg = tmp_path / f"{name}.json"
        save_scenario(sc, cfg)
        subs = [s for s in DATA_FILES if s != "sweep" or sc.sweep]
        for sub in subs:
            outs = []
            for rep in (0, 1):
                out = tmp_path / f"{name}-{sub}-{rep}"
                main([sub, "--config", str(cfg), "--out", str(out), "--workers", "2"])
                outs.append(out)
            runs += 1
            for f in DATA_FILES[sub]:
                if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes():
                    diffs.append(f"{name}/{sub}/{f}")
            assert json.loads((outs[0] / "manifest.json").read_text())["exit_status"] in (0, 3)
    _record("AC8", not diffs, f"{runs} subcommand runs repeated, differing files={diffs}")
