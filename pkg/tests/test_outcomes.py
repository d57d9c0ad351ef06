import dataclasses

import pytest

from offload_commons.dynamics import simulate
from offload_commons.equilibrium import commons_welfare_gap
from offload_commons.errors import DomainError
from offload_commons.outcomes import Label, Regime, capacity_regime, classify, scenario_regime
from offload_commons.scenario import Thresholds

import scenarios as S


@pytest.mark.parametrize("backhauls,expected", [
    ((30.0, 30.0), Regime.BACKHAUL_BOTTLENECK),
    ((40.0, 50.0), Regime.WIFI_BOTTLENECK),
    ((40.0, 40.0), Regime.BACKHAUL_BOTTLENECK),  # the boundary is backhaul-limited
])
def test_capacity_regime_examples(backhauls, expected):
    assert capacity_regime(100.0, backhauls, 0.2) is expected


@pytest.mark.parametrize("cu,backhauls", [(0.0, (10.0, 10.0)), (100.0, (0.0, 10.0)), (100.0, (10.0, -1.0))])
def test_capacity_regime_rejects_non_positive(cu, backhauls):
    with pytest.raises(DomainError):
        capacity_regime(cu, backhauls, 0.2)


def _label(sc):
    traj = simulate(sc)
    return classify(traj, sc, commons_welfare_gap(sc, sc.solver.grid_steps)), traj


def test_backhaul_starved_market():
    sc = S.backhaul_starved()
    assert scenario_regime(sc) is Regime.BACKHAUL_BOTTLENECK
    out, traj = _label(sc)
    assert out.label is Label.BACKHAUL_LIMITED
    assert all(s.q_unlicensed >= sc.bulk_floor - 1e-9 for s in traj.states)


def test_sabotage_collapses_band():
    out, _ = _label(S.sabotage_run())
    assert out.label is Label.SYSTEM_DEADLOCK
    assert "quality_collapse" in out.evidence["reasons"]


def test_oscillating_market_self_balances():
    out, _ = _label(S.oscillation())
    assert out.label is Label.SELF_BALANCING
    assert out.evidence["oscillation"]["kind"] == "periodic"
    assert out.evidence["oscillation"]["period"] == 2


def test_welfare_gap_threshold_monotone():
    sc = S.tragedy()
    traj = simulate(sc)
    w = commons_welfare_gap(sc, sc.solver.grid_steps)
    labels = []
    for th in (0.05, 0.2, 0.3, 0.5, 0.9):
        sct = dataclasses.replace(sc, thresholds=Thresholds(welfare_gap=th))
        traj.scenario_fingerprint = sct.fingerprint()
        labels.append(classify(traj, sct, w).label)
    deadlocked = [lab is Label.SYSTEM_DEADLOCK for lab in labels]
    # raising the threshold can only release a deadlock, never create one
    assert deadlocked == sorted(deadlocked, reverse=True)
    assert deadlocked[0] and not deadlocked[-1]


def test_fingerprint_mismatch_is_rejected():
    sc = S.tragedy()
    traj = simulate(sc)
    with pytest.raises(DomainError):
        classify(traj, S.abundance(), commons_welfare_gap(sc, 2))


def test_evidence_is_attached():
    out, _ = _label(S.tragedy())
    for key in ("capacity_regime", "oscillation", "welfare_gap", "relative_welfare_gap", "q_unlicensed_final"):
        assert key in out.evidence
