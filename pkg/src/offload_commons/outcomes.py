"""Outcome classification: capacity regime and convergence label."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .dynamics import Drift, Periodic, Trajectory, detect_oscillation
from .errors import DomainError
from .market import TOL


class Regime(str, enum.Enum):
    WIFI_BOTTLENECK = "WifiBottleneck"
    BACKHAUL_BOTTLENECK = "BackhaulBottleneck"


class Label(str, enum.Enum):
    SELF_BALANCING = "SelfBalancing"
    SYSTEM_DEADLOCK = "SystemDeadlock"
    BACKHAUL_LIMITED = "BackhaulLimited"


@dataclass(frozen=True)
class OutcomeLabel:
    label: Label
    evidence: dict = field(default_factory=dict)


def capacity_regime(cu: float, backhauls, bulk_floor: float) -> Regime:
    """BackhaulBottleneck when all backhaul-feasible load fits above the bulk floor.

    The boundary ``sum(backhauls) == (1 - bulk_floor) * cu`` counts as
    backhaul-limited.
    """
    backhauls = list(backhauls)
    if cu <= 0 or any(c <= 0 for c in backhauls):
        raise DomainError("capacities must be positive")
    if sum(backhauls) <= (1.0 - bulk_floor) * cu + TOL:
        return Regime.BACKHAUL_BOTTLENECK
    return Regime.WIFI_BOTTLENECK


def scenario_regime(scenario) -> Regime:
    return capacity_regime(scenario.shared.capacity, [p.backhaul_capacity for p in scenario.providers],
                           scenario.bulk_floor)


def _oscillation_evidence(osc) -> dict:
    if osc is None:
        return {"kind": "none"}
    if isinstance(osc, Periodic):
        return {"kind": "periodic", "period": osc.period, "amplitude": osc.amplitude}
    return {"kind": "drift", "direction": osc.direction, "monotone": osc.monotone}


def classify(trajectory: Trajectory, scenario, welfare) -> OutcomeLabel:
    """Label a simulated trajectory.

    BackhaulLimited takes precedence. Otherwise SystemDeadlock when the band
    ends below the deadlock quality, the welfare gap exceeds its threshold or
    unlicensed demand drifts monotonically toward abandonment. Everything
    else, periodic tails included, is SelfBalancing.
    """
    if trajectory.scenario_fingerprint != scenario.fingerprint():
        raise DomainError("trajectory was not simulated from this scenario")
    regime = scenario_regime(scenario)
    q_final = trajectory.states[-1].q_unlicensed
    osc = detect_oscillation(trajectory) if len(trajectory) >= 4 else None
    u = trajectory.unlicensed_demand()
    th = scenario.thresholds
    abandonment = (isinstance(osc, Drift) and osc.monotone and osc.direction < 0
                   and u[-1] <= th.abandonment * u.max())
    evidence = {
        "capacity_regime": regime.value,
        "oscillation": _oscillation_evidence(osc),
        "welfare_gap": welfare.gap,
        "relative_welfare_gap": welfare.relative_gap,
        "q_unlicensed_final": q_final,
        "q_licensed_final": trajectory.states[-1].q_licensed,
        "bulk_floor": scenario.bulk_floor,
        "deadlock_quality": scenario.deadlock_quality,
        "in_bulk_floor_band": abs(q_final - scenario.bulk_floor) <= 1e-3,
    }
    if regime is Regime.BACKHAUL_BOTTLENECK:
        return OutcomeLabel(Label.BACKHAUL_LIMITED, evidence)
    reasons = []
    if q_final < scenario.deadlock_quality:
        reasons.append("quality_collapse")
    if welfare.relative_gap > th.welfare_gap:
        reasons.append("welfare_gap")
    if abandonment:
        reasons.append("abandonment")
    if reasons:
        return OutcomeLabel(Label.SYSTEM_DEADLOCK, {**evidence, "reasons": reasons})
    return OutcomeLabel(Label.SELF_BALANCING, evidence)
