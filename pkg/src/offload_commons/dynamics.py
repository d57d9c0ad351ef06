"""Multi-round market dynamics: customer migration, oscillations, roaming
visitors and band sabotage."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .errors import DomainError, InfeasibleStrategyError
from .market import TOL, ClassId, MarketState, MigrationRule, NetworkKind, StrategyProfile, demand_response, delta_terms
from .strategy import apply_strategy, as_pair, best_response, market_params

__all__ = [
    "MigrationRule",
    "Policy",
    "Trajectory",
    "Periodic",
    "Drift",
    "SabotageImpact",
    "step",
    "simulate",
    "detect_oscillation",
    "inject_roaming",
    "sabotage_strategy",
    "sabotage_impact",
]

OSCILLATION_TOL = 1e-6
_SCALE_ITER = 60


class Policy(str, enum.Enum):
    STATIC = "static"
    BEST_RESPONSE = "best_response"


@dataclass
class Trajectory:
    states: list
    events: list = field(default_factory=list)
    migration_log: list = field(default_factory=list)
    scenario_fingerprint: str = ""

    def __post_init__(self):
        if not self.states:
            raise DomainError("a trajectory needs at least one state")

    def __len__(self) -> int:
        return len(self.states)

    def series(self, fn) -> np.ndarray:
        return np.array([fn(s) for s in self.states], dtype=float)

    def unlicensed_demand(self) -> np.ndarray:
        return self.series(lambda s: sum(s.unlicensed_load(p) for p in s.profits))


# ---------------------------------------------------------------------------
# One round of migration


def _offers(scenario, state: MarketState, strategies) -> dict:
    """(price, quality) of each provider's offer per class."""
    si, sj = as_pair(scenario, strategies)
    i, j = scenario.wifi, scenario.combined
    qu, ql = state.q_unlicensed, state.q_licensed
    u, l_ = NetworkKind.UNLICENSED_AIR, NetworkKind.LICENSED_AIR
    out = {}
    for cls in ClassId:
        f = sj.offload_fraction(cls)
        out[cls] = {
            i.id: (i.price(u, cls), qu),
            j.id: (f * j.price(u, cls) + (1.0 - f) * j.price(l_, cls), f * qu + (1.0 - f) * ql),
        }
    return out


def _moves(scenario, state, rule: MigrationRule, strategies) -> list:
    offers = _offers(scenario, state, strategies)
    ids = (scenario.wifi.id, scenario.combined.id)
    moves = []
    for cls in ClassId:
        for home, alt in (ids, ids[::-1]):
            p_home, q_home = offers[cls][home]
            p_alt, q_alt = offers[cls][alt]
            dp, dq = delta_terms(p_home, p_alt, q_home, q_alt)
            pull = demand_response(1.0, dp, dq, rule.elasticity) - 1.0
            if pull > rule.hysteresis and pull > 0.0:
                amount = min(rule.cap, pull) * state.subscriber_base[home][cls]
                if amount > 0.0:
                    moves.append((cls, home, alt, amount))
    return moves


def _shifted(base: dict, moves: list, lam: float) -> dict:
    out = {k: dict(v) for k, v in base.items()}
    for cls, home, alt, amount in moves:
        out[home][cls] -= lam * amount
        out[alt][cls] += lam * amount
    return out


def _feasible(scenario, strategies, state, subs) -> bool:
    try:
        apply_strategy(scenario, strategies, state, subscribers=subs)
    except InfeasibleStrategyError:
        return False
    return True


def _step(scenario, state: MarketState, rule: MigrationRule, strategies):
    moves = _moves(scenario, state, rule, strategies)
    base = state.subscriber_base
    lam = 1.0
    if moves and not _feasible(scenario, strategies, state, _shifted(base, moves, 1.0)):
        # loads are linear in the migrated share, so feasibility is an interval
        lo, hi = 0.0, 1.0
        for _ in range(_SCALE_ITER):
            mid = 0.5 * (lo + hi)
            if _feasible(scenario, strategies, state, _shifted(base, moves, mid)):
                lo = mid
            else:
                hi = mid
        lam = lo
    subs = _shifted(base, moves, lam)
    new = apply_strategy(scenario, strategies, state, round=state.round + 1, subscribers=subs)
    log = [{"round": new.round, "class": c.value, "from": h, "to": a, "amount": lam * amt}
           for c, h, a, amt in moves if lam > 0.0]
    return new, log


def step(scenario, state: MarketState, rule: MigrationRule, strategies) -> MarketState:
    """Advance the market one round under fixed strategies.

    Every subscriber pool compares its provider's offer with the competitor's
    and moves ``min(cap, pull) * pool`` where ``pull`` is the demand response
    to the price and quality differentials; pulls at or below the hysteresis
    stay put. A migration that would breach a capacity is scaled back.
    """
    return _step(scenario, state, rule, strategies)[0]


# ---------------------------------------------------------------------------
# Events


def inject_roaming(scenario, state: MarketState, influx: float, target: str) -> MarketState:
    """Add roaming bulk visitors to ``target``'s unlicensed path.

    Admission is clamped to the free shared capacity and the target's free
    backhaul.
    """
    if influx < 0:
        raise DomainError(f"influx must be non-negative, got {influx}")
    host = scenario.provider(target)
    shared_free = scenario.shared.capacity - sum(state.unlicensed_load(p.id) for p in scenario.providers)
    backhaul_free = host.backhaul_capacity - state.unlicensed_load(target)
    admitted = max(0.0, min(influx, shared_free, backhaul_free))
    if admitted == 0.0:
        return state
    vis = {p.id: state.visitors(p.id) for p in scenario.providers}
    vis[target] += admitted
    return apply_strategy(scenario, state.strategies, state, visitors=vis)


def sabotage_strategy(scenario, saboteur: str, opponent: StrategyProfile | None = None,
                      state: MarketState | None = None, grid_steps: int | None = None) -> StrategyProfile:
    """Profile loading the shared band as far as capacity allows.

    Premium subscribers stay licensed; bulk goes to the band up to the
    saboteur's backhaul and the band's free capacity. The freed licensed
    capacity is resold at the best grid share.
    """
    j = scenario.combined
    if saboteur != j.id:
        raise DomainError(f"{saboteur!r} has no licensed fallback and cannot sabotage")
    if opponent is None:
        opponent = (state.strategies if state is not None else scenario.initial())[scenario.wifi.id]
    p = market_params(scenario, state)
    load_i = opponent.bulk * p[K.BI_B] + opponent.premium * p[K.BI_V] + p[K.VIS_I]
    room = min(p[K.CU] - load_i - p[K.VIS_J], p[K.CB_J] - p[K.VIS_J])
    bulk = float(min(1.0, max(0.0, room) / p[K.BJ_B])) if p[K.BJ_B] > 0 else 0.0
    steps = grid_steps or scenario.solver.grid_steps
    cands = np.array([(bulk, 0.0, r) for r in K.grid(steps)])
    _, pj, feas, _, _ = K.joint_payoffs(p, np.array([opponent.key()[:2]]), cands)
    vals = np.where(feas[0], pj[0], -np.inf)
    k = int(np.flatnonzero(vals >= vals.max() - TOL)[0])
    return StrategyProfile(saboteur, bulk, 0.0, float(cands[k, 2]))


@dataclass(frozen=True)
class SabotageImpact:
    profit_before: float
    profit_after: float
    reduction: float
    q_before: float
    q_after: float
    wifi_profile: StrategyProfile
    sabotage_profile: StrategyProfile


def sabotage_impact(scenario, saboteur: str, wifi_profile: StrategyProfile | None = None,
                    grid_steps: int | None = None) -> SabotageImpact:
    """Competitor profit with and without sabotage.

    The baseline keeps the saboteur entirely licensed; the competitor plays
    ``wifi_profile``, by default its grid best response to that baseline.
    """
    i = scenario.wifi
    steps = grid_steps or scenario.solver.grid_steps
    baseline = StrategyProfile(saboteur, 0.0, 0.0, 0.0)
    si = wifi_profile or best_response(scenario, i.id, baseline, steps)
    before = apply_strategy(scenario, (si, baseline))
    sj = sabotage_strategy(scenario, saboteur, opponent=si, grid_steps=steps)
    after = apply_strategy(scenario, (si, sj))
    return SabotageImpact(before.profits[i.id], after.profits[i.id], before.profits[i.id] - after.profits[i.id],
                          float(before.q_unlicensed), float(after.q_unlicensed), si, sj)


# ---------------------------------------------------------------------------
# Simulation


def simulate(scenario, rule: MigrationRule | None = None, policy: Policy | str | None = None,
             T: int | None = None, initial=None, grid_steps: int | None = None) -> Trajectory:
    """Run ``T`` rounds of strategy updates and migration.

    Under the best-response policy the Wi-Fi provider answers the previous
    round's combined strategy, then the combined operator answers that. The
    refined grid is used so that quality-floor breakpoints are reachable.
    Scenario events (roaming influx, sabotage) fire at the start of their
    round; sabotage stays on from then on.
    """
    rule = rule or scenario.migration
    policy = Policy(policy or scenario.solver.policy)
    T = scenario.solver.rounds if T is None else T
    if T < 1:
        raise DomainError("T must be at least 1")
    steps = grid_steps or scenario.solver.grid_steps
    i, j = scenario.wifi.id, scenario.combined.id

    state = apply_strategy(scenario, initial if initial is not None else scenario.initial())
    traj = Trajectory([state], scenario_fingerprint=scenario.fingerprint())
    sabotage = False
    for t in range(1, T + 1):
        for ev in scenario.events:
            if ev.round != t:
                continue
            if ev.kind == "roaming":
                before = state.visitors(ev.target)
                state = inject_roaming(scenario, state, ev.influx, ev.target)
                traj.events.append((t, f"roaming:{ev.target}:{state.visitors(ev.target) - before:.12g}"))
            else:
                sabotage = True
                traj.events.append((t, f"sabotage:{ev.target}"))
        si, sj = as_pair(scenario, state.strategies)
        if policy is Policy.BEST_RESPONSE:
            si = best_response(scenario, i, sj, steps, state=state, refine=True)
            if not sabotage:
                sj = best_response(scenario, j, si, steps, state=state, refine=True)
        if sabotage:
            sj = sabotage_strategy(scenario, j, opponent=si, state=state, grid_steps=steps)
        state, log = _step(scenario, state, rule, (si, sj))
        traj.states.append(state)
        traj.migration_log.extend(log)
    return traj


# ---------------------------------------------------------------------------
# Oscillation detection


@dataclass(frozen=True)
class Periodic:
    period: int
    amplitude: float


@dataclass(frozen=True)
class Drift:
    direction: int  # +1 rising, -1 falling, 0 neither
    monotone: bool = True


def _demand_vector(state: MarketState) -> np.ndarray:
    vals = []
    for cls in ClassId:
        alloc = state.pools[cls].allocation
        vals += [alloc[k] for k in sorted(alloc)]
    return np.array(vals)


def detect_oscillation(trajectory: Trajectory, tol: float = OSCILLATION_TOL):
    """Classify the last half of a trajectory.

    Returns None when total unlicensed demand is constant over the tail,
    Periodic for the smallest period in ``2 .. len/4`` that repeats every
    demand within ``tol``, and Drift otherwise (``monotone`` tells whether the
    unlicensed series is monotone).
    """
    n = len(trajectory.states)
    if n < 4:
        raise DomainError(f"oscillation detection needs at least 4 states, got {n}")
    u = trajectory.unlicensed_demand()[n // 2:]
    if np.all(np.abs(u - u[0]) <= tol):
        return None
    tail = np.array([_demand_vector(s) for s in trajectory.states[n // 2:]])
    for period in range(2, n // 4 + 1):
        if np.all(np.abs(tail[period:] - tail[:-period]) <= tol):
            return Periodic(period, float(u.max() - u.min()))
    d = np.diff(u)
    rising, falling = bool(np.all(d >= -tol)), bool(np.all(d <= tol))
    direction = int(np.sign(u[-1] - u[0])) if abs(u[-1] - u[0]) > tol else 0
    return Drift(direction, rising or falling)
