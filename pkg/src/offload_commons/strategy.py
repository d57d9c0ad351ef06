"""Strategy space, payoff evaluation, dominance conditions and best responses."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .errors import DomainError, InfeasibleStrategyError, ModelError
from .market import (
    LATENT,
    LICENSED,
    RESALE,
    ROAMING,
    TOL,
    UNLICENSED,
    UNSERVED,
    ClassId,
    DemandPool,
    MarketState,
    NetworkKind,
    StrategyProfile,
    network_profit,
    provider_profit,
    qos,
)

__all__ = [
    "StrategyProfile",
    "DominanceReport",
    "NoFeasibleStrategyError",
    "apply_strategy",
    "as_pair",
    "best_response",
    "dominance_check",
    "market_params",
]


class NoFeasibleStrategyError(ModelError):
    """No candidate strategy satisfies the capacity constraints."""


def as_pair(scenario, profiles) -> tuple[StrategyProfile, StrategyProfile]:
    """Normalize a joint profile to (Wi-Fi provider, combined operator)."""
    if isinstance(profiles, dict):
        return profiles[scenario.wifi.id], profiles[scenario.combined.id]
    si, sj = profiles
    if si.provider != scenario.wifi.id:
        si, sj = sj, si
    return si, sj


def _subscriber_table(scenario, state):
    if state is None or not state.subscriber_base:
        return scenario.subscribers
    return state.subscriber_base


def _visitors(scenario, state) -> dict[str, float]:
    if state is None:
        return {}
    return {p.id: state.visitors(p.id) for p in scenario.providers}


def market_params(scenario, state: MarketState | None = None) -> np.ndarray:
    """Kernel parameter vector for the scenario, or for a running market state."""
    return K.pack(scenario, _subscriber_table(scenario, state), scenario.latent_premium, _visitors(scenario, state))


def apply_strategy(scenario, profiles, state: MarketState | None = None, round: int | None = None,
                   subscribers: dict | None = None, visitors: dict | None = None) -> MarketState:
    """Materialize a joint profile into a MarketState.

    ``state`` supplies the current subscriber bases and roaming visitors; the
    scenario's initial market is used when omitted. ``subscribers`` and
    ``visitors`` override either. Raises
    InfeasibleStrategyError naming the first violated capacity.
    """
    si, sj = as_pair(scenario, profiles)
    i, j = scenario.wifi, scenario.combined
    if si.resale != 0.0:
        raise DomainError(f"provider {i.id} owns no licensed capacity to resell")
    subs = subscribers if subscribers is not None else _subscriber_table(scenario, state)
    vis = visitors if visitors is not None else _visitors(scenario, state)
    b, v = ClassId.BULK, ClassId.PREMIUM
    bi_b, bi_v = subs[i.id][b], subs[i.id][v]
    bj_b, bj_v = subs[j.id][b], subs[j.id][v]
    lat = scenario.latent_premium
    cu, cl = scenario.shared.capacity, j.licensed.capacity
    vis_i, vis_j = vis.get(i.id, 0.0), vis.get(j.id, 0.0)

    # Same operation order as kernels._evaluate.
    iu_b = si.bulk * bi_b
    iu_v = si.premium * bi_v
    ju_b = sj.bulk * bj_b
    ju_v = sj.premium * bj_v
    jl_b = (1.0 - sj.bulk) * bj_b
    jl_v = (1.0 - sj.premium) * bj_v
    room = cl - jl_b - jl_v
    admitted = sj.resale * max(min(lat, room), 0.0)
    load_i = iu_b + iu_v + vis_i
    load_j = ju_b + ju_v + vis_j
    shared_load = load_i + load_j
    lic = jl_b + (jl_v + admitted)

    if shared_load > cu + TOL:
        raise InfeasibleStrategyError("shared", shared_load, cu)
    if load_i > i.backhaul_capacity + TOL:
        raise InfeasibleStrategyError(f"backhaul:{i.id}", load_i, i.backhaul_capacity)
    if load_j > j.backhaul_capacity + TOL:
        raise InfeasibleStrategyError(f"backhaul:{j.id}", load_j, j.backhaul_capacity)
    if lic > cl + TOL:
        raise InfeasibleStrategyError("licensed", lic, cl)

    pools = {
        b: DemandPool(b, bi_b + bj_b + vis_i + vis_j, {
            (i.id, UNLICENSED): iu_b, (i.id, UNSERVED): bi_b - iu_b,
            (j.id, UNLICENSED): ju_b, (j.id, LICENSED): jl_b,
            (i.id, ROAMING): vis_i, (j.id, ROAMING): vis_j,
        }),
        v: DemandPool(v, bi_v + bj_v + lat, {
            (i.id, UNLICENSED): iu_v, (i.id, UNSERVED): bi_v - iu_v,
            (j.id, UNLICENSED): ju_v, (j.id, LICENSED): jl_v,
            (j.id, RESALE): admitted, (LATENT, UNSERVED): lat - admitted,
        }),
    }
    derived = {
        NetworkKind.UNLICENSED_AIR: qos(shared_load, cu),
        NetworkKind.LICENSED_AIR: qos(lic, cl),
    }
    strategies = {i.id: si, j.id: sj}
    base = {k: dict(t) for k, t in subs.items()}
    if round is None:
        round = 0 if state is None else state.round
    loc = scenario.loc_tag if state is None else state.loc_tag
    st = MarketState(loc, round, pools, derived, {}, scenario.classes, scenario.shared, strategies, base)
    profits = {p.id: provider_profit(p, st) for p in scenario.providers}
    return MarketState(loc, round, pools, derived, profits, scenario.classes, scenario.shared, strategies, base)


# ---------------------------------------------------------------------------
# Candidate strategy sets


def _clip_unique(rows: np.ndarray) -> np.ndarray:
    rows = np.clip(rows, 0.0, 1.0)
    return np.unique(rows, axis=0)


def _wifi_candidates(p: np.ndarray, opponent: StrategyProfile, steps: int, refine: bool) -> np.ndarray:
    g = K.grid(steps)
    rows = [(a, c) for a in g for c in g]
    if refine:
        load_j = opponent.bulk * p[K.BJ_B] + opponent.premium * p[K.BJ_V] + p[K.VIS_J]
        shared_targets = (p[K.CU] * (1.0 - p[K.QB]), p[K.CU] * (1.0 - p[K.QV]), p[K.CU])
        for x in g:
            if p[K.BI_B] > 0:
                own = x * p[K.BI_V] + p[K.VIS_I]
                rows += [((t - own - load_j) / p[K.BI_B], x) for t in shared_targets]
                rows.append(((p[K.CB_I] - own) / p[K.BI_B], x))
            if p[K.BI_V] > 0:
                own = x * p[K.BI_B] + p[K.VIS_I]
                rows += [(x, (t - own - load_j) / p[K.BI_V]) for t in shared_targets]
                rows.append((x, (p[K.CB_I] - own) / p[K.BI_V]))
    return _clip_unique(np.array(rows, dtype=float))


def _resale_breakpoints(p, fb, fv):
    jl_b = (1.0 - fb) * p[K.BJ_B]
    jl_v = (1.0 - fv) * p[K.BJ_V]
    cap = max(min(p[K.LAT], p[K.CL] - jl_b - jl_v), 0.0)
    if cap <= 0:
        return []
    return [(p[K.CL] * (1.0 - q) - jl_b - jl_v) / cap for q in (p[K.QB], p[K.QV])]


def _combined_candidates(p: np.ndarray, opponent: StrategyProfile, steps: int, refine: bool) -> np.ndarray:
    g = K.grid(steps)
    if not refine:
        return K.combined_grid(steps)
    load_i = opponent.bulk * p[K.BI_B] + opponent.premium * p[K.BI_V] + p[K.VIS_I]
    shared_targets = (p[K.CU] * (1.0 - p[K.QB]), p[K.CU] * (1.0 - p[K.QV]), p[K.CU])
    lic_targets = (p[K.CL] * (1.0 - p[K.QB]), p[K.CL] * (1.0 - p[K.QV]))
    pairs = [(a, c) for a in g for c in g]
    for x in g:
        if p[K.BJ_B] > 0:
            own = x * p[K.BJ_V] + p[K.VIS_J]
            pairs += [((t - own - load_i) / p[K.BJ_B], x) for t in shared_targets]
            pairs.append(((p[K.CB_J] - own) / p[K.BJ_B], x))
            jl_v = (1.0 - x) * p[K.BJ_V]
            pairs += [(1.0 - (t - jl_v) / p[K.BJ_B], x) for t in lic_targets]
        if p[K.BJ_V] > 0:
            own = x * p[K.BJ_B] + p[K.VIS_J]
            pairs += [(x, (t - own - load_i) / p[K.BJ_V]) for t in shared_targets]
            pairs.append((x, (p[K.CB_J] - own) / p[K.BJ_V]))
            jl_b = (1.0 - x) * p[K.BJ_B]
            pairs += [(x, 1.0 - (t - jl_b) / p[K.BJ_V]) for t in lic_targets]
    pairs = _clip_unique(np.array(pairs, dtype=float))
    rows = []
    for fb, fv in pairs:
        rs = list(g) + _resale_breakpoints(p, fb, fv)
        rows += [(fb, fv, r) for r in rs]
    return _clip_unique(np.array(rows, dtype=float))


def _pick(values, feasible, unlicensed, cands) -> int:
    """Index of the best feasible candidate under the deterministic tie-break.

    Ties (within TOL) go to the lower premium offload, then the lower total
    unlicensed placement, then the lexicographically smaller strategy.
    """
    idx = np.flatnonzero(feasible)
    if idx.size == 0:
        return -1
    best = values[idx].max()
    tied = idx[values[idx] >= best - TOL]
    keys = [(cands[k, 1], unlicensed[k], *cands[k]) for k in tied]
    return int(tied[min(range(len(tied)), key=keys.__getitem__)])


def best_response(scenario, provider: str, opponent: StrategyProfile, grid_steps: int,
                  state: MarketState | None = None, refine: bool = False,
                  backend: str | None = None) -> StrategyProfile:
    """Profit-maximizing strategy of ``provider`` against a fixed opponent.

    Candidates are the ``grid_steps + 1`` point grid on every fraction. With
    ``refine`` the grid is augmented with the fractions at which a quality
    floor or capacity bound is met exactly, which is where piecewise linear
    payoffs change slope.
    """
    if grid_steps < 2:
        raise DomainError("grid_steps must be at least 2")
    p = market_params(scenario, state)
    if provider == scenario.wifi.id:
        cands = _wifi_candidates(p, opponent, grid_steps, refine)
        opp = np.array([opponent.key()])
        pi, _, feas, _, ul = K.joint_payoffs(p, cands, opp, backend)
        k = _pick(pi[:, 0], feas[:, 0], ul[:, 0], cands)
        if k < 0:
            raise NoFeasibleStrategyError(f"no feasible strategy for {provider} on a {grid_steps}-step grid")
        return StrategyProfile(provider, float(cands[k, 0]), float(cands[k, 1]), 0.0)
    if provider == scenario.combined.id:
        cands = _combined_candidates(p, opponent, grid_steps, refine)
        opp = np.array([opponent.key()[:2]])
        _, pj, feas, _, ul = K.joint_payoffs(p, opp, cands, backend)
        k = _pick(pj[0], feas[0], ul[0], cands)
        if k < 0:
            raise NoFeasibleStrategyError(f"no feasible strategy for {provider} on a {grid_steps}-step grid")
        return StrategyProfile(provider, float(cands[k, 0]), float(cands[k, 1]), float(cands[k, 2]))
    raise DomainError(f"unknown provider {provider!r}")


# ---------------------------------------------------------------------------
# Dominance conditions


@dataclass(frozen=True)
class DominanceReport:
    condition_i: bool
    condition_ii: bool
    condition_iii: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def any(self) -> bool:
        return self.condition_i or self.condition_ii or self.condition_iii


def dominance_check(scenario, provider: str, profile, grid_steps: int | None = None,
                    state: MarketState | None = None) -> DominanceReport:
    """Evaluate the three offload-dominance conditions for the combined operator.

    (i) quality gap ``q_licensed - q_unlicensed < 0``; (ii) one grid step more
    offload, with the freed licensed capacity resold to latent demand, raises
    profit (licensed-side yields beat the unlicensed-side change); (iii) that
    step moves bulk traffic only.
    """
    j = scenario.combined
    if provider != j.id:
        raise DomainError(f"dominance conditions are defined for the licensed operator, not {provider!r}")
    steps = grid_steps or scenario.solver.grid_steps
    si, sj = as_pair(scenario, profile)
    before = apply_strategy(scenario, (si, sj), state)
    dq = before.q_licensed - before.q_unlicensed
    diag = {"delta_q": dq, "q_unlicensed": before.q_unlicensed, "q_licensed": before.q_licensed,
            "profit_before": before.profits[j.id]}

    if sj.bulk < 1.0:
        moved_cls, step = ClassId.BULK, StrategyProfile(j.id, min(1.0, sj.bulk + 1.0 / steps), sj.premium, sj.resale)
    elif sj.premium < 1.0:
        moved_cls, step = ClassId.PREMIUM, StrategyProfile(j.id, sj.bulk, min(1.0, sj.premium + 1.0 / steps), sj.resale)
    else:
        diag["step"] = "none: everything already offloaded"
        return DominanceReport(dq < 0, False, False, diag)

    subs = _subscriber_table(scenario, state)[j.id]
    moved = (step.offload_fraction(moved_cls) - sj.offload_fraction(moved_cls)) * subs[moved_cls]
    adm_before = before.pools[ClassId.PREMIUM].get(j.id, RESALE)
    jl_b = (1.0 - step.bulk) * subs[ClassId.BULK]
    jl_v = (1.0 - step.premium) * subs[ClassId.PREMIUM]
    cap = max(min(scenario.latent_premium, j.licensed.capacity - jl_b - jl_v), 0.0)
    adm_target = min(adm_before + moved, cap)
    step = StrategyProfile(j.id, step.bulk, step.premium, adm_target / cap if cap > 0 else 0.0)
    diag.update(moved_class=moved_cls.value, moved_units=moved, step=step.key())
    try:
        after = apply_strategy(scenario, (si, step), state)
    except InfeasibleStrategyError as exc:
        diag["step"] = f"infeasible: {exc}"
        return DominanceReport(dq < 0, False, moved_cls == ClassId.BULK, diag)

    lic_before = network_profit(j, before, NetworkKind.LICENSED_AIR)
    lic_after = network_profit(j, after, NetworkKind.LICENSED_AIR)
    un_before = network_profit(j, before, NetworkKind.UNLICENSED_AIR)
    un_after = network_profit(j, after, NetworkKind.UNLICENSED_AIR)
    adm_after = after.pools[ClassId.PREMIUM].get(j.id, RESALE)
    licensed_yield = lic_after - lic_before
    unlicensed_change = un_after - un_before
    path_cost = j.unlicensed_cost(scenario.shared)
    diag.update(
        profit_after=after.profits[j.id],
        licensed_yield=licensed_yield,
        unlicensed_change=unlicensed_change,
        resale_revenue=(adm_after - adm_before) * j.price(NetworkKind.LICENSED_AIR, ClassId.PREMIUM),
        capacity_freed=moved,
        cost_reduction=moved * (j.licensed.cost_per_unit - path_cost),
        # per-unit margins for one marginal unit of the moved class
        licensed_unit_margin=j.price(NetworkKind.LICENSED_AIR, moved_cls) - j.licensed.cost_per_unit,
        unlicensed_unit_margin=j.price(NetworkKind.UNLICENSED_AIR, moved_cls) - path_cost,
    )
    condition_ii = licensed_yield > -unlicensed_change + TOL
    return DominanceReport(dq < 0, condition_ii, moved_cls == ClassId.BULK, diag)
