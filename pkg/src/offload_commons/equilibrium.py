"""Equilibrium solvers: quality-floor fixed points, grid Nash oracle,
best-response dynamics and the commons welfare gap."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .errors import DomainError
from .market import TOL, ClassId, NetworkKind, StrategyProfile, qos
from .strategy import apply_strategy, as_pair, best_response

BISECTION_TOL = 1e-6
BISECTION_MAX_ITER = 200


class EquilibriumKind(str, enum.Enum):
    INTRA_PROVIDER = "IntraProvider"
    INTER_PROVIDER = "InterProvider"
    NASH_GRID = "NashGrid"


@dataclass(frozen=True)
class EquilibriumReport:
    kind: EquilibriumKind
    placements: dict
    achieved_quality: dict
    residual: float
    iterations: int
    converged: bool
    clamped: bool = False
    applicable: bool = True
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Bisection:
    root: float
    iterations: int
    widths: tuple
    clamped: bool


def bisect_quality(quality, target: float, upper: float, tol: float = BISECTION_TOL,
                   max_iter: int = BISECTION_MAX_ITER) -> Bisection:
    """Largest demand in [0, upper] keeping the decreasing ``quality(d)`` at ``target``.

    Returns the boundary (``clamped=True``) when the root lies outside the
    interval.
    """
    lo, hi = 0.0, upper
    if quality(hi) >= target:
        return Bisection(hi, 0, (), True)
    if quality(lo) < target:
        return Bisection(lo, 0, (), True)
    widths = [hi - lo]
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if quality(mid) >= target:
            lo = mid
        else:
            hi = mid
        it += 1
        widths.append(hi - lo)
    return Bisection(0.5 * (lo + hi), it, tuple(widths), False)


def intra_provider_equilibrium(scenario, opponent_unlicensed_demand: float,
                               available_bulk: float | None = None) -> EquilibriumReport:
    """Bulk offload of the combined operator at which the shared band sits
    exactly on the bulk quality floor."""
    qb = scenario.bulk_floor
    if not 0.0 < qb < 1.0:
        raise DomainError(f"bulk quality floor must lie in (0, 1), got {qb}")
    cu = scenario.shared.capacity
    d_i = opponent_unlicensed_demand
    if d_i < 0 or d_i > cu + TOL:
        raise DomainError(f"opponent demand {d_i} outside [0, {cu}]")
    j = scenario.combined
    if available_bulk is None:
        available_bulk = scenario.subscribers[j.id][ClassId.BULK]
    upper = max(0.0, min(available_bulk, j.backhaul_capacity, cu - d_i))
    res = bisect_quality(lambda d: qos(d_i + d, cu), qb, upper)
    q = qos(d_i + res.root, cu)
    residual = abs(q - qb)
    return EquilibriumReport(
        EquilibriumKind.INTRA_PROVIDER,
        placements={"d_u_j": res.root, "d_u_i": d_i},
        achieved_quality={"unlicensed": q},
        residual=residual,
        iterations=res.iterations,
        converged=res.clamped or res.widths[-1] <= BISECTION_TOL,
        clamped=res.clamped,
        diagnostics={"upper_bound": upper, "bracket_widths": list(res.widths)},
    )


def inter_provider_equilibrium(scenario, opponent_unlicensed_demand: float | None = None) -> EquilibriumReport:
    """Licensed load at which licensed quality sits on the premium floor.

    Licensed capacity is filled with premium demand first (own subscribers,
    then latent demand) and backfilled with bulk; remaining bulk is offloaded
    up to the intra-provider fixed point against the Wi-Fi provider's bulk.
    """
    j, i = scenario.combined, scenario.wifi
    qv = scenario.premium_floor
    if not 0.0 < qv < 1.0:
        raise DomainError(f"premium quality floor must lie in (0, 1), got {qv}")
    premium_pool = scenario.subscribers[j.id][ClassId.PREMIUM] + scenario.latent_premium
    if premium_pool <= 0:
        return EquilibriumReport(EquilibriumKind.INTER_PROVIDER, {}, {}, float("nan"), 0, False, applicable=False,
                                 diagnostics={"reason": "no premium demand: the equilibrium's existence condition fails"})
    cl = j.licensed.capacity
    bulk_j = scenario.subscribers[j.id][ClassId.BULK]
    res = bisect_quality(lambda d: qos(d, cl), qv, min(cl, premium_pool + bulk_j))
    d_l = res.root
    lic_v = min(premium_pool, d_l)
    lic_b = min(bulk_j, d_l - lic_v)
    q_l = qos(lic_v + lic_b, cl)

    if opponent_unlicensed_demand is None:
        opponent_unlicensed_demand = min(scenario.subscribers[i.id][ClassId.BULK], i.backhaul_capacity,
                                         scenario.shared.capacity)
    intra = intra_provider_equilibrium(scenario, opponent_unlicensed_demand, available_bulk=bulk_j - lic_b)
    q_u = intra.achieved_quality["unlicensed"]
    residual = max(abs(q_l - qv), intra.residual)
    return EquilibriumReport(
        EquilibriumKind.INTER_PROVIDER,
        placements={"d_l_j": lic_v + lic_b, "d_l_j_premium": lic_v, "d_l_j_bulk": lic_b,
                    "d_u_j": intra.placements["d_u_j"], "d_u_i": opponent_unlicensed_demand},
        achieved_quality={"licensed": q_l, "unlicensed": q_u},
        residual=residual,
        iterations=res.iterations + intra.iterations,
        converged=(res.clamped or res.widths[-1] <= BISECTION_TOL) and intra.converged,
        clamped=res.clamped or intra.clamped,
        diagnostics={
            "premium_pool": premium_pool,
            "unlicensed_settles_at_bulk_floor": abs(q_u - scenario.bulk_floor) <= BISECTION_TOL,
            "licensed_clamped": res.clamped,
            "unlicensed_clamped": intra.clamped,
            # one marginal unit of premium: licensed vs unlicensed margin
            "premium_unit_margin_licensed": j.price(NetworkKind.LICENSED_AIR, ClassId.PREMIUM)
            - j.licensed.cost_per_unit,
            "premium_unit_margin_unlicensed": j.price(NetworkKind.UNLICENSED_AIR, ClassId.PREMIUM)
            - j.unlicensed_cost(scenario.shared),
        },
    )


# ---------------------------------------------------------------------------
# Grid game


@dataclass(frozen=True)
class PayoffTable:
    wifi: np.ndarray
    combined: np.ndarray
    profit_i: np.ndarray
    profit_j: np.ndarray
    feasible: np.ndarray
    q_unlicensed: np.ndarray
    unlicensed_load: np.ndarray


def payoff_table(scenario, grid_steps: int, backend: str | None = None) -> PayoffTable:
    si, sj = K.wifi_grid(grid_steps), K.combined_grid(grid_steps)
    pi, pj, feas, qu, ul = K.joint_payoffs(K.pack(scenario), si, sj, backend)
    return PayoffTable(si, sj, pi, pj, feas, qu, ul)


def _profiles(scenario, table, a, b):
    i, j = scenario.wifi.id, scenario.combined.id
    return (StrategyProfile(i, float(table.wifi[a, 0]), float(table.wifi[a, 1]), 0.0),
            StrategyProfile(j, *map(float, table.combined[b])))


def nash_oracle(scenario, grid_steps: int, backend: str | None = None) -> list:
    """All pure grid profiles with no profitable feasible unilateral deviation.

    Exhaustive over ``(g+1)**2 * (g+1)**3`` joint profiles, hence capped at
    ``grid_steps <= 12``. Ordered by total unlicensed placement, then
    lexicographically.
    """
    if grid_steps > 12:
        raise DomainError("nash_oracle enumerates exhaustively; grid_steps must be <= 12")
    t = payoff_table(scenario, grid_steps, backend)
    mask = K.nash_mask(t.profit_i, t.profit_j, t.feasible)
    hits = np.argwhere(mask)
    hits = sorted(hits.tolist(), key=lambda ab: (t.unlicensed_load[ab[0], ab[1]], *t.wifi[ab[0]], *t.combined[ab[1]]))
    return [_profiles(scenario, t, a, b) for a, b in hits]


@dataclass(frozen=True)
class FixedPoint:
    profile: tuple
    iterations: int


@dataclass(frozen=True)
class Cycle:
    period: int
    profiles: tuple
    iterations: int


@dataclass(frozen=True)
class NonConvergence:
    iterations: int
    last: tuple


def best_response_dynamics(scenario, initial, grid_steps: int, max_iter: int):
    """Alternate exact grid best responses, Wi-Fi provider first.

    Stops at the first repeated joint profile: a repeat of the previous one is
    a FixedPoint, an older one a Cycle. Exhausting ``max_iter`` yields a
    NonConvergence report rather than an exception.
    """
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    i, j = scenario.wifi.id, scenario.combined.id
    cur = as_pair(scenario, initial)
    history = [cur]
    for it in range(1, max_iter + 1):
        si = best_response(scenario, i, cur[1], grid_steps)
        sj = best_response(scenario, j, si, grid_steps)
        new = (si, sj)
        if new == history[-1]:
            return FixedPoint(new, it)
        if new in history:
            k = history.index(new)
            return Cycle(len(history) - k, tuple(history[k:]), it)
        history.append(new)
        cur = new
    return NonConvergence(max_iter, cur)


def zero_profile(scenario) -> tuple:
    return (StrategyProfile(scenario.wifi.id, 0.0, 0.0, 0.0), StrategyProfile(scenario.combined.id, 0.0, 0.0, 0.0))


@dataclass(frozen=True)
class WelfareGap:
    equilibrium_welfare: float
    coordinated_welfare: float
    gap: float
    relative_gap: float
    equilibrium_profile: tuple = ()
    coordinated_profile: tuple = ()
    source: str = "dynamics"


def welfare(scenario, profile) -> float:
    st = apply_strategy(scenario, profile)
    return sum(st.profits[p.id] for p in scenario.providers)


def commons_welfare_gap(scenario, grid_steps: int, initial=None, backend: str | None = None) -> WelfareGap:
    """Total profit lost by selfish use of the band, on a strategy grid.

    The equilibrium side is the fixed point reached by best-response dynamics
    from ``initial`` (the scenario's initial profile by default); when the
    dynamics cycle, the first oracle equilibrium is used, and when no pure
    equilibrium exists the cycle's average welfare.
    """
    if initial is None:
        initial = scenario.initial()
    dyn = best_response_dynamics(scenario, initial, grid_steps, scenario.solver.max_iter)
    if isinstance(dyn, FixedPoint):
        eq_profile, source = dyn.profile, "dynamics"
        eq_welfare = welfare(scenario, eq_profile)
    else:
        oracle = nash_oracle(scenario, grid_steps, backend)
        if oracle:
            eq_profile, source = oracle[0], "oracle"
            eq_welfare = welfare(scenario, eq_profile)
        else:
            members = dyn.profiles if isinstance(dyn, Cycle) else (dyn.last,)
            eq_profile, source = members[0], "cycle_average"
            eq_welfare = sum(welfare(scenario, m) for m in members) / len(members)

    t = payoff_table(scenario, grid_steps, backend)
    total = np.where(t.feasible, t.profit_i + t.profit_j, -np.inf)
    a, b = np.unravel_index(int(np.argmax(total)), total.shape)
    coord_profile = _profiles(scenario, t, a, b)
    coord = welfare(scenario, coord_profile)
    gap = coord - eq_welfare
    rel = gap / abs(coord) if abs(coord) > TOL else 0.0
    return WelfareGap(eq_welfare, coord, gap, rel, eq_profile, coord_profile, source)
